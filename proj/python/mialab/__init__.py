"""White-box membership inference laboratory.

Thin wrapper over the C++ core: dataset generation, member/non-member
splits, target and federated training, white-box attack training and
evaluation, plus the config-driven experiment runner.
"""

from ._core import (
    ConfigError,
    Dataset,
    MiaError,
    SplitPlan,
    cluster_membership,
    evaluate,
    load_csv,
    make_split,
    normalized_entropy,
    preset,
    presets,
    run_experiment,
    save_csv,
    synth_purchase_like,
    train_target_quick,
)

__all__ = [
    "ConfigError",
    "Dataset",
    "MiaError",
    "SplitPlan",
    "cluster_membership",
    "evaluate",
    "load_csv",
    "make_split",
    "normalized_entropy",
    "preset",
    "presets",
    "run_experiment",
    "save_csv",
    "synth_purchase_like",
    "train_target_quick",
]
