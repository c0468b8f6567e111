#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mialab/attack.hpp"
#include "mialab/federated.hpp"
#include "mialab/metrics.hpp"

namespace mia {

enum class Scenario { Standalone, Finetune, Federated };

struct DatasetSpec {
    enum class Kind { Synthetic, Csv };
    Kind kind = Kind::Synthetic;
    // synthetic
    std::size_t n = 4000;
    std::size_t dim = 200;
    std::size_t classes = 20;
    double cluster_spread = 0.4;
    // csv
    std::string path;
    std::string label_column = "label";

    Dataset realize(std::uint64_t seed) const;
};

struct AttackSpec {
    AttackMode mode = AttackMode::Passive;
    AttackerRole placement = AttackerRole::Global;
    bool placement_set = false; // true when the config named a placement
    Knowledge knowledge = Knowledge::Supervised;
    double gamma = 0.0;
};

struct FedSpec {
    std::size_t participants = 4;
    std::size_t rounds = 30;
    std::size_t local_epochs = 1;
    std::vector<std::size_t> observed_rounds;
    std::size_t victim = 0;
    std::size_t attacker = 1; // local-role participant id
    bool overlapping_splits = false;
    bool isolation_includes_victim = false;
    bool ascent_on_aggregate = false;
};

/// Multi-run axis inside one experiment (observed-round sets or attack
/// training-set sizes). Each value yields one named result.
struct SweepSpec {
    enum class Axis { ObservedRounds, AttackTrainSize };
    Axis axis = Axis::ObservedRounds;
    std::vector<std::string> names;
    std::vector<std::vector<std::size_t>> round_sets; // ObservedRounds
    std::vector<std::size_t> train_sizes;             // AttackTrainSize
};

/// Where the pipeline stops. Full is the normal end-to-end run; the
/// other phases back the stage-level CLI subcommands. Not serialized.
enum class StopAfter { Full, Target, Observation, Features };

/// One full experiment, declaratively. The master seed is mandatory;
/// every internal stream derives from it.
struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    Scenario scenario = Scenario::Standalone;
    AttackSpec attack;
    FeatureSelection features;
    DatasetSpec dataset;
    SplitSizes split;
    TargetConfig target;
    FedSpec fed;
    AttackTrainConfig attack_training;
    bool dump_features = false;
    std::optional<SweepSpec> sweep;
    StopAfter stop_after = StopAfter::Full;

    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
};

/// FNV-1a over the canonical config serialization, excluding output_dir,
/// so re-runs into different directories share one hash.
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct ExperimentOutcome {
    nlohmann::json summary; // also written to <output_dir>/summary.json
};

/// dataset -> target(s) -> observation -> features -> attack training ->
/// evaluation; artifacts land under cfg.output_dir. Idempotent for a
/// fixed (config, seed).
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

/// Ready-made configurations mirroring the supported study scenarios.
std::vector<ExperimentConfig> scenario_presets();
ExperimentConfig preset_by_name(const std::string& name);

} // namespace mia
