#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mialab/target.hpp"

namespace mia {

enum class AttackerRole { Global, Local };
enum class AttackMode { Passive, GradientAscent, Isolate, IsolateGradientAscent };

/// FedAvg simulation parameters plus the observer/manipulation hooks.
/// Isolation is a server capability, so isolate modes require the global
/// role. A local gradient-ascent attacker perturbs its own upload; a
/// global one perturbs the victim's download (or, behind
/// ascent_on_aggregate, the server-side aggregate itself).
struct FedConfig {
    std::size_t num_participants = 2;
    std::size_t rounds = 1;
    std::size_t local_epochs_per_round = 1;
    std::vector<std::vector<std::size_t>> participant_splits;
    std::vector<std::size_t> observed_rounds; // sorted; |observed_rounds| = T
    AttackerRole attacker_role = AttackerRole::Global;
    std::size_t attacker_id = 0; // participant id for the local role
    std::size_t victim_id = 0;   // target participant for global attacks
    AttackMode attack_mode = AttackMode::Passive;
    double gamma = 0.0;                    // adversarial update rate
    std::vector<std::size_t> target_batch; // record ids the attacker probes
    bool isolation_includes_victim = false; // victim upload still averaged for others
    bool ascent_on_aggregate = false;        // global ascent edits the aggregate itself

    void validate() const;
};

/// What the attacker recorded. Global role: every participant's upload at
/// each observed round. Local role: only the aggregate.
struct ObservationLog {
    AttackerRole role = AttackerRole::Global;
    std::vector<std::size_t> rounds;
    // [t][participant][param], global role only
    std::vector<std::vector<std::vector<Tensor>>> participant_params;
    // [t][param], local role only
    std::vector<std::vector<Tensor>> aggregate_params;

    /// Observed rounds as model snapshots for one party (global role) or
    /// of the aggregate (local role).
    std::vector<ModelSnapshot> snapshots_for(const std::vector<LayerSpec>& arch,
                                             std::size_t participant) const;

    /// One snapshot file per observed round per observed party plus a
    /// JSON manifest listing files, role and rounds.
    void save(const std::string& dir, const std::vector<LayerSpec>& arch) const;
};

struct FedResult {
    ModelSnapshot final_model; // aggregate after the last round
    ObservationLog log;
    std::vector<double> round_train_accuracy; // aggregate on the union of splits
    std::vector<double> round_test_accuracy;
};

/// Moves params against the loss on the target records:
/// params + gamma * sum over the batch of d(loss)/d(params).
std::vector<Tensor> gradient_ascent_inject(const Network& net, const Dataset& ds,
                                           const std::vector<std::size_t>& target_batch,
                                           double gamma);

/// Full FedAvg simulation: every round each participant downloads the
/// global parameters, trains locally, uploads; the server stores the
/// unweighted element-wise mean, evaluated as u0 + (sum_i (u_i - u0))/N
/// so identical uploads aggregate to themselves bit-exactly. Active
/// modes manipulate the affected exchange. Deterministic in (seed, cfg).
/// The local shuffle stream is keyed by (seed, round, epoch) alone, so
/// participants holding identical data produce bit-identical uploads and
/// the aggregate is an exact fixed point.
FedResult run_federated(const Dataset& ds, const FedConfig& cfg, const TargetConfig& target_cfg,
                        const std::vector<std::size_t>& test_idx, std::uint64_t seed);

} // namespace mia
