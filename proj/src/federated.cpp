#include "mialab/federated.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mialab/rng.hpp"

namespace mia {

void FedConfig::validate() const {
    if (num_participants < 2) throw ArgumentError("federated training needs >= 2 participants");
    if (rounds < 1) throw ArgumentError("rounds must be >= 1");
    if (local_epochs_per_round < 1) throw ArgumentError("local_epochs_per_round must be >= 1");
    if (participant_splits.size() != num_participants) {
        throw ArgumentError("expected " + std::to_string(num_participants) +
                            " participant splits, got " +
                            std::to_string(participant_splits.size()));
    }
    for (std::size_t p = 0; p < participant_splits.size(); ++p) {
        if (participant_splits[p].empty()) {
            throw ArgumentError("participant " + std::to_string(p) + " has no data");
        }
    }
    if (!std::is_sorted(observed_rounds.begin(), observed_rounds.end())) {
        throw ArgumentError("observed_rounds must be sorted");
    }
    for (std::size_t r : observed_rounds) {
        if (r < 1 || r > rounds) {
            throw ArgumentError("observed round " + std::to_string(r) + " outside [1, " +
                                std::to_string(rounds) + "]");
        }
    }
    const bool isolating = attack_mode == AttackMode::Isolate ||
                           attack_mode == AttackMode::IsolateGradientAscent;
    if (isolating && attacker_role != AttackerRole::Global) {
        throw ArgumentError("isolation is a server capability; it requires the global role");
    }
    if (attacker_role == AttackerRole::Local && attacker_id >= num_participants) {
        throw ArgumentError("local attacker id " + std::to_string(attacker_id) +
                            " out of range");
    }
    if (victim_id >= num_participants) {
        throw ArgumentError("victim id " + std::to_string(victim_id) + " out of range");
    }
    if (gamma < 0.0) throw ArgumentError("gamma must be >= 0");
    if (attack_mode == AttackMode::GradientAscent ||
        attack_mode == AttackMode::IsolateGradientAscent) {
        if (target_batch.empty()) {
            throw ArgumentError("gradient ascent needs a non-empty target batch");
        }
    }
}

std::vector<ModelSnapshot> ObservationLog::snapshots_for(const std::vector<LayerSpec>& arch,
                                                         std::size_t participant) const {
    std::vector<ModelSnapshot> out;
    out.reserve(rounds.size());
    for (std::size_t t = 0; t < rounds.size(); ++t) {
        ModelSnapshot s;
        s.epoch = static_cast<std::int64_t>(rounds[t]);
        s.arch = arch;
        s.params = role == AttackerRole::Global ? participant_params[t][participant]
                                                : aggregate_params[t];
        out.push_back(std::move(s));
    }
    return out;
}

void ObservationLog::save(const std::string& dir, const std::vector<LayerSpec>& arch) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    nlohmann::json manifest;
    manifest["role"] = role == AttackerRole::Global ? "global" : "local";
    manifest["rounds"] = rounds;
    nlohmann::json files = nlohmann::json::array();

    for (std::size_t t = 0; t < rounds.size(); ++t) {
        if (role == AttackerRole::Global) {
            for (std::size_t p = 0; p < participant_params[t].size(); ++p) {
                ModelSnapshot s;
                s.epoch = static_cast<std::int64_t>(rounds[t]);
                s.arch = arch;
                s.params = participant_params[t][p];
                const std::string name =
                    "round" + std::to_string(rounds[t]) + "_party" + std::to_string(p) + ".snap";
                save_snapshot(s, (fs::path(dir) / name).string());
                files.push_back({{"file", name},
                                 {"round", rounds[t]},
                                 {"party", p}});
            }
        } else {
            ModelSnapshot s;
            s.epoch = static_cast<std::int64_t>(rounds[t]);
            s.arch = arch;
            s.params = aggregate_params[t];
            const std::string name = "round" + std::to_string(rounds[t]) + "_aggregate.snap";
            save_snapshot(s, (fs::path(dir) / name).string());
            files.push_back({{"file", name}, {"round", rounds[t]}});
        }
    }
    manifest["files"] = files;

    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw IoError("cannot write observation manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

std::vector<Tensor> gradient_ascent_inject(const Network& net, const Dataset& ds,
                                           const std::vector<std::size_t>& target_batch,
                                           double gamma) {
    if (gamma < 0.0) throw ArgumentError("gamma must be >= 0");
    std::vector<Tensor> out = net.params;
    if (gamma == 0.0 || target_batch.empty()) return out;

    for (std::size_t i : target_batch) {
        auto [trace, grads] = loss_and_backward(net, ds.row(i), ds.labels[i]);
        for (std::size_t g = 0; g < grads.param_grads.size(); ++g) {
            double* dst = out[g].data.data();
            const double* src = grads.param_grads[g].data.data();
            const std::size_t n = grads.param_grads[g].size();
            for (std::size_t k = 0; k < n; ++k) dst[k] += gamma * src[k];
        }
    }
    return out;
}

namespace {

// Unweighted mean of the selected uploads, evaluated as
// u0 + (sum_i (u_i - u0)) / N so identical uploads aggregate to
// themselves bit-exactly.
std::vector<Tensor> mean_params(const std::vector<std::vector<Tensor>>& uploads,
                                const std::vector<std::size_t>& who) {
    std::vector<Tensor> agg = uploads[who.front()];
    const double n = static_cast<double>(who.size());
    for (std::size_t g = 0; g < agg.size(); ++g) {
        double* dst = agg[g].data.data();
        const double* base = uploads[who.front()][g].data.data();
        for (std::size_t k = 0; k < agg[g].size(); ++k) {
            double diff = 0.0;
            for (std::size_t j = 1; j < who.size(); ++j) {
                diff += uploads[who[j]][g].data[k] - base[k];
            }
            dst[k] = base[k] + diff / n;
        }
    }
    return agg;
}

} // namespace

FedResult run_federated(const Dataset& ds, const FedConfig& cfg, const TargetConfig& target_cfg,
                        const std::vector<std::size_t>& test_idx, std::uint64_t seed) {
    cfg.validate();
    target_cfg.validate(ds);

    const std::size_t n_parties = cfg.num_participants;
    const bool global_attacker = cfg.attacker_role == AttackerRole::Global;
    const bool isolating = cfg.attack_mode == AttackMode::Isolate ||
                           cfg.attack_mode == AttackMode::IsolateGradientAscent;
    const bool ascending = cfg.attack_mode == AttackMode::GradientAscent ||
                           cfg.attack_mode == AttackMode::IsolateGradientAscent;

    Network init = make_target_network(target_cfg.layer_sizes,
                                       Rng::derive(seed, {0x7au}).next_u64());
    std::vector<Tensor> global_params = init.params;

    std::vector<std::size_t> union_train;
    for (const auto& s : cfg.participant_splits) {
        union_train.insert(union_train.end(), s.begin(), s.end());
    }
    std::sort(union_train.begin(), union_train.end());
    union_train.erase(std::unique(union_train.begin(), union_train.end()), union_train.end());

    FedResult result;
    result.log.role = cfg.attacker_role;
    result.log.rounds = cfg.observed_rounds;

    std::vector<std::vector<Tensor>> uploads(n_parties);
    std::vector<std::vector<Tensor>> last_uploads(n_parties);

    Network work = init; // reused per participant to avoid reallocation

    for (std::size_t round = 1; round <= cfg.rounds; ++round) {
        for (std::size_t p = 0; p < n_parties; ++p) {
            // Download: the global parameters, unless the server is
            // isolating this victim (it then receives its own last upload)
            // or targeting it with gradient ascent.
            std::vector<Tensor> down = global_params;
            if (global_attacker && p == cfg.victim_id) {
                if (isolating && round > 1) down = last_uploads[p];
                if (ascending && !cfg.ascent_on_aggregate) {
                    work.params = std::move(down);
                    down = gradient_ascent_inject(work, ds, cfg.target_batch, cfg.gamma);
                }
            }

            work.params = std::move(down);
            OptimizerState opt = target_cfg.make_optimizer();
            for (std::size_t e = 1; e <= cfg.local_epochs_per_round; ++e) {
                train_one_epoch(work, opt, ds, cfg.participant_splits[p], target_cfg.batch_size,
                                Rng::derive(seed, {0xfedu, round, e}).next_u64());
            }
            uploads[p] = work.params;

            // A local adversary perturbs its own upload.
            if (!global_attacker && ascending && p == cfg.attacker_id) {
                uploads[p] = gradient_ascent_inject(work, ds, cfg.target_batch, cfg.gamma);
            }
        }

        std::vector<std::size_t> who;
        for (std::size_t p = 0; p < n_parties; ++p) {
            if (isolating && !cfg.isolation_includes_victim && p == cfg.victim_id) continue;
            who.push_back(p);
        }
        global_params = mean_params(uploads, who);
        if (global_attacker && ascending && cfg.ascent_on_aggregate) {
            work.params = global_params;
            global_params = gradient_ascent_inject(work, ds, cfg.target_batch, cfg.gamma);
        }
        last_uploads = uploads;

        if (std::binary_search(cfg.observed_rounds.begin(), cfg.observed_rounds.end(), round)) {
            if (global_attacker) {
                result.log.participant_params.push_back(uploads);
            } else {
                result.log.aggregate_params.push_back(global_params);
            }
        }

        work.params = global_params;
        result.round_train_accuracy.push_back(accuracy(work, ds, union_train));
        result.round_test_accuracy.push_back(test_idx.empty() ? 0.0
                                                              : accuracy(work, ds, test_idx));
    }

    work.params = global_params;
    result.final_model = ModelSnapshot::of(work, static_cast<std::int64_t>(cfg.rounds));
    return result;
}

} // namespace mia
