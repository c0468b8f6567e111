#include "mialab/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <tuple>

#include "mialab/rng.hpp"

namespace mia {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// config (de)serialization

namespace {

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::Standalone: return "standalone";
        case Scenario::Finetune: return "finetune";
        case Scenario::Federated: return "federated";
    }
    return "standalone";
}

Scenario parse_scenario(const std::string& s) {
    if (s == "standalone") return Scenario::Standalone;
    if (s == "finetune") return Scenario::Finetune;
    if (s == "federated") return Scenario::Federated;
    throw ConfigError("unknown scenario '" + s + "'");
}

std::string mode_name(AttackMode m) {
    switch (m) {
        case AttackMode::Passive: return "passive";
        case AttackMode::GradientAscent: return "gradient_ascent";
        case AttackMode::Isolate: return "isolate";
        case AttackMode::IsolateGradientAscent: return "isolate_gradient_ascent";
    }
    return "passive";
}

AttackMode parse_mode(const std::string& s) {
    if (s == "passive") return AttackMode::Passive;
    if (s == "gradient_ascent") return AttackMode::GradientAscent;
    if (s == "isolate") return AttackMode::Isolate;
    if (s == "isolate_gradient_ascent") return AttackMode::IsolateGradientAscent;
    throw ConfigError("unknown attack mode '" + s + "'");
}

std::string layerset_to_string(FeatureSelection::LayerSet s) {
    using LS = FeatureSelection::LayerSet;
    switch (s) {
        case LS::None: return "none";
        case LS::Last: return "last";
        case LS::LastK: return "last_k";
        case LS::All: return "all";
        case LS::Explicit: return "explicit";
    }
    return "none";
}

json layerset_to_json(FeatureSelection::LayerSet s, std::size_t last_k,
                      const std::vector<std::size_t>& idx) {
    using LS = FeatureSelection::LayerSet;
    if (s == LS::LastK) return json{{"last_k", last_k}};
    if (s == LS::Explicit) return json(idx);
    return json(layerset_to_string(s));
}

void layerset_from_json(const json& v, FeatureSelection::LayerSet& s, std::size_t& last_k,
                        std::vector<std::size_t>& idx) {
    using LS = FeatureSelection::LayerSet;
    if (v.is_string()) {
        const std::string str = v.get<std::string>();
        if (str == "none") {
            s = LS::None;
        } else if (str == "last") {
            s = LS::Last;
        } else if (str == "all") {
            s = LS::All;
        } else {
            throw ConfigError("unknown layer set '" + str + "'");
        }
    } else if (v.is_object() && v.contains("last_k")) {
        s = LS::LastK;
        last_k = v.at("last_k").get<std::size_t>();
    } else if (v.is_array()) {
        s = LS::Explicit;
        idx = v.get<std::vector<std::size_t>>();
    } else {
        throw ConfigError("layer set must be a string, {last_k: n}, or an index array");
    }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

} // namespace

Dataset DatasetSpec::realize(std::uint64_t seed) const {
    if (kind == Kind::Synthetic) {
        return synth_purchase_like(n, dim, classes, cluster_spread, seed);
    }
    return load_csv(path, {label_column, classes});
}

void ExperimentConfig::validate() const {
    if (attack.mode != AttackMode::Passive && scenario != Scenario::Federated) {
        throw ConfigError("active attack modes require the federated scenario");
    }
    if (attack.placement_set && scenario != Scenario::Federated) {
        throw ConfigError("attacker placement applies to the federated scenario only");
    }
    if (scenario == Scenario::Finetune && split.finetune == 0) {
        throw ConfigError("the finetune scenario needs a non-empty finetune split");
    }
    if (scenario == Scenario::Federated) {
        if (fed.observed_rounds.empty()) {
            throw ConfigError("federated attacks need at least one observed round");
        }
        for (std::size_t r : fed.observed_rounds) {
            if (r < 1 || r > fed.rounds) {
                throw ConfigError("observed round " + std::to_string(r) + " outside [1, " +
                                  std::to_string(fed.rounds) + "]");
            }
        }
        if (fed.participants < 2) throw ConfigError("federated training needs >= 2 participants");
        if (fed.victim >= fed.participants || fed.attacker >= fed.participants) {
            throw ConfigError("victim/attacker participant id out of range");
        }
    }
    if (attack.gamma < 0.0) throw ConfigError("gamma must be >= 0");
    if (stop_after == StopAfter::Target && scenario == Scenario::Federated) {
        throw ConfigError("target-only runs apply to stand-alone and fine-tune scenarios");
    }
    if (stop_after == StopAfter::Observation && scenario != Scenario::Federated) {
        throw ConfigError("observation-only runs require the federated scenario");
    }
    if (split.attack_train_members == 0 || split.attack_train_nonmembers == 0 ||
        split.attack_test_members == 0) {
        throw ConfigError("attack train/test sets must be non-empty");
    }
    if (sweep) {
        if (sweep->axis == SweepSpec::Axis::ObservedRounds) {
            if (sweep->round_sets.empty()) throw ConfigError("sweep has no round sets");
            if (scenario != Scenario::Federated) {
                throw ConfigError("an observed-rounds sweep requires the federated scenario");
            }
        } else if (sweep->train_sizes.empty()) {
            throw ConfigError("sweep has no training sizes");
        }
        const std::size_t count = sweep->axis == SweepSpec::Axis::ObservedRounds
                                      ? sweep->round_sets.size()
                                      : sweep->train_sizes.size();
        if (!sweep->names.empty() && sweep->names.size() != count) {
            throw ConfigError("sweep names do not match the value count");
        }
    }
}

json ExperimentConfig::to_json() const {
    json j;
    j["name"] = name;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    j["scenario"] = scenario_name(scenario);

    json a;
    a["mode"] = mode_name(attack.mode);
    if (attack.placement_set) {
        a["placement"] = attack.placement == AttackerRole::Global ? "global" : "local";
    }
    a["knowledge"] = attack.knowledge == Knowledge::Supervised ? "supervised" : "unsupervised";
    a["gamma"] = attack.gamma;
    j["attack"] = a;

    json f;
    f["grad_layers"] =
        layerset_to_json(features.grad_layers, features.grad_last_k, features.grad_indices);
    f["output_layers"] = layerset_to_json(features.output_layers, features.output_last_k,
                                          features.output_indices);
    f["include_loss"] = features.include_loss;
    f["include_label"] = features.include_label;
    f["include_output"] = features.include_output;
    j["features"] = f;

    json d;
    d["kind"] = dataset.kind == DatasetSpec::Kind::Synthetic ? "synthetic" : "csv";
    if (dataset.kind == DatasetSpec::Kind::Synthetic) {
        d["n"] = dataset.n;
        d["dim"] = dataset.dim;
        d["classes"] = dataset.classes;
        d["cluster_spread"] = dataset.cluster_spread;
    } else {
        d["path"] = dataset.path;
        d["label_column"] = dataset.label_column;
        d["classes"] = dataset.classes;
    }
    j["dataset"] = d;

    json s;
    s["target_train"] = split.target_train;
    s["target_test"] = split.target_test;
    s["attack_train_members"] = split.attack_train_members;
    s["attack_train_nonmembers"] = split.attack_train_nonmembers;
    s["attack_test_members"] = split.attack_test_members;
    s["attack_test_nonmembers"] = split.attack_test_nonmembers;
    s["finetune"] = split.finetune;
    j["split"] = s;

    json t;
    t["layer_sizes"] = target.layer_sizes;
    t["optimizer"] = target.optimizer == OptKind::Adam ? "adam" : "sgd";
    t["learning_rate"] = target.learning_rate;
    t["l2"] = target.l2_weight;
    t["epochs"] = target.epochs;
    t["batch_size"] = target.batch_size;
    t["snapshot_epochs"] = target.snapshot_epochs;
    j["target"] = t;

    json fd;
    fd["participants"] = fed.participants;
    fd["rounds"] = fed.rounds;
    fd["local_epochs"] = fed.local_epochs;
    fd["observed_rounds"] = fed.observed_rounds;
    fd["victim"] = fed.victim;
    fd["attacker"] = fed.attacker;
    fd["overlapping_splits"] = fed.overlapping_splits;
    fd["isolation_includes_victim"] = fed.isolation_includes_victim;
    fd["ascent_on_aggregate"] = fed.ascent_on_aggregate;
    j["federated"] = fd;

    json at;
    at["learning_rate"] = attack_training.learning_rate;
    at["batch_size"] = attack_training.batch_size;
    at["epochs"] = attack_training.epochs;
    at["balanced_batches"] = attack_training.balanced_batches;
    at["conv_kernels"] = attack_training.conv_kernels;
    j["attack_training"] = at;

    j["dump_features"] = dump_features;

    if (sweep) {
        json sw;
        sw["axis"] = sweep->axis == SweepSpec::Axis::ObservedRounds ? "observed_rounds"
                                                                    : "attack_train_size";
        if (!sweep->names.empty()) sw["names"] = sweep->names;
        if (sweep->axis == SweepSpec::Axis::ObservedRounds) {
            sw["values"] = sweep->round_sets;
        } else {
            sw["values"] = sweep->train_sizes;
        }
        j["sweep"] = sw;
    }
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    check_keys(j,
               {"name", "seed", "output_dir", "scenario", "attack", "features", "dataset",
                "split", "target", "federated", "attack_training", "dump_features", "sweep"},
               "config");
    if (!j.contains("seed")) {
        throw ConfigError("config needs an explicit master seed (no wall-clock seeding)");
    }

    ExperimentConfig cfg;
    cfg.name = get_or<std::string>(j, "name", cfg.name);
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir);
    cfg.scenario = parse_scenario(get_or<std::string>(j, "scenario", "standalone"));

    if (j.contains("attack")) {
        const json& a = j.at("attack");
        check_keys(a, {"mode", "placement", "knowledge", "gamma"}, "attack");
        cfg.attack.mode = parse_mode(get_or<std::string>(a, "mode", "passive"));
        if (a.contains("placement")) {
            const std::string p = a.at("placement").get<std::string>();
            if (p == "global") {
                cfg.attack.placement = AttackerRole::Global;
            } else if (p == "local") {
                cfg.attack.placement = AttackerRole::Local;
            } else {
                throw ConfigError("unknown placement '" + p + "'");
            }
            cfg.attack.placement_set = true;
        }
        const std::string k = get_or<std::string>(a, "knowledge", "supervised");
        if (k == "supervised") {
            cfg.attack.knowledge = Knowledge::Supervised;
        } else if (k == "unsupervised") {
            cfg.attack.knowledge = Knowledge::Unsupervised;
        } else {
            throw ConfigError("unknown knowledge '" + k + "'");
        }
        cfg.attack.gamma = get_or<double>(a, "gamma", 0.0);
    }

    if (j.contains("features")) {
        const json& f = j.at("features");
        check_keys(f,
                   {"grad_layers", "output_layers", "include_loss", "include_label",
                    "include_output"},
                   "features");
        if (f.contains("grad_layers")) {
            layerset_from_json(f.at("grad_layers"), cfg.features.grad_layers,
                               cfg.features.grad_last_k, cfg.features.grad_indices);
        }
        if (f.contains("output_layers")) {
            layerset_from_json(f.at("output_layers"), cfg.features.output_layers,
                               cfg.features.output_last_k, cfg.features.output_indices);
        }
        cfg.features.include_loss = get_or<bool>(f, "include_loss", true);
        cfg.features.include_label = get_or<bool>(f, "include_label", true);
        cfg.features.include_output = get_or<bool>(f, "include_output", true);
    }

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_keys(d, {"kind", "n", "dim", "classes", "cluster_spread", "path", "label_column"},
                   "dataset");
        const std::string kind = get_or<std::string>(d, "kind", "synthetic");
        if (kind == "synthetic") {
            cfg.dataset.kind = DatasetSpec::Kind::Synthetic;
        } else if (kind == "csv") {
            cfg.dataset.kind = DatasetSpec::Kind::Csv;
        } else {
            throw ConfigError("unknown dataset kind '" + kind + "'");
        }
        cfg.dataset.n = get_or<std::size_t>(d, "n", cfg.dataset.n);
        cfg.dataset.dim = get_or<std::size_t>(d, "dim", cfg.dataset.dim);
        cfg.dataset.classes = get_or<std::size_t>(d, "classes", cfg.dataset.classes);
        cfg.dataset.cluster_spread = get_or<double>(d, "cluster_spread",
                                                    cfg.dataset.cluster_spread);
        cfg.dataset.path = get_or<std::string>(d, "path", "");
        cfg.dataset.label_column = get_or<std::string>(d, "label_column", "label");
        if (cfg.dataset.kind == DatasetSpec::Kind::Csv && cfg.dataset.path.empty()) {
            throw ConfigError("csv dataset needs a path");
        }
    }

    if (j.contains("split")) {
        const json& s = j.at("split");
        check_keys(s,
                   {"target_train", "target_test", "attack_train_members",
                    "attack_train_nonmembers", "attack_test_members", "attack_test_nonmembers",
                    "finetune"},
                   "split");
        cfg.split.target_train = get_or<std::size_t>(s, "target_train", 0);
        cfg.split.target_test = get_or<std::size_t>(s, "target_test", 0);
        cfg.split.attack_train_members = get_or<std::size_t>(s, "attack_train_members", 0);
        cfg.split.attack_train_nonmembers = get_or<std::size_t>(s, "attack_train_nonmembers", 0);
        cfg.split.attack_test_members = get_or<std::size_t>(s, "attack_test_members", 0);
        cfg.split.attack_test_nonmembers = get_or<std::size_t>(s, "attack_test_nonmembers", 0);
        cfg.split.finetune = get_or<std::size_t>(s, "finetune", 0);
    }

    if (j.contains("target")) {
        const json& t = j.at("target");
        check_keys(t,
                   {"layer_sizes", "optimizer", "learning_rate", "l2", "epochs", "batch_size",
                    "snapshot_epochs"},
                   "target");
        cfg.target.layer_sizes = get_or<std::vector<std::size_t>>(t, "layer_sizes", {});
        const std::string opt = get_or<std::string>(t, "optimizer", "adam");
        if (opt == "adam") {
            cfg.target.optimizer = OptKind::Adam;
        } else if (opt == "sgd") {
            cfg.target.optimizer = OptKind::Sgd;
        } else {
            throw ConfigError("unknown optimizer '" + opt + "'");
        }
        cfg.target.learning_rate = get_or<double>(t, "learning_rate", 0.001);
        cfg.target.l2_weight = get_or<double>(t, "l2", 0.0);
        cfg.target.epochs = get_or<std::size_t>(t, "epochs", 100);
        cfg.target.batch_size = get_or<std::size_t>(t, "batch_size", 64);
        cfg.target.snapshot_epochs = get_or<std::vector<std::size_t>>(t, "snapshot_epochs", {});
    }

    if (j.contains("federated")) {
        const json& f = j.at("federated");
        check_keys(f,
                   {"participants", "rounds", "local_epochs", "observed_rounds", "victim",
                    "attacker", "overlapping_splits", "isolation_includes_victim",
                    "ascent_on_aggregate"},
                   "federated");
        cfg.fed.participants = get_or<std::size_t>(f, "participants", 4);
        cfg.fed.rounds = get_or<std::size_t>(f, "rounds", 30);
        cfg.fed.local_epochs = get_or<std::size_t>(f, "local_epochs", 1);
        cfg.fed.observed_rounds = get_or<std::vector<std::size_t>>(f, "observed_rounds", {});
        cfg.fed.victim = get_or<std::size_t>(f, "victim", 0);
        cfg.fed.attacker = get_or<std::size_t>(f, "attacker", 1);
        cfg.fed.overlapping_splits = get_or<bool>(f, "overlapping_splits", false);
        cfg.fed.isolation_includes_victim = get_or<bool>(f, "isolation_includes_victim", false);
        cfg.fed.ascent_on_aggregate = get_or<bool>(f, "ascent_on_aggregate", false);
    }

    if (j.contains("attack_training")) {
        const json& a = j.at("attack_training");
        check_keys(a, {"learning_rate", "batch_size", "epochs", "balanced_batches",
                       "conv_kernels"},
                   "attack_training");
        cfg.attack_training.learning_rate = get_or<double>(a, "learning_rate", 1e-4);
        cfg.attack_training.batch_size = get_or<std::size_t>(a, "batch_size", 64);
        cfg.attack_training.epochs = get_or<std::size_t>(a, "epochs", 100);
        cfg.attack_training.balanced_batches = get_or<bool>(a, "balanced_batches", true);
        cfg.attack_training.conv_kernels = get_or<std::size_t>(a, "conv_kernels", 1000);
    }

    cfg.dump_features = get_or<bool>(j, "dump_features", false);

    if (j.contains("sweep")) {
        const json& sw = j.at("sweep");
        check_keys(sw, {"axis", "names", "values"}, "sweep");
        SweepSpec spec;
        const std::string axis = get_or<std::string>(sw, "axis", "observed_rounds");
        if (axis == "observed_rounds") {
            spec.axis = SweepSpec::Axis::ObservedRounds;
            spec.round_sets = sw.at("values").get<std::vector<std::vector<std::size_t>>>();
        } else if (axis == "attack_train_size") {
            spec.axis = SweepSpec::Axis::AttackTrainSize;
            spec.train_sizes = sw.at("values").get<std::vector<std::size_t>>();
        } else {
            throw ConfigError("unknown sweep axis '" + axis + "'");
        }
        spec.names = get_or<std::vector<std::string>>(sw, "names", {});
        cfg.sweep = spec;
    }

    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    json j = cfg.to_json();
    j.erase("output_dir");
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// pipeline pieces

namespace {

/// Runs one pipeline stage, prefixing failures with the stage name.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw Error(std::string(name) + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(std::string(name) + ": " + e.what());
    }
}

struct AttackSets {
    std::vector<std::size_t> train_members;
    std::vector<std::size_t> train_nonmembers;
    std::vector<std::size_t> test_members;
    std::vector<std::size_t> test_nonmembers;
};

std::vector<std::size_t> take_front(const std::vector<std::size_t>& v, std::size_t n) {
    return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size()))};
}

/// Trims the test sides to a common size so evaluation stays balanced.
void balance_tests(AttackSets& sets) {
    const std::size_t n = std::min(sets.test_members.size(), sets.test_nonmembers.size());
    if (n == 0) throw ConfigError("no balanced attack test records available");
    sets.test_members = take_front(sets.test_members, n);
    sets.test_nonmembers = take_front(sets.test_nonmembers, n);
    if (sets.train_members.empty() || sets.train_nonmembers.empty()) {
        throw ConfigError("empty attack training class");
    }
}

/// Splits a member pool into attack train/test member sets of (at most)
/// the requested sizes, deterministically.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_pool(
    const std::vector<std::size_t>& pool, std::size_t want_train, std::size_t want_test,
    std::uint64_t seed) {
    Rng rng = Rng::derive(seed, {0x9001u});
    const std::vector<std::size_t> perm = shuffled_indices(pool.size(), rng);
    const std::size_t n_train = std::min(want_train, pool.size());
    const std::size_t n_test = std::min(want_test, pool.size() - n_train);
    if (n_train == 0 || n_test == 0) {
        throw ConfigError("member pool of " + std::to_string(pool.size()) +
                          " records cannot supply attack train and test members");
    }
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < n_train; ++i) train.push_back(pool[perm[i]]);
    for (std::size_t i = n_train; i < n_train + n_test; ++i) test.push_back(pool[perm[i]]);
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

std::vector<std::vector<std::size_t>> build_participant_splits(
    const std::vector<std::size_t>& train, const FedSpec& fed, std::uint64_t seed) {
    const std::size_t share = train.size() / fed.participants;
    if (share == 0) {
        throw ConfigError("target training set too small for " +
                          std::to_string(fed.participants) + " participants");
    }
    std::vector<std::vector<std::size_t>> splits(fed.participants);
    if (fed.overlapping_splits) {
        for (std::size_t p = 0; p < fed.participants; ++p) {
            Rng rng = Rng::derive(seed, {0xfe1u, p});
            const auto perm = shuffled_indices(train.size(), rng);
            for (std::size_t i = 0; i < share; ++i) splits[p].push_back(train[perm[i]]);
            std::sort(splits[p].begin(), splits[p].end());
        }
    } else {
        Rng rng = Rng::derive(seed, {0xfe0u});
        const auto perm = shuffled_indices(train.size(), rng);
        for (std::size_t p = 0; p < fed.participants; ++p) {
            for (std::size_t i = 0; i < share; ++i) {
                splits[p].push_back(train[perm[p * share + i]]);
            }
            std::sort(splits[p].begin(), splits[p].end());
        }
    }
    return splits;
}

std::vector<AttackFeatures> extract_set(const std::vector<ModelSnapshot>& snapshots,
                                        const Dataset& ds,
                                        const std::vector<std::size_t>& idx,
                                        const FeatureSelection& sel) {
    std::vector<AttackFeatures> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(extract_record(snapshots, ds, i, sel));
    return out;
}

json eval_to_json(const EvalResult& r, double threshold) {
    json j;
    j["attack_accuracy"] = r.attack_accuracy;
    j["tpr"] = r.tpr;
    j["fpr"] = r.fpr;
    j["auc"] = r.auc;
    j["threshold"] = threshold;
    json roc = json::array();
    for (const auto& p : r.roc_points) {
        roc.push_back({{"threshold", p.threshold}, {"fpr", p.fpr}, {"tpr", p.tpr}});
    }
    j["roc"] = roc;
    return j;
}

struct AttackRun {
    std::string name;
    EvalResult eval;
    double threshold = 0.5;
    std::vector<double> scores; // test members then test non-members
    std::vector<int> truth;
    std::size_t n_train_members = 0;
    std::size_t n_train_nonmembers = 0;
    std::size_t n_test = 0;
    std::size_t best_epoch = 0;
};

AttackRun run_one_attack(const std::string& name, const Dataset& ds,
                         const std::vector<ModelSnapshot>& snapshots, const AttackSets& sets,
                         const FeatureSelection& sel, Knowledge knowledge,
                         const AttackTrainConfig& train_cfg, std::uint64_t seed,
                         const std::string& save_dir) {
    AttackRun run;
    run.name = name;
    run.n_train_members = sets.train_members.size();
    run.n_train_nonmembers = sets.train_nonmembers.size();
    run.n_test = sets.test_members.size();

    const auto [train_m, train_n, test_m, test_n] = stage("feature-extraction", [&] {
        return std::make_tuple(extract_set(snapshots, ds, sets.train_members, sel),
                               extract_set(snapshots, ds, sets.train_nonmembers, sel),
                               extract_set(snapshots, ds, sets.test_members, sel),
                               extract_set(snapshots, ds, sets.test_nonmembers, sel));
    });

    for (std::size_t i = 0; i < test_m.size(); ++i) run.truth.push_back(1);
    for (std::size_t i = 0; i < test_n.size(); ++i) run.truth.push_back(0);

    if (knowledge == Knowledge::Supervised) {
        const SupervisedTrainResult r = stage("attack-training", [&] {
            return train_supervised(train_m, train_n, test_m, test_n, train_cfg, seed);
        });
        if (!save_dir.empty()) save_attack_net(r.net, save_dir);
        run.best_epoch = r.best_epoch;
        for (const auto& f : test_m) run.scores.push_back(attack_score(r.net, f));
        for (const auto& f : test_n) run.scores.push_back(attack_score(r.net, f));
        run.threshold = 0.5;
        run.eval = evaluate(run.scores, run.truth, run.threshold);
        return run;
    }

    // Unsupervised: train the encoder-decoder on the unlabeled pool, then
    // threshold-cluster the test embeddings; the cluster with the larger
    // mean gradient norm is called non-member.
    std::vector<AttackFeatures> pool;
    pool.reserve(train_m.size() + train_n.size());
    for (const auto& f : train_m) pool.push_back(f);
    for (const auto& f : train_n) pool.push_back(f);
    const UnsupervisedTrainResult r =
        stage("attack-training", [&] { return train_unsupervised(pool, train_cfg, seed); });
    if (!save_dir.empty()) save_attack_net(r.net, save_dir);

    std::vector<double> embeddings;
    std::vector<double> grad_norms;
    for (const auto& f : test_m) {
        embeddings.push_back(attack_score(r.net, f));
        grad_norms.push_back(f.grad_norm_all.back());
    }
    for (const auto& f : test_n) {
        embeddings.push_back(attack_score(r.net, f));
        grad_norms.push_back(f.grad_norm_all.back());
    }
    const std::vector<int> labels = cluster_membership(embeddings, grad_norms);

    // Orient scores so "larger means member" and recover the cluster
    // threshold, so evaluate() reproduces the clustering verdicts.
    double member_max = -std::numeric_limits<double>::infinity();
    double member_min = std::numeric_limits<double>::infinity();
    double other_max = -std::numeric_limits<double>::infinity();
    double other_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            member_max = std::max(member_max, embeddings[i]);
            member_min = std::min(member_min, embeddings[i]);
        } else {
            other_max = std::max(other_max, embeddings[i]);
            other_min = std::min(other_min, embeddings[i]);
        }
    }
    const bool member_high = member_min > other_max;
    run.scores = embeddings;
    if (member_high) {
        run.threshold = 0.5 * (other_max + member_min);
    } else {
        for (double& s : run.scores) s = -s;
        run.threshold = 0.5 * (-member_max - other_min);
    }
    run.eval = evaluate(run.scores, run.truth, run.threshold);
    return run;
}

json summarize_attack(const AttackRun& run) {
    json j;
    j["attack_accuracy"] = run.eval.attack_accuracy;
    j["tpr"] = run.eval.tpr;
    j["fpr"] = run.eval.fpr;
    j["auc"] = run.eval.auc;
    j["n_train_members"] = run.n_train_members;
    j["n_train_nonmembers"] = run.n_train_nonmembers;
    j["n_test_per_class"] = run.n_test;
    if (run.best_epoch > 0) j["best_epoch"] = run.best_epoch;
    return j;
}

/// Last-layer gradient-norm diagnostic over the attack test split of the
/// final observed snapshot.
json grad_norm_diagnostic(const Dataset& ds, const ModelSnapshot& snap,
                          const AttackSets& sets, const std::string& out_dir) {
    Network net = snap.to_network();
    GradNormGroup members{"member", static_cast<std::size_t>(snap.epoch), {}};
    GradNormGroup nonmembers{"nonmember", static_cast<std::size_t>(snap.epoch), {}};
    for (std::size_t i : sets.test_members) {
        auto [trace, grads] = loss_and_backward(net, ds.row(i), ds.labels[i]);
        (void)trace;
        members.values.push_back(gradient_norm(grads, LayerSelector::last()));
    }
    for (std::size_t i : sets.test_nonmembers) {
        auto [trace, grads] = loss_and_backward(net, ds.row(i), ds.labels[i]);
        (void)trace;
        nonmembers.values.push_back(gradient_norm(grads, LayerSelector::last()));
    }
    const auto stats = grad_norm_report({members, nonmembers});
    write_grad_norm_csv(stats, (fs::path(out_dir) / "grad_norms.csv").string());

    json j;
    j["member_mean"] = stats[0].mean;
    j["member_std"] = stats[0].stddev;
    j["nonmember_mean"] = stats[1].mean;
    j["nonmember_std"] = stats[1].stddev;
    j["separated"] = stats[0].separated;
    return j;
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << "\n";
}

struct PlannedAttack {
    std::string name;
    AttackSets sets;
};

ExperimentOutcome run_single(const ExperimentConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.output_dir);
    write_json_file(cfg.to_json(), (fs::path(cfg.output_dir) / "config.json").string());

    const Dataset ds = stage("dataset", [&] {
        return cfg.dataset.realize(Rng::derive(cfg.seed, {0x0d5u}).next_u64());
    });
    const SplitPlan plan = stage("split", [&] {
        return make_split(ds, cfg.split, Rng::derive(cfg.seed, {0x591u}).next_u64());
    });

    json summary;
    summary["name"] = cfg.name;
    summary["seed"] = cfg.seed;
    summary["scenario"] = scenario_name(cfg.scenario);
    {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(config_hash(cfg)));
        summary["config_hash"] = std::string(buf);
    }

    const fs::path snap_dir = fs::path(cfg.output_dir) / "snapshots";
    fs::create_directories(snap_dir);

    std::vector<ModelSnapshot> snaps; // the T observed snapshots
    std::vector<PlannedAttack> planned;
    AttackSets diagnostic_sets;

    if (cfg.scenario == Scenario::Standalone) {
        const TrainResult tr =
            stage("target-training", [&] { return train_target(ds, plan, cfg.target, cfg.seed); });
        save_snapshot(tr.best, (snap_dir / "target_best.snap").string());
        summary["target"] = {
            {"train_accuracy", tr.train_accuracy.empty() ? 0.0 : tr.train_accuracy.back()},
            {"test_accuracy", tr.test_accuracy.empty() ? 0.0 : tr.test_accuracy.back()},
            {"best_epoch", tr.best_epoch},
            {"best_test_accuracy",
             tr.best_epoch > 0 ? tr.test_accuracy[tr.best_epoch - 1] : 0.0},
            {"generalization_gap",
             (tr.train_accuracy.empty() ? 0.0
                                        : tr.train_accuracy.back() - tr.test_accuracy.back())},
        };

        snaps = {tr.best};
        AttackSets sets{plan.attack_train_members, plan.attack_train_nonmembers,
                        plan.attack_test_members, plan.attack_test_nonmembers};
        balance_tests(sets);
        planned.push_back({cfg.attack.knowledge == Knowledge::Supervised ? "supervised"
                                                                         : "unsupervised",
                           sets});
        diagnostic_sets = sets;
    } else if (cfg.scenario == Scenario::Finetune) {
        const TrainResult tr =
            stage("target-training", [&] { return train_target(ds, plan, cfg.target, cfg.seed); });
        const ModelSnapshot tuned = stage("fine-tuning", [&] {
            return finetune_target(tr.best, ds, plan.target_train, plan.finetune_set, cfg.target,
                                   Rng::derive(cfg.seed, {0xf17eu}).next_u64());
        });
        save_snapshot(tr.best, (snap_dir / "target_base.snap").string());
        save_snapshot(tuned, (snap_dir / "target_finetuned.snap").string());
        summary["target"] = {
            {"train_accuracy", tr.train_accuracy.empty() ? 0.0 : tr.train_accuracy.back()},
            {"test_accuracy", tr.test_accuracy.empty() ? 0.0 : tr.test_accuracy.back()},
            {"best_epoch", tr.best_epoch},
            {"finetune_epoch", tuned.epoch},
        };
        snaps = {tr.best, tuned}; // stacked, T = 2

        const std::uint64_t set_seed = Rng::derive(cfg.seed, {0xd17u}).next_u64();
        auto [delta_train, delta_test] =
            split_pool(plan.finetune_set, cfg.split.attack_train_members,
                       cfg.split.attack_test_members, set_seed);

        AttackSets d_vs_out{plan.attack_train_members, plan.attack_train_nonmembers,
                            plan.attack_test_members, plan.attack_test_nonmembers};
        balance_tests(d_vs_out);
        AttackSets delta_vs_out{delta_train, plan.attack_train_nonmembers, delta_test,
                                plan.attack_test_nonmembers};
        balance_tests(delta_vs_out);
        // members of D against the fine-tune set standing in as non-members
        AttackSets d_vs_delta{plan.attack_train_members, delta_train, plan.attack_test_members,
                              delta_test};
        balance_tests(d_vs_delta);

        planned.push_back({"d_vs_nonmembers", d_vs_out});
        planned.push_back({"ddelta_vs_nonmembers", delta_vs_out});
        planned.push_back({"d_vs_ddelta", d_vs_delta});
        diagnostic_sets = d_vs_out;
    } else {
        FedConfig fed;
        fed.num_participants = cfg.fed.participants;
        fed.rounds = cfg.fed.rounds;
        fed.local_epochs_per_round = cfg.fed.local_epochs;
        fed.participant_splits = build_participant_splits(
            plan.target_train, cfg.fed, Rng::derive(cfg.seed, {0xfe5u}).next_u64());
        fed.observed_rounds = cfg.fed.observed_rounds;
        fed.attacker_role = cfg.attack.placement_set ? cfg.attack.placement
                                                     : AttackerRole::Global;
        fed.attacker_id = cfg.fed.attacker;
        fed.victim_id = cfg.fed.victim;
        fed.attack_mode = cfg.attack.mode;
        fed.gamma = cfg.attack.gamma;
        fed.isolation_includes_victim = cfg.fed.isolation_includes_victim;
        fed.ascent_on_aggregate = cfg.fed.ascent_on_aggregate;

        // Member pool: the victim's records (global role) or every other
        // participant's records (local role).
        std::vector<std::size_t> member_pool;
        if (fed.attacker_role == AttackerRole::Global) {
            member_pool = fed.participant_splits[fed.victim_id];
        } else {
            std::set<std::size_t> pool;
            for (std::size_t p = 0; p < fed.participant_splits.size(); ++p) {
                if (p == fed.attacker_id) continue;
                pool.insert(fed.participant_splits[p].begin(),
                            fed.participant_splits[p].end());
            }
            member_pool.assign(pool.begin(), pool.end());
        }

        const std::uint64_t set_seed = Rng::derive(cfg.seed, {0xd17u}).next_u64();
        auto [fed_train_members, fed_test_members] =
            split_pool(member_pool, cfg.split.attack_train_members,
                       cfg.split.attack_test_members, set_seed);
        AttackSets sets{fed_train_members, plan.attack_train_nonmembers, fed_test_members,
                        plan.attack_test_nonmembers};
        balance_tests(sets);

        if (fed.attack_mode == AttackMode::GradientAscent ||
            fed.attack_mode == AttackMode::IsolateGradientAscent) {
            // the attacker probes everything whose membership it will judge
            std::set<std::size_t> batch;
            batch.insert(sets.train_members.begin(), sets.train_members.end());
            batch.insert(sets.train_nonmembers.begin(), sets.train_nonmembers.end());
            batch.insert(sets.test_members.begin(), sets.test_members.end());
            batch.insert(sets.test_nonmembers.begin(), sets.test_nonmembers.end());
            fed.target_batch.assign(batch.begin(), batch.end());
        }

        const FedResult fr = stage("federated-simulation", [&] {
            return run_federated(ds, fed, cfg.target, plan.target_test,
                                 Rng::derive(cfg.seed, {0xfedeu}).next_u64());
        });
        fr.log.save((snap_dir / "observations").string(), fr.final_model.arch);
        save_snapshot(fr.final_model, (snap_dir / "aggregate_final.snap").string());
        summary["target"] = {
            {"final_round_train_accuracy", fr.round_train_accuracy.back()},
            {"final_round_test_accuracy", fr.round_test_accuracy.back()},
            {"rounds", fed.rounds},
        };

        snaps = fr.log.snapshots_for(fr.final_model.arch,
                                     fed.attacker_role == AttackerRole::Global ? fed.victim_id
                                                                               : 0);
        planned.push_back({cfg.attack.knowledge == Knowledge::Supervised ? "supervised"
                                                                         : "unsupervised",
                           sets});
        diagnostic_sets = sets;
    }

    const ModelSnapshot& diagnostic_snap = snaps.back();

    auto finish = [&](const char* phase) {
        if (phase != nullptr) summary["phase"] = phase;
        ExperimentOutcome outcome;
        outcome.summary = summary;
        write_json_file(summary, (fs::path(cfg.output_dir) / "summary.json").string());
        return outcome;
    };

    if (cfg.stop_after == StopAfter::Target) return finish("target");
    if (cfg.stop_after == StopAfter::Observation) return finish("observation");

    summary["grad_norms"] =
        grad_norm_diagnostic(ds, diagnostic_snap, diagnostic_sets, cfg.output_dir);

    if (cfg.dump_features || cfg.stop_after == StopAfter::Features) {
        std::vector<AttackFeatures> feats;
        std::vector<int> membership;
        for (std::size_t i : diagnostic_sets.test_members) {
            feats.push_back(extract_record(snaps, ds, i, cfg.features));
            membership.push_back(1);
        }
        for (std::size_t i : diagnostic_sets.test_nonmembers) {
            feats.push_back(extract_record(snaps, ds, i, cfg.features));
            membership.push_back(0);
        }
        dump_features_csv(feats, membership,
                          (fs::path(cfg.output_dir) / "features.csv").string());
    }
    if (cfg.stop_after == StopAfter::Features) return finish("features");

    json results;
    for (const PlannedAttack& p : planned) {
        const AttackRun run = run_one_attack(p.name, ds, snaps, p.sets, cfg.features,
                                             cfg.attack.knowledge, cfg.attack_training,
                                             Rng::derive(cfg.seed, {0xa7cu}).next_u64(),
                                             (snap_dir / ("attack_net_" + p.name)).string());
        results[run.name] = summarize_attack(run);
        write_scores_csv(run.scores, run.truth,
                         (fs::path(cfg.output_dir) / (run.name + "_scores.csv")).string());
        write_json_file(eval_to_json(run.eval, run.threshold),
                        (fs::path(cfg.output_dir) / (run.name + "_eval.json")).string());
    }
    summary["results"] = results;

    return finish(nullptr);
}

} // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    if (!cfg.sweep) return run_single(cfg);

    const SweepSpec& sweep = *cfg.sweep;
    const std::size_t count = sweep.axis == SweepSpec::Axis::ObservedRounds
                                  ? sweep.round_sets.size()
                                  : sweep.train_sizes.size();

    json summary;
    summary["name"] = cfg.name;
    summary["seed"] = cfg.seed;
    {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(config_hash(cfg)));
        summary["config_hash"] = std::string(buf);
    }
    json variants;

    for (std::size_t i = 0; i < count; ++i) {
        ExperimentConfig sub = cfg;
        sub.sweep.reset();
        std::string vname =
            i < sweep.names.size() ? sweep.names[i] : "variant" + std::to_string(i);
        if (sweep.axis == SweepSpec::Axis::ObservedRounds) {
            sub.fed.observed_rounds = sweep.round_sets[i];
        } else {
            sub.split.attack_train_members = sweep.train_sizes[i];
            sub.split.attack_train_nonmembers = sweep.train_sizes[i];
        }
        sub.name = cfg.name + "/" + vname;
        sub.output_dir = (fs::path(cfg.output_dir) / vname).string();
        const ExperimentOutcome out = run_single(sub);
        variants[vname] = out.summary;
    }
    summary["variants"] = variants;

    ExperimentOutcome outcome;
    outcome.summary = summary;
    fs::create_directories(cfg.output_dir);
    write_json_file(summary, (fs::path(cfg.output_dir) / "summary.json").string());
    return outcome;
}

// ---------------------------------------------------------------------------
// presets

namespace {

ExperimentConfig standalone_base() {
    ExperimentConfig cfg;
    cfg.name = "standalone-supervised";
    cfg.seed = 20240601;
    cfg.scenario = Scenario::Standalone;
    cfg.dataset.kind = DatasetSpec::Kind::Synthetic;
    cfg.dataset.n = 4000;
    cfg.dataset.dim = 200;
    cfg.dataset.classes = 20;
    cfg.dataset.cluster_spread = 0.37;
    cfg.split.target_train = 2000;
    cfg.split.target_test = 2000;
    cfg.split.attack_train_members = 1000;
    cfg.split.attack_train_nonmembers = 1000;
    cfg.split.attack_test_members = 1000;
    cfg.split.attack_test_nonmembers = 1000;
    cfg.target.layer_sizes = {200, 256, 64, 20};
    cfg.target.optimizer = OptKind::Adam;
    cfg.target.learning_rate = 0.001;
    cfg.target.epochs = 100;
    cfg.target.batch_size = 64;
    cfg.features.grad_layers = FeatureSelection::LayerSet::Last;
    cfg.features.output_layers = FeatureSelection::LayerSet::None;
    cfg.attack_training.learning_rate = 1e-4;
    cfg.attack_training.batch_size = 64;
    cfg.attack_training.epochs = 100;
    cfg.attack_training.conv_kernels = 32;
    cfg.output_dir = "out/standalone-supervised";
    return cfg;
}

ExperimentConfig fed_base() {
    ExperimentConfig cfg;
    cfg.name = "fed-passive-global";
    cfg.seed = 20240602;
    cfg.scenario = Scenario::Federated;
    cfg.dataset.kind = DatasetSpec::Kind::Synthetic;
    cfg.dataset.n = 2000;
    cfg.dataset.dim = 100;
    cfg.dataset.classes = 10;
    cfg.dataset.cluster_spread = 0.40;
    cfg.split.target_train = 1200;
    cfg.split.target_test = 400;
    cfg.split.attack_train_members = 150;
    cfg.split.attack_train_nonmembers = 150;
    cfg.split.attack_test_members = 150;
    cfg.split.attack_test_nonmembers = 150;
    cfg.target.layer_sizes = {100, 128, 32, 10};
    cfg.target.optimizer = OptKind::Adam;
    cfg.target.learning_rate = 0.002;
    cfg.target.epochs = 60;
    cfg.target.batch_size = 32;
    cfg.fed.participants = 4;
    cfg.fed.rounds = 60;
    cfg.fed.local_epochs = 2;
    cfg.fed.observed_rounds = {52, 54, 56, 58, 60};
    cfg.fed.victim = 0;
    cfg.fed.attacker = 1;
    cfg.attack.placement = AttackerRole::Global;
    cfg.attack.placement_set = true;
    cfg.features.grad_layers = FeatureSelection::LayerSet::Last;
    cfg.features.output_layers = FeatureSelection::LayerSet::None;
    cfg.attack_training.learning_rate = 1e-4;
    cfg.attack_training.batch_size = 64;
    cfg.attack_training.epochs = 100;
    cfg.attack_training.conv_kernels = 16;
    cfg.output_dir = "out/fed-passive-global";
    return cfg;
}

} // namespace

std::vector<ExperimentConfig> scenario_presets() {
    std::vector<ExperimentConfig> presets;

    presets.push_back(standalone_base());

    {
        ExperimentConfig cfg = standalone_base();
        cfg.name = "standalone-unsupervised";
        cfg.attack.knowledge = Knowledge::Unsupervised;
        cfg.output_dir = "out/standalone-unsupervised";
        presets.push_back(cfg);
    }
    {
        ExperimentConfig cfg = standalone_base();
        cfg.name = "finetune-three-way";
        cfg.scenario = Scenario::Finetune;
        // 60/40 split of a 2000-record training pool
        cfg.split.target_train = 1200;
        cfg.split.finetune = 800;
        cfg.split.target_test = 1500;
        cfg.split.attack_train_members = 400;
        cfg.split.attack_train_nonmembers = 400;
        cfg.split.attack_test_members = 400;
        cfg.split.attack_test_nonmembers = 400;
        cfg.target.epochs = 40;
        cfg.output_dir = "out/finetune-three-way";
        presets.push_back(cfg);
    }

    presets.push_back(fed_base());

    {
        ExperimentConfig cfg = fed_base();
        cfg.name = "fed-passive-local";
        cfg.attack.placement = AttackerRole::Local;
        cfg.split.attack_train_members = 300;
        cfg.split.attack_test_members = 300;
        cfg.split.attack_train_nonmembers = 300;
        cfg.split.attack_test_nonmembers = 300;
        cfg.output_dir = "out/fed-passive-local";
        presets.push_back(cfg);
    }
    {
        ExperimentConfig cfg = fed_base();
        cfg.name = "fed-active-ascent";
        cfg.attack.mode = AttackMode::GradientAscent;
        cfg.attack.gamma = 1e-4;
        cfg.output_dir = "out/fed-active-ascent";
        presets.push_back(cfg);
    }
    {
        ExperimentConfig cfg = fed_base();
        cfg.name = "fed-active-isolate";
        cfg.attack.mode = AttackMode::Isolate;
        cfg.output_dir = "out/fed-active-isolate";
        presets.push_back(cfg);
    }
    {
        ExperimentConfig cfg = fed_base();
        cfg.name = "fed-active-isolate-ascent";
        cfg.attack.mode = AttackMode::IsolateGradientAscent;
        cfg.attack.gamma = 1e-4;
        cfg.output_dir = "out/fed-active-isolate-ascent";
        presets.push_back(cfg);
    }
    {
        ExperimentConfig cfg = fed_base();
        cfg.name = "epoch-sweep";
        SweepSpec sweep;
        sweep.axis = SweepSpec::Axis::ObservedRounds;
        sweep.names = {"early", "mid", "late"};
        sweep.round_sets = {{4, 8, 12, 16, 20}, {24, 28, 32, 36, 40}, {44, 48, 52, 56, 60}};
        cfg.sweep = sweep;
        cfg.output_dir = "out/epoch-sweep";
        presets.push_back(cfg);
    }
    {
        ExperimentConfig cfg = standalone_base();
        cfg.name = "trainsize-sweep";
        SweepSpec sweep;
        sweep.axis = SweepSpec::Axis::AttackTrainSize;
        sweep.names = {"small", "medium", "large"};
        sweep.train_sizes = {250, 500, 1000};
        cfg.sweep = sweep;
        cfg.output_dir = "out/trainsize-sweep";
        presets.push_back(cfg);
    }
    return presets;
}

ExperimentConfig preset_by_name(const std::string& name) {
    for (const ExperimentConfig& cfg : scenario_presets()) {
        if (cfg.name == name) return cfg;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

} // namespace mia
