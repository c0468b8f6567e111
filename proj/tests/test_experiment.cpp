#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mialab/experiment.hpp"

using namespace mia;
namespace fs = std::filesystem;

namespace {

// Desk-scale config that runs in a couple of seconds.
ExperimentConfig tiny_standalone(const std::string& out) {
    ExperimentConfig cfg;
    cfg.name = "tiny";
    cfg.seed = 7;
    cfg.output_dir = out;
    cfg.scenario = Scenario::Standalone;
    cfg.dataset.n = 400;
    cfg.dataset.dim = 30;
    cfg.dataset.classes = 5;
    cfg.dataset.cluster_spread = 0.42;
    cfg.split.target_train = 200;
    cfg.split.target_test = 200;
    cfg.split.attack_train_members = 80;
    cfg.split.attack_train_nonmembers = 80;
    cfg.split.attack_test_members = 80;
    cfg.split.attack_test_nonmembers = 80;
    cfg.target.layer_sizes = {30, 24, 5};
    cfg.target.epochs = 20;
    cfg.target.batch_size = 32;
    cfg.attack_training.epochs = 5;
    cfg.attack_training.conv_kernels = 4;
    cfg.attack_training.batch_size = 16;
    return cfg;
}

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("minimal standalone run writes the expected artifacts") {
    const fs::path out = temp_dir("mia_exp_minimal");
    const ExperimentConfig cfg = tiny_standalone(out.string());
    const ExperimentOutcome outcome = run_experiment(cfg);

    CHECK(outcome.summary.contains("results"));
    CHECK(outcome.summary["results"].contains("supervised"));
    CHECK(outcome.summary["results"]["supervised"].contains("attack_accuracy"));
    const double acc = outcome.summary["results"]["supervised"]["attack_accuracy"];
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);

    CHECK(fs::exists(out / "summary.json"));
    CHECK(fs::exists(out / "config.json"));
    CHECK(fs::exists(out / "supervised_scores.csv"));
    CHECK(fs::exists(out / "supervised_eval.json"));
    CHECK(fs::exists(out / "grad_norms.csv"));
    CHECK(fs::exists(out / "snapshots" / "target_best.snap"));
    fs::remove_all(out);
}

TEST_CASE("active mode outside the federated scenario is rejected") {
    ExperimentConfig cfg = tiny_standalone("unused");
    cfg.attack.mode = AttackMode::GradientAscent;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    ExperimentConfig cfg2 = tiny_standalone("unused");
    cfg2.attack.placement_set = true;
    CHECK_THROWS_AS(cfg2.validate(), ConfigError);
}

TEST_CASE("identical config and seed reproduce the summary byte for byte") {
    const fs::path out_a = temp_dir("mia_exp_det_a");
    const fs::path out_b = temp_dir("mia_exp_det_b");
    ExperimentConfig a = tiny_standalone(out_a.string());
    ExperimentConfig b = tiny_standalone(out_b.string());
    run_experiment(a);
    run_experiment(b);

    std::ifstream fa(out_a / "summary.json");
    std::ifstream fb(out_b / "summary.json");
    const std::string sa((std::istreambuf_iterator<char>(fa)),
                         std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(fb)),
                         std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(!sa.empty());
    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

TEST_CASE("config json round-trips") {
    ExperimentConfig cfg = tiny_standalone("out/tiny");
    const nlohmann::json j = cfg.to_json();
    const ExperimentConfig back = ExperimentConfig::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("config hash ignores the output directory") {
    ExperimentConfig a = tiny_standalone("out/here");
    ExperimentConfig b = tiny_standalone("out/there");
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 8;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("missing seed and unknown keys are config errors") {
    nlohmann::json j;
    j["scenario"] = "standalone";
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

    nlohmann::json j2 = tiny_standalone("x").to_json();
    j2["surprise"] = 1;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j2), ConfigError);

    nlohmann::json j3 = tiny_standalone("x").to_json();
    j3["attack"]["mode"] = "nonsense";
    CHECK_THROWS_AS(ExperimentConfig::from_json(j3), ConfigError);
}

TEST_CASE("presets cover the documented scenarios") {
    const std::vector<ExperimentConfig> presets = scenario_presets();
    CHECK(presets.size() >= 9);

    std::set<std::string> names;
    for (const auto& p : presets) names.insert(p.name);
    for (const char* expected :
         {"standalone-supervised", "standalone-unsupervised", "finetune-three-way",
          "fed-passive-global", "fed-passive-local", "fed-active-ascent", "fed-active-isolate",
          "epoch-sweep", "trainsize-sweep"}) {
        CHECK(names.count(expected) == 1);
    }

    for (const auto& p : presets) p.validate();

    const ExperimentConfig sweep = preset_by_name("epoch-sweep");
    REQUIRE(sweep.sweep.has_value());
    CHECK(sweep.sweep->round_sets.size() >= 3);
    for (const auto& rounds : sweep.sweep->round_sets) CHECK(rounds.size() == 5);

    CHECK_THROWS_AS(preset_by_name("no-such-preset"), ConfigError);
}

TEST_CASE("finetune scenario yields three results") {
    const fs::path out = temp_dir("mia_exp_finetune");
    ExperimentConfig cfg = tiny_standalone(out.string());
    cfg.scenario = Scenario::Finetune;
    cfg.split.target_train = 120;
    cfg.split.finetune = 80;
    cfg.split.target_test = 150;
    cfg.split.attack_train_members = 40;
    cfg.split.attack_train_nonmembers = 40;
    cfg.split.attack_test_members = 40;
    cfg.split.attack_test_nonmembers = 40;
    cfg.target.epochs = 10;

    const ExperimentOutcome outcome = run_experiment(cfg);
    CHECK(outcome.summary["results"].contains("d_vs_nonmembers"));
    CHECK(outcome.summary["results"].contains("ddelta_vs_nonmembers"));
    CHECK(outcome.summary["results"].contains("d_vs_ddelta"));
    fs::remove_all(out);
}

TEST_CASE("federated scenario runs end to end at a tiny scale") {
    const fs::path out = temp_dir("mia_exp_fed");
    ExperimentConfig cfg = tiny_standalone(out.string());
    cfg.scenario = Scenario::Federated;
    cfg.dataset.n = 500;
    cfg.split.target_train = 240;
    cfg.split.target_test = 120;
    cfg.split.attack_train_members = 30;
    cfg.split.attack_train_nonmembers = 30;
    cfg.split.attack_test_members = 30;
    cfg.split.attack_test_nonmembers = 30;
    cfg.target.layer_sizes = {30, 16, 5};
    cfg.fed.participants = 3;
    cfg.fed.rounds = 4;
    cfg.fed.observed_rounds = {3, 4};
    cfg.attack.placement_set = true;
    cfg.attack.placement = AttackerRole::Global;
    cfg.attack_training.epochs = 3;

    const ExperimentOutcome outcome = run_experiment(cfg);
    CHECK(outcome.summary["results"].contains("supervised"));
    CHECK(fs::exists(out / "snapshots" / "observations" / "manifest.json"));
    fs::remove_all(out);
}

TEST_CASE("stage phases stop the pipeline where the subcommand says") {
    const fs::path out = temp_dir("mia_exp_phase");
    ExperimentConfig cfg = tiny_standalone(out.string());
    cfg.stop_after = StopAfter::Target;

    const ExperimentOutcome target_only = run_experiment(cfg);
    CHECK(target_only.summary["phase"] == "target");
    CHECK_FALSE(target_only.summary.contains("results"));
    CHECK(fs::exists(out / "snapshots" / "target_best.snap"));
    CHECK_FALSE(fs::exists(out / "supervised_scores.csv"));

    cfg.stop_after = StopAfter::Features;
    cfg.dump_features = true;
    const ExperimentOutcome features_only = run_experiment(cfg);
    CHECK(features_only.summary["phase"] == "features");
    CHECK(fs::exists(out / "features.csv"));
    CHECK_FALSE(features_only.summary.contains("results"));

    // phase/scenario combinations that make no sense are rejected
    cfg.stop_after = StopAfter::Observation;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    fs::remove_all(out);
}

TEST_CASE("sweep produces one result per variant") {
    const fs::path out = temp_dir("mia_exp_sweep");
    ExperimentConfig cfg = tiny_standalone(out.string());
    SweepSpec sweep;
    sweep.axis = SweepSpec::Axis::AttackTrainSize;
    sweep.names = {"s", "m"};
    sweep.train_sizes = {40, 80};
    cfg.sweep = sweep;

    const ExperimentOutcome outcome = run_experiment(cfg);
    CHECK(outcome.summary["variants"].contains("s"));
    CHECK(outcome.summary["variants"].contains("m"));
    CHECK(fs::exists(out / "s" / "summary.json"));
    CHECK(fs::exists(out / "m" / "summary.json"));
    fs::remove_all(out);
}
