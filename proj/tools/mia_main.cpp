// mia: train small classifiers (stand-alone, fine-tuned, federated) and run
// white-box membership inference attacks against them.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mialab/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::string output_root() {
    const char* env = std::getenv("MIA_OUT_ROOT");
    return env != nullptr ? env : "out";
}

mia::ExperimentConfig load_config(const std::string& path, std::uint64_t seed_override,
                                  bool seed_set, const std::string& out_override) {
    mia::ExperimentConfig cfg = mia::ExperimentConfig::from_file(path);
    if (seed_set) cfg.seed = seed_override;
    if (!out_override.empty()) cfg.output_dir = out_override;
    return cfg;
}

json read_scores_csv(const std::string& path, std::vector<double>& scores,
                     std::vector<int>& members) {
    std::ifstream in(path);
    if (!in) throw mia::IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw mia::FormatError("empty score file");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw mia::FormatError("bad score row: " + line);
        }
        scores.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
        members.push_back(std::stoi(line.substr(c2 + 1)));
    }
    return {};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"white-box membership inference laboratory"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t s) { seed = s; seed_set = true; },
           "master seed override");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset as CSV");
    std::size_t gen_n = 4000, gen_d = 200, gen_k = 20;
    double gen_spread = 0.4;
    std::uint64_t gen_seed = 1;
    std::string gen_out = "dataset.csv";
    gen->add_option("--n", gen_n, "records");
    gen->add_option("--dim", gen_d, "feature dimension");
    gen->add_option("--classes", gen_k, "class count");
    gen->add_option("--spread", gen_spread, "per-bit flip probability");
    gen->add_option("--data-seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output CSV path");

    // train-target
    auto* tt = app.add_subcommand("train-target", "train a stand-alone target model");
    std::string tt_config;
    std::string tt_out;
    tt->add_option("--config", tt_config, "experiment config JSON")->required();
    tt->add_option("--out", tt_out, "output directory override");

    // run-fed
    auto* rf = app.add_subcommand("run-fed", "run the federated simulation only");
    std::string rf_config;
    std::string rf_out;
    rf->add_option("--config", rf_config, "experiment config JSON")->required();
    rf->add_option("--out", rf_out, "output directory override");

    // extract
    auto* ex = app.add_subcommand("extract", "dump white-box features for the attack sets");
    std::string ex_config;
    std::string ex_out;
    ex->add_option("--config", ex_config, "experiment config JSON")->required();
    ex->add_option("--out", ex_out, "output directory override");

    // train-attack / run (full pipeline)
    auto* ta = app.add_subcommand("train-attack",
                                  "train and evaluate the attack (full pipeline)");
    std::string ta_config;
    std::string ta_out;
    ta->add_option("--config", ta_config, "experiment config JSON")->required();
    ta->add_option("--out", ta_out, "output directory override");

    auto* run = app.add_subcommand("run", "run one experiment end to end");
    std::string run_config;
    std::string run_out;
    std::string run_preset;
    run->add_option("--config", run_config, "experiment config JSON");
    run->add_option("--preset", run_preset, "preset name (see `mia presets`)");
    run->add_option("--out", run_out, "output directory override");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "metrics for an existing score CSV");
    std::string ev_scores;
    std::string ev_out = "eval.json";
    double ev_threshold = 0.5;
    ev->add_option("--scores", ev_scores, "CSV with example,score,member")->required();
    ev->add_option("--threshold", ev_threshold, "decision threshold");
    ev->add_option("--out", ev_out, "output JSON path");

    // presets
    auto* pr = app.add_subcommand("presets", "list or export preset configurations");
    std::string pr_emit;
    pr->add_option("--emit", pr_emit, "write the named preset's JSON to stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const mia::Dataset ds =
                mia::synth_purchase_like(gen_n, gen_d, gen_k, gen_spread, gen_seed);
            mia::save_csv(ds, gen_out);
            std::cout << "wrote " << gen_out << " (" << ds.size() << " records, dim "
                      << ds.dim() << ", " << ds.num_classes << " classes)\n";
            return kExitOk;
        }

        if (pr->parsed()) {
            if (!pr_emit.empty()) {
                std::cout << mia::preset_by_name(pr_emit).to_json().dump(2) << "\n";
            } else {
                for (const auto& cfg : mia::scenario_presets()) {
                    std::cout << cfg.name << "\n";
                }
            }
            return kExitOk;
        }

        if (ev->parsed()) {
            std::vector<double> scores;
            std::vector<int> members;
            read_scores_csv(ev_scores, scores, members);
            const mia::EvalResult r = mia::evaluate(scores, members, ev_threshold);
            json j;
            j["attack_accuracy"] = r.attack_accuracy;
            j["tpr"] = r.tpr;
            j["fpr"] = r.fpr;
            j["auc"] = r.auc;
            std::ofstream out(ev_out);
            if (!out) throw mia::IoError("cannot write " + ev_out);
            out << j.dump(2) << "\n";
            std::cout << "accuracy " << r.attack_accuracy << ", auc " << r.auc << " -> "
                      << ev_out << "\n";
            return kExitOk;
        }

        // Subcommands below share the experiment pipeline; the stage
        // subcommands reuse it with stage-appropriate flags.
        std::string config_path;
        std::string out_override;
        mia::StopAfter stop_after = mia::StopAfter::Full;
        if (tt->parsed()) {
            config_path = tt_config;
            out_override = tt_out;
            stop_after = mia::StopAfter::Target;
        } else if (rf->parsed()) {
            config_path = rf_config;
            out_override = rf_out;
            stop_after = mia::StopAfter::Observation;
        } else if (ex->parsed()) {
            config_path = ex_config;
            out_override = ex_out;
            stop_after = mia::StopAfter::Features;
        } else if (ta->parsed()) {
            config_path = ta_config;
            out_override = ta_out;
        } else if (run->parsed()) {
            if (run_config.empty() == run_preset.empty()) {
                std::cerr << "error: pass exactly one of --config or --preset\n";
                return kExitConfig;
            }
            config_path = run_config;
            out_override = run_out;
        }

        mia::ExperimentConfig cfg;
        if (run->parsed() && !run_preset.empty()) {
            cfg = mia::preset_by_name(run_preset);
            if (seed_set) cfg.seed = seed;
            cfg.output_dir = !out_override.empty()
                                 ? out_override
                                 : (fs::path(output_root()) / cfg.name).string();
        } else {
            cfg = load_config(config_path, seed, seed_set, out_override);
        }
        cfg.stop_after = stop_after;
        if (stop_after == mia::StopAfter::Features) cfg.dump_features = true;

        const mia::ExperimentOutcome outcome = mia::run_experiment(cfg);
        if (outcome.summary.contains("results")) {
            for (const auto& [name, r] : outcome.summary["results"].items()) {
                std::cout << name << ": accuracy " << r["attack_accuracy"] << "\n";
            }
        } else if (outcome.summary.contains("phase")) {
            std::cout << "completed phase: "
                      << outcome.summary["phase"].get<std::string>() << "\n";
        }
        std::cout << "artifacts in " << cfg.output_dir << "\n";
        return kExitOk;
    } catch (const mia::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
