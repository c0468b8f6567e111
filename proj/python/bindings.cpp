// Python bindings for the core operations: dataset generation, splits,
// target/federated training, feature extraction, attack training,
// metrics and the end-to-end experiment runner.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mialab/experiment.hpp"

namespace py = pybind11;
using namespace mia;

namespace {

Tensor tensor_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
    std::vector<std::size_t> shape(arr.ndim());
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) {
        shape[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arr.shape(i));
    }
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> tensor_to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<double> arr(shape);
    std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
    return arr;
}

ExperimentConfig config_from_obj(const py::object& obj) {
    // accepts a dict or a JSON string
    std::string text;
    if (py::isinstance<py::str>(obj)) {
        text = obj.cast<std::string>();
    } else {
        text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
    }
    return ExperimentConfig::from_json(nlohmann::json::parse(text));
}

py::object json_to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "white-box membership inference laboratory (C++ core)";

    // later registrations translate first, so the subclass goes last
    py::register_exception<Error>(m, "MiaError");
    py::register_exception<ConfigError>(m, "ConfigError");

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("features",
                               [](const Dataset& ds) { return tensor_to_array(ds.features); })
        .def_property_readonly("labels", [](const Dataset& ds) { return ds.labels; })
        .def_readonly("num_classes", &Dataset::num_classes)
        .def_readonly("name", &Dataset::name)
        .def("__len__", &Dataset::size);

    py::class_<SplitPlan>(m, "SplitPlan")
        .def_readonly("target_train", &SplitPlan::target_train)
        .def_readonly("target_test", &SplitPlan::target_test)
        .def_readonly("attack_train_members", &SplitPlan::attack_train_members)
        .def_readonly("attack_train_nonmembers", &SplitPlan::attack_train_nonmembers)
        .def_readonly("attack_test_members", &SplitPlan::attack_test_members)
        .def_readonly("attack_test_nonmembers", &SplitPlan::attack_test_nonmembers)
        .def_readonly("finetune_set", &SplitPlan::finetune_set)
        .def("validate", &SplitPlan::validate);

    m.def(
        "synth_purchase_like",
        [](std::size_t n, std::size_t dim, std::size_t classes, double spread,
           std::uint64_t seed) { return synth_purchase_like(n, dim, classes, spread, seed); },
        py::arg("n"), py::arg("dim"), py::arg("classes"), py::arg("cluster_spread"),
        py::arg("seed"));

    m.def(
        "load_csv",
        [](const std::string& path, const std::string& label_column, std::size_t classes) {
            return load_csv(path, {label_column, classes});
        },
        py::arg("path"), py::arg("label_column"), py::arg("classes"));

    m.def("save_csv", &save_csv, py::arg("dataset"), py::arg("path"),
          py::arg("label_column") = "label");

    m.def(
        "make_split",
        [](const Dataset& ds, std::size_t target_train, std::size_t target_test,
           std::size_t attack_train_members, std::size_t attack_train_nonmembers,
           std::size_t attack_test_members, std::size_t attack_test_nonmembers,
           std::size_t finetune, std::uint64_t seed) {
            SplitSizes sizes;
            sizes.target_train = target_train;
            sizes.target_test = target_test;
            sizes.attack_train_members = attack_train_members;
            sizes.attack_train_nonmembers = attack_train_nonmembers;
            sizes.attack_test_members = attack_test_members;
            sizes.attack_test_nonmembers = attack_test_nonmembers;
            sizes.finetune = finetune;
            return make_split(ds, sizes, seed);
        },
        py::arg("dataset"), py::arg("target_train"), py::arg("target_test"),
        py::arg("attack_train_members"), py::arg("attack_train_nonmembers"),
        py::arg("attack_test_members"), py::arg("attack_test_nonmembers"),
        py::arg("finetune") = 0, py::arg("seed") = 0);

    m.def(
        "evaluate",
        [](const std::vector<double>& scores, const std::vector<int>& membership,
           double threshold) {
            const EvalResult r = evaluate(scores, membership, threshold);
            py::dict out;
            out["attack_accuracy"] = r.attack_accuracy;
            out["tpr"] = r.tpr;
            out["fpr"] = r.fpr;
            out["auc"] = r.auc;
            py::list roc;
            for (const auto& p : r.roc_points) {
                roc.append(py::make_tuple(p.threshold, p.fpr, p.tpr));
            }
            out["roc"] = roc;
            return out;
        },
        py::arg("scores"), py::arg("membership"), py::arg("threshold") = 0.5);

    m.def("cluster_membership", &cluster_membership, py::arg("scores"), py::arg("grad_norms"));

    m.def("normalized_entropy",
          [](py::array_t<double> probs) { return normalized_entropy(tensor_from_array(probs)); });

    m.def(
        "run_experiment",
        [](const py::object& config) {
            const ExperimentConfig cfg = config_from_obj(config);
            const ExperimentOutcome out = run_experiment(cfg);
            return json_to_py(out.summary);
        },
        py::arg("config"),
        "Run one experiment from a config dict or JSON string; returns the summary.");

    m.def("presets", []() {
        py::list out;
        for (const ExperimentConfig& cfg : scenario_presets()) {
            out.append(json_to_py(cfg.to_json()));
        }
        return out;
    });

    m.def("preset", [](const std::string& name) {
        return json_to_py(preset_by_name(name).to_json());
    });

    m.def(
        "train_target_quick",
        [](const Dataset& ds, const SplitPlan& plan, std::vector<std::size_t> layer_sizes,
           std::size_t epochs, double learning_rate, std::size_t batch_size,
           std::uint64_t seed) {
            TargetConfig cfg;
            cfg.layer_sizes = std::move(layer_sizes);
            cfg.epochs = epochs;
            cfg.learning_rate = learning_rate;
            cfg.batch_size = batch_size;
            const TrainResult r = train_target(ds, plan, cfg, seed);
            py::dict out;
            out["train_accuracy"] = r.train_accuracy;
            out["test_accuracy"] = r.test_accuracy;
            out["best_epoch"] = r.best_epoch;
            return out;
        },
        py::arg("dataset"), py::arg("split"), py::arg("layer_sizes"), py::arg("epochs") = 20,
        py::arg("learning_rate") = 1e-3, py::arg("batch_size") = 64, py::arg("seed") = 0,
        "Train a dense target and return its accuracy curves.");
}
