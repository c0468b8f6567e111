#include "mialab/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mia {

namespace {

std::vector<std::size_t> resolve(FeatureSelection::LayerSet set, std::size_t last_k,
                                 const std::vector<std::size_t>& explicit_idx,
                                 std::size_t n_layers) {
    using LayerSet = FeatureSelection::LayerSet;
    std::vector<std::size_t> out;
    switch (set) {
        case LayerSet::None:
            break;
        case LayerSet::Last:
            if (n_layers > 0) out.push_back(n_layers - 1);
            break;
        case LayerSet::LastK: {
            const std::size_t k = std::min(last_k, n_layers);
            for (std::size_t i = n_layers - k; i < n_layers; ++i) out.push_back(i);
            break;
        }
        case LayerSet::All:
            for (std::size_t i = 0; i < n_layers; ++i) out.push_back(i);
            break;
        case LayerSet::Explicit:
            out = explicit_idx;
            for (std::size_t i : out) {
                if (i >= n_layers) {
                    throw RangeError("selected layer " + std::to_string(i) +
                                     " out of range for " + std::to_string(n_layers) +
                                     " layers");
                }
            }
            break;
    }
    return out;
}

} // namespace

std::vector<std::size_t> FeatureSelection::resolve_grad_layers(std::size_t n_param_layers) const {
    return resolve(grad_layers, grad_last_k, grad_indices, n_param_layers);
}

std::vector<std::size_t> FeatureSelection::resolve_output_layers(
    std::size_t n_param_layers) const {
    // Hidden activations only: the final layer's output is the prediction
    // vector feature.
    const std::size_t n_hidden = n_param_layers > 0 ? n_param_layers - 1 : 0;
    return resolve(output_layers, output_last_k, output_indices, n_hidden);
}

void FeatureSelection::validate(std::size_t n_param_layers) const {
    const bool any = !resolve_grad_layers(n_param_layers).empty() ||
                     !resolve_output_layers(n_param_layers).empty() || include_loss ||
                     include_label || include_output;
    if (!any) throw ArgumentError("feature selection enables no feature");
}

AttackFeatures extract(const std::vector<ModelSnapshot>& snapshots, const Tensor& x,
                       std::size_t y, const FeatureSelection& sel) {
    if (snapshots.empty()) throw ArgumentError("need at least one snapshot");
    for (std::size_t t = 1; t < snapshots.size(); ++t) {
        if (!(snapshots[t].arch == snapshots[0].arch)) {
            throw ArgumentError("snapshots do not share one architecture");
        }
    }

    const Network net0 = snapshots[0].to_network();
    const std::vector<std::size_t> param_layers = net0.param_layer_positions();
    const std::size_t n_param_layers = param_layers.size();
    sel.validate(n_param_layers);

    const std::vector<std::size_t> grad_sel = sel.resolve_grad_layers(n_param_layers);
    const std::vector<std::size_t> out_sel = sel.resolve_output_layers(n_param_layers);

    AttackFeatures feat;
    feat.T = snapshots.size();
    feat.layer_grads.resize(feat.T);
    feat.layer_outputs.resize(feat.T);
    feat.output.resize(feat.T);
    feat.loss.resize(feat.T);
    feat.grad_norm_all.resize(feat.T);
    feat.use_output = sel.include_output;
    feat.use_loss = sel.include_loss;
    feat.use_label = sel.include_label;

    for (std::size_t t = 0; t < snapshots.size(); ++t) {
        Network net = snapshots[t].to_network();
        auto [trace, grads] = loss_and_backward(net, x, y); // dropout off
        if (t == 0) {
            feat.label_onehot = Tensor::zeros({trace.probs.size()});
            if (y >= trace.probs.size()) throw RangeError("label out of range");
            feat.label_onehot.data[y] = 1.0;
        }

        for (std::size_t g : grad_sel) {
            const std::size_t li = param_layers[g];
            const LayerSpec& spec = net.layers[li];
            if (spec.kind != LayerKind::Dense) {
                throw ArgumentError("gradient features are defined for dense layers");
            }
            // Weight-matrix gradient as (fan_in x fan_out); bias gradients
            // stay out of the conv input but count in the norms.
            Tensor gw = grads.param_grads[2 * g];
            gw.shape = {spec.in_dim, spec.out_dim};
            feat.layer_grads[t].push_back(std::move(gw));
        }
        for (std::size_t o : out_sel) {
            const std::size_t li = param_layers[o];
            // h_i is the activation-function output where one follows.
            const std::size_t pos =
                (li + 1 < net.layers.size() && net.layers[li + 1].kind == LayerKind::Relu)
                    ? li + 1
                    : li;
            feat.layer_outputs[t].push_back(trace.activations[pos]);
        }
        feat.output[t] = trace.probs;
        feat.loss[t] = trace.loss;
        feat.grad_norm_all[t] = gradient_norm(grads, LayerSelector::all());
    }
    return feat;
}

AttackFeatures extract_record(const std::vector<ModelSnapshot>& snapshots, const Dataset& ds,
                              std::size_t record, const FeatureSelection& sel) {
    if (record >= ds.size()) throw RangeError("record index out of range");
    return extract(snapshots, ds.row(record), ds.labels[record], sel);
}

double normalized_entropy(const Tensor& probs) {
    const std::size_t k = probs.size();
    if (k <= 1) return 0.0;
    double h = 0.0;
    for (double p : probs.data) {
        if (p > 0.0) h -= p * std::log(p);
    }
    const double value = h / std::log(static_cast<double>(k));
    return std::clamp(value, 0.0, 1.0);
}

DerivedTargets derived_targets(const AttackFeatures& feat, const Tensor& probs, std::size_t y) {
    if (y >= probs.size()) throw RangeError("label out of range");
    DerivedTargets d;
    d.loss = feat.loss.back();
    d.correct = argmax_lowest(probs) == y ? 1.0 : 0.0;
    d.confidence_true = probs.data[y];
    d.entropy = normalized_entropy(probs);
    d.grad_norm = feat.grad_norm_all.back();
    return d;
}

std::vector<double> flatten_features(const AttackFeatures& feat) {
    std::vector<double> out;
    for (std::size_t t = 0; t < feat.T; ++t) {
        for (const Tensor& g : feat.layer_grads[t]) {
            out.insert(out.end(), g.data.begin(), g.data.end());
        }
        for (const Tensor& h : feat.layer_outputs[t]) {
            out.insert(out.end(), h.data.begin(), h.data.end());
        }
        out.insert(out.end(), feat.output[t].data.begin(), feat.output[t].data.end());
        out.push_back(feat.loss[t]);
    }
    out.insert(out.end(), feat.label_onehot.data.begin(), feat.label_onehot.data.end());
    return out;
}

void dump_features_csv(const std::vector<AttackFeatures>& feats,
                       const std::vector<int>& membership, const std::string& path) {
    if (feats.size() != membership.size()) {
        throw ArgumentError("feature and membership counts differ");
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    out << "example,t,member,loss,grad_norm,values\n";
    for (std::size_t i = 0; i < feats.size(); ++i) {
        const AttackFeatures& f = feats[i];
        for (std::size_t t = 0; t < f.T; ++t) {
            out << i << "," << t << "," << membership[i] << "," << f.loss[t] << ","
                << f.grad_norm_all[t];
            for (const Tensor& g : f.layer_grads[t]) {
                for (double v : g.data) out << "," << v;
            }
            for (const Tensor& h : f.layer_outputs[t]) {
                for (double v : h.data) out << "," << v;
            }
            for (double v : f.output[t].data) out << "," << v;
            out << "\n";
        }
    }
    if (!out) throw IoError("write failed for " + path);
}

} // namespace mia
