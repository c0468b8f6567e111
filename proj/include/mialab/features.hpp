#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mialab/data.hpp"
#include "mialab/snapshot.hpp"

namespace mia {

/// Which parts of the white-box observation feed the attack.
/// Layer indices count parameterized (dense) layers of the target;
/// Last/LastK/All resolve against that count. Output layers are the
/// hidden activations (the final layer's output is the separate
/// prediction-vector feature).
struct FeatureSelection {
    enum class LayerSet { None, Last, LastK, All, Explicit };

    LayerSet grad_layers = LayerSet::Last;
    std::size_t grad_last_k = 1;
    std::vector<std::size_t> grad_indices;

    LayerSet output_layers = LayerSet::None;
    std::size_t output_last_k = 1;
    std::vector<std::size_t> output_indices;

    bool include_loss = true;
    bool include_label = true;
    bool include_output = true;

    std::vector<std::size_t> resolve_grad_layers(std::size_t n_param_layers) const;
    std::vector<std::size_t> resolve_output_layers(std::size_t n_param_layers) const;
    void validate(std::size_t n_param_layers) const;
};

/// Per-example white-box observation bundle over T model snapshots.
/// Gradients of dense layers are kept as 2-D (fan_in x fan_out) weight
/// matrices, ready for the attack net's convolutional component. The
/// output/loss/label observations are always recorded (the diagnostics
/// and the unsupervised reconstruction targets need them); the use_*
/// flags say which of them the attack net may consume as features.
struct AttackFeatures {
    std::size_t T = 0;
    std::vector<std::vector<Tensor>> layer_grads;   // [t][selected layer]
    std::vector<std::vector<Tensor>> layer_outputs; // [t][selected layer]
    std::vector<Tensor> output;                     // [t], softmax prediction vector
    std::vector<double> loss;                       // [t]
    Tensor label_onehot;                            // shared across t
    std::vector<double> grad_norm_all;              // [t], norm over all parameter grads
    bool use_output = true;
    bool use_loss = true;
    bool use_label = true;
};

/// One forward and one backward pass per snapshot (dropout off), fields
/// populated per selection. Snapshots must share one architecture.
AttackFeatures extract(const std::vector<ModelSnapshot>& snapshots, const Tensor& x,
                       std::size_t y, const FeatureSelection& sel);

/// extract() for a dataset record.
AttackFeatures extract_record(const std::vector<ModelSnapshot>& snapshots, const Dataset& ds,
                              std::size_t record, const FeatureSelection& sel);

/// The five reconstruction targets of the unsupervised decoder, computed
/// from the final observed snapshot: loss, correctness indicator,
/// confidence on the true label, normalized prediction uncertainty and
/// gradient norm.
struct DerivedTargets {
    double loss = 0.0;
    double correct = 0.0;
    double confidence_true = 0.0;
    double entropy = 0.0;
    double grad_norm = 0.0;

    std::array<double, 5> as_array() const {
        return {loss, correct, confidence_true, entropy, grad_norm};
    }
};

DerivedTargets derived_targets(const AttackFeatures& feat, const Tensor& probs, std::size_t y);

/// H = -(1/log K) * sum p_i log p_i, with 0*log 0 = 0. In [0, 1]; 0 iff
/// one-hot, 1 iff uniform. For K = 1 the distribution is degenerate and
/// the uncertainty is 0.
double normalized_entropy(const Tensor& probs);

/// Flattened per-component views used by the attack net and the CSV dump.
std::vector<double> flatten_features(const AttackFeatures& feat);

/// One CSV row per (example, t) with the flattened selected features.
void dump_features_csv(const std::vector<AttackFeatures>& feats,
                       const std::vector<int>& membership, const std::string& path);

} // namespace mia
