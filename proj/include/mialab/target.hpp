#pragma once

#include <cstdint>
#include <vector>

#include "mialab/data.hpp"
#include "mialab/optim.hpp"
#include "mialab/snapshot.hpp"

namespace mia {

/// Fully connected classifier under attack: dense layers with ReLU
/// between hidden layers, trained by mini-batch SGD/Adam.
struct TargetConfig {
    std::vector<std::size_t> layer_sizes; // [d, hidden..., K]
    OptKind optimizer = OptKind::Adam;
    double learning_rate = 0.001;
    double l2_weight = 0.0;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    std::vector<std::size_t> snapshot_epochs; // sorted, within [1, epochs]

    void validate(const Dataset& ds) const;
    OptimizerState make_optimizer() const;
};

/// Dense/ReLU stack for the given sizes (no activation after the final
/// layer; softmax lives in the loss).
Network make_target_network(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed);

struct TrainResult {
    std::vector<ModelSnapshot> snapshots; // at requested epochs
    ModelSnapshot best;                   // epoch with best test accuracy
    std::size_t best_epoch = 0;
    std::vector<double> train_accuracy; // one entry per epoch
    std::vector<double> test_accuracy;
    std::vector<double> train_loss;
};

/// Fraction of the indexed records the network classifies correctly
/// (argmax ties broken toward the lowest class index).
double accuracy(const Network& net, const Dataset& ds, const std::vector<std::size_t>& idx);

/// Mean cross-entropy over the indexed records.
double mean_loss(const Network& net, const Dataset& ds, const std::vector<std::size_t>& idx);

/// One pass of shuffled mini-batch training; gradients are averaged per
/// batch. Deterministic given shuffle_seed.
void train_one_epoch(Network& net, OptimizerState& opt, const Dataset& ds,
                     const std::vector<std::size_t>& idx, std::size_t batch_size,
                     std::uint64_t shuffle_seed);

/// Trains on split.target_train, evaluating on split.target_test each
/// epoch. Snapshots are captured at cfg.snapshot_epochs; `best` holds the
/// epoch with the highest test accuracy (the initialization when
/// epochs == 0).
TrainResult train_target(const Dataset& ds, const SplitPlan& split, const TargetConfig& cfg,
                         std::uint64_t seed);

/// Continues training from `base` on delta_idx alone. Optimizer moments
/// start fresh. base_train is the original training set, used only to
/// reject overlapping fine-tune data.
ModelSnapshot finetune_target(const ModelSnapshot& base, const Dataset& ds,
                              const std::vector<std::size_t>& base_train,
                              const std::vector<std::size_t>& delta_idx, const TargetConfig& cfg,
                              std::uint64_t seed);

} // namespace mia
