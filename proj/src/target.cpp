#include "mialab/target.hpp"

#include <algorithm>
#include <string>

#include "mialab/rng.hpp"

namespace mia {

void TargetConfig::validate(const Dataset& ds) const {
    if (layer_sizes.size() < 2) {
        throw ArgumentError("target needs at least input and output layer sizes");
    }
    if (layer_sizes.front() != ds.dim()) {
        throw ArgumentError("target input size " + std::to_string(layer_sizes.front()) +
                            " does not match dataset dimension " + std::to_string(ds.dim()));
    }
    if (layer_sizes.back() != ds.num_classes) {
        throw ArgumentError("target output size must equal the class count " +
                            std::to_string(ds.num_classes));
    }
    if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
    if (!std::is_sorted(snapshot_epochs.begin(), snapshot_epochs.end())) {
        throw ArgumentError("snapshot_epochs must be sorted");
    }
    for (std::size_t e : snapshot_epochs) {
        if (e < 1 || e > epochs) {
            throw ArgumentError("snapshot epoch " + std::to_string(e) +
                                " outside [1, " + std::to_string(epochs) + "]");
        }
    }
}

OptimizerState TargetConfig::make_optimizer() const {
    return optimizer == OptKind::Adam ? OptimizerState::adam(learning_rate, l2_weight)
                                      : OptimizerState::sgd(learning_rate, l2_weight);
}

Network make_target_network(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed) {
    std::vector<LayerSpec> layers;
    for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
        layers.push_back(LayerSpec::dense(layer_sizes[i], layer_sizes[i + 1]));
        if (i + 2 < layer_sizes.size()) layers.push_back(LayerSpec::relu());
    }
    return make_network(std::move(layers), seed);
}

double accuracy(const Network& net, const Dataset& ds, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw ArgumentError("accuracy over an empty index set");
    std::size_t hits = 0;
    for (std::size_t i : idx) {
        const ForwardTrace t = forward(net, ds.row(i));
        if (argmax_lowest(t.probs) == ds.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(idx.size());
}

double mean_loss(const Network& net, const Dataset& ds, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw ArgumentError("mean loss over an empty index set");
    double s = 0.0;
    for (std::size_t i : idx) s += loss_only(net, ds.row(i), ds.labels[i]);
    return s / static_cast<double>(idx.size());
}

void train_one_epoch(Network& net, OptimizerState& opt, const Dataset& ds,
                     const std::vector<std::size_t>& idx, std::size_t batch_size,
                     std::uint64_t shuffle_seed) {
    Rng rng = Rng::derive(shuffle_seed, {0xbau});
    std::vector<std::size_t> order = shuffled_indices(idx.size(), rng);

    BackwardTrace batch_grads;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        batch_grads.param_grads.clear();
        for (const Tensor& p : net.params) batch_grads.param_grads.push_back(Tensor::zeros(p.shape));

        for (std::size_t k = start; k < end; ++k) {
            const std::size_t i = idx[order[k]];
            auto [trace, grads] = loss_and_backward(net, ds.row(i), ds.labels[i]);
            for (std::size_t g = 0; g < grads.param_grads.size(); ++g) {
                double* acc = batch_grads.param_grads[g].data.data();
                const double* src = grads.param_grads[g].data.data();
                const std::size_t n = grads.param_grads[g].size();
                for (std::size_t e = 0; e < n; ++e) acc[e] += src[e];
            }
        }
        const double inv = 1.0 / static_cast<double>(end - start);
        for (Tensor& g : batch_grads.param_grads) {
            for (double& v : g.data) v *= inv;
        }
        optimizer_step(opt, net, batch_grads);
    }
}

TrainResult train_target(const Dataset& ds, const SplitPlan& split, const TargetConfig& cfg,
                         std::uint64_t seed) {
    cfg.validate(ds);
    if (split.target_train.empty()) {
        throw ArgumentError("target training split is empty");
    }

    Network net = make_target_network(cfg.layer_sizes, Rng::derive(seed, {0x7au}).next_u64());
    OptimizerState opt = cfg.make_optimizer();

    TrainResult result;
    result.best = ModelSnapshot::of(net, 0);
    result.best_epoch = 0;
    double best_acc = -1.0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        train_one_epoch(net, opt, ds, split.target_train, cfg.batch_size,
                        Rng::derive(seed, {0xe0u, epoch}).next_u64());

        result.train_accuracy.push_back(accuracy(net, ds, split.target_train));
        result.train_loss.push_back(mean_loss(net, ds, split.target_train));
        const double test_acc = split.target_test.empty()
                                    ? 0.0
                                    : accuracy(net, ds, split.target_test);
        result.test_accuracy.push_back(test_acc);

        if (std::binary_search(cfg.snapshot_epochs.begin(), cfg.snapshot_epochs.end(), epoch)) {
            result.snapshots.push_back(ModelSnapshot::of(net, static_cast<std::int64_t>(epoch)));
        }
        if (test_acc > best_acc) {
            best_acc = test_acc;
            result.best = ModelSnapshot::of(net, static_cast<std::int64_t>(epoch));
            result.best_epoch = epoch;
        }
    }
    if (cfg.epochs == 0) {
        result.snapshots.push_back(result.best);
    }
    return result;
}

ModelSnapshot finetune_target(const ModelSnapshot& base, const Dataset& ds,
                              const std::vector<std::size_t>& base_train,
                              const std::vector<std::size_t>& delta_idx, const TargetConfig& cfg,
                              std::uint64_t seed) {
    std::vector<std::size_t> a = base_train;
    std::vector<std::size_t> b = delta_idx;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::size_t> inter;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
    if (!inter.empty()) {
        throw ArgumentError("fine-tune set overlaps the base training set (" +
                            std::to_string(inter.size()) + " shared records)");
    }

    Network net = base.to_network();
    OptimizerState opt = cfg.make_optimizer(); // moments start fresh
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        train_one_epoch(net, opt, ds, delta_idx, cfg.batch_size,
                        Rng::derive(seed, {0xf7u, epoch}).next_u64());
    }
    return ModelSnapshot::of(net, base.epoch + static_cast<std::int64_t>(cfg.epochs));
}

} // namespace mia
