#include "mialab/attack.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <utility>

#include <json.hpp>

#include "mialab/rng.hpp"
#include "mialab/snapshot.hpp"

namespace mia {

std::size_t AttackArch::component_count() const {
    return grad_components.size() + layer_output_dims.size() + (output_dim > 0 ? 1 : 0) +
           (loss_dim > 0 ? 1 : 0) + (label_dim > 0 ? 1 : 0);
}

std::size_t AttackArch::encoder_input() const {
    return component_count() * fcn_hidden2;
}

AttackArch make_attack_arch(const AttackFeatures& sample, std::size_t conv_kernels) {
    AttackArch arch;
    arch.T = sample.T;
    arch.conv_kernels = conv_kernels;
    for (const Tensor& g : sample.layer_grads[0]) {
        AttackArch::GradComponent c;
        c.rows = sample.T * g.shape[0];
        c.cols = g.shape[1];
        arch.grad_components.push_back(c);
    }
    for (const Tensor& h : sample.layer_outputs[0]) {
        arch.layer_output_dims.push_back(sample.T * h.size());
    }
    arch.output_dim = sample.use_output ? sample.output[0].size() * sample.T : 0;
    arch.loss_dim = sample.use_loss ? sample.T : 0;
    arch.label_dim = sample.use_label ? sample.label_onehot.size() : 0;
    if (arch.component_count() == 0) {
        throw ArgumentError("attack architecture would have no components");
    }
    return arch;
}

namespace {

Network make_fcn_component(std::size_t input, const AttackArch& arch, std::uint64_t seed) {
    std::vector<LayerSpec> layers{
        LayerSpec::dense(input, arch.fcn_hidden1),
        LayerSpec::relu(),
        LayerSpec::dropout(arch.keep_prob),
        LayerSpec::dense(arch.fcn_hidden1, arch.fcn_hidden2),
        LayerSpec::relu(),
        LayerSpec::dropout(arch.keep_prob),
    };
    return make_network(std::move(layers), seed);
}

Network make_grad_component(const AttackArch::GradComponent& c, const AttackArch& arch,
                            std::uint64_t seed) {
    // Kernel spans one full row of the stacked gradient matrix, so each
    // kernel responds to one unit's incoming-weight gradients at a time.
    const std::size_t conv_out = arch.conv_kernels * c.rows;
    std::vector<LayerSpec> layers{
        LayerSpec::conv1d_rows(c.rows, c.cols, arch.conv_kernels, c.cols, 1),
        LayerSpec::relu(),
        LayerSpec::dropout(arch.keep_prob),
        LayerSpec::dense(conv_out, arch.fcn_hidden1),
        LayerSpec::relu(),
        LayerSpec::dropout(arch.keep_prob),
        LayerSpec::dense(arch.fcn_hidden1, arch.fcn_hidden2),
        LayerSpec::relu(),
        LayerSpec::dropout(arch.keep_prob),
    };
    return make_network(std::move(layers), seed);
}

Network make_encoder(const AttackArch& arch, std::uint64_t seed) {
    std::vector<LayerSpec> layers;
    std::size_t cur = arch.encoder_input();
    for (std::size_t i = 0; i < arch.encoder_sizes.size(); ++i) {
        layers.push_back(LayerSpec::dense(cur, arch.encoder_sizes[i]));
        cur = arch.encoder_sizes[i];
        if (i + 1 < arch.encoder_sizes.size()) {
            layers.push_back(LayerSpec::relu());
            layers.push_back(LayerSpec::dropout(arch.keep_prob));
        }
    }
    return make_network(std::move(layers), seed);
}

Network make_decoder(const AttackArch& arch, std::uint64_t seed) {
    std::vector<LayerSpec> layers{
        LayerSpec::dense(1, arch.decoder_hidden),
        LayerSpec::relu(),
        LayerSpec::dropout(arch.keep_prob),
        LayerSpec::dense(arch.decoder_hidden, arch.decoder_out),
    };
    return make_network(std::move(layers), seed);
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

std::vector<Tensor*> AttackNet::all_params() {
    std::vector<Tensor*> out;
    for (Network& c : components) {
        for (Tensor& p : c.params) out.push_back(&p);
    }
    for (Tensor& p : encoder.params) out.push_back(&p);
    if (mode == Knowledge::Unsupervised) {
        for (Tensor& p : decoder.params) out.push_back(&p);
    }
    return out;
}

std::vector<const Tensor*> AttackNet::all_params() const {
    std::vector<const Tensor*> out;
    for (const Network& c : components) {
        for (const Tensor& p : c.params) out.push_back(&p);
    }
    for (const Tensor& p : encoder.params) out.push_back(&p);
    if (mode == Knowledge::Unsupervised) {
        for (const Tensor& p : decoder.params) out.push_back(&p);
    }
    return out;
}

AttackNet make_attack_net(const AttackArch& arch, Knowledge mode, std::uint64_t seed) {
    if (arch.encoder_sizes.empty() || arch.encoder_sizes.back() != 1) {
        throw ArgumentError("the encoder must end in a single output unit");
    }
    AttackNet net;
    net.arch = arch;
    net.mode = mode;
    net.seed = seed;

    std::uint64_t comp = 0;
    for (const auto& g : arch.grad_components) {
        net.components.push_back(
            make_grad_component(g, arch, Rng::derive(seed, {0xa1u, comp++}).next_u64()));
    }
    for (std::size_t dim : arch.layer_output_dims) {
        net.components.push_back(
            make_fcn_component(dim, arch, Rng::derive(seed, {0xa1u, comp++}).next_u64()));
    }
    if (arch.output_dim > 0) {
        net.components.push_back(make_fcn_component(
            arch.output_dim, arch, Rng::derive(seed, {0xa1u, comp++}).next_u64()));
    }
    if (arch.loss_dim > 0) {
        net.components.push_back(make_fcn_component(
            arch.loss_dim, arch, Rng::derive(seed, {0xa1u, comp++}).next_u64()));
    }
    if (arch.label_dim > 0) {
        net.components.push_back(make_fcn_component(
            arch.label_dim, arch, Rng::derive(seed, {0xa1u, comp++}).next_u64()));
    }
    net.encoder = make_encoder(arch, Rng::derive(seed, {0xa2u}).next_u64());
    if (mode == Knowledge::Unsupervised) {
        net.decoder = make_decoder(arch, Rng::derive(seed, {0xa3u}).next_u64());
    }
    return net;
}

namespace {

/// Component inputs in the fixed component order. Multi-epoch features
/// stack along t: gradient matrices by rows, vectors by concatenation.
std::vector<Tensor> build_component_inputs(const AttackArch& arch, const AttackFeatures& feat) {
    if (feat.T != arch.T) {
        throw DimensionError("feature bundle has T=" + std::to_string(feat.T) +
                             " but the attack net expects T=" + std::to_string(arch.T));
    }
    std::vector<Tensor> inputs;

    for (std::size_t g = 0; g < arch.grad_components.size(); ++g) {
        if (feat.layer_grads[0].size() <= g) {
            throw DimensionError("missing gradient feature " + std::to_string(g));
        }
        const auto& c = arch.grad_components[g];
        Tensor in = Tensor::zeros({c.rows, c.cols});
        std::size_t row = 0;
        for (std::size_t t = 0; t < feat.T; ++t) {
            const Tensor& src = feat.layer_grads[t][g];
            if (src.shape[1] != c.cols || row + src.shape[0] > c.rows) {
                throw DimensionError("gradient feature shape mismatch");
            }
            std::copy(src.data.begin(), src.data.end(), in.data.begin() + row * c.cols);
            row += src.shape[0];
        }
        inputs.push_back(std::move(in));
    }

    for (std::size_t o = 0; o < arch.layer_output_dims.size(); ++o) {
        Tensor in = Tensor::zeros({arch.layer_output_dims[o]});
        std::size_t at = 0;
        for (std::size_t t = 0; t < feat.T; ++t) {
            const Tensor& src = feat.layer_outputs[t][o];
            std::copy(src.data.begin(), src.data.end(), in.data.begin() + at);
            at += src.size();
        }
        if (at != in.size()) throw DimensionError("layer output feature size mismatch");
        inputs.push_back(std::move(in));
    }

    if (arch.output_dim > 0) {
        Tensor in = Tensor::zeros({arch.output_dim});
        std::size_t at = 0;
        for (std::size_t t = 0; t < feat.T; ++t) {
            const Tensor& src = feat.output[t];
            std::copy(src.data.begin(), src.data.end(), in.data.begin() + at);
            at += src.size();
        }
        if (at != in.size()) throw DimensionError("output feature size mismatch");
        inputs.push_back(std::move(in));
    }
    if (arch.loss_dim > 0) {
        Tensor in = Tensor::zeros({arch.loss_dim});
        for (std::size_t t = 0; t < feat.T; ++t) in.data[t] = feat.loss[t];
        inputs.push_back(std::move(in));
    }
    if (arch.label_dim > 0) {
        if (feat.label_onehot.size() != arch.label_dim) {
            throw DimensionError("label feature size mismatch");
        }
        inputs.push_back(feat.label_onehot);
    }
    return inputs;
}

} // namespace

AttackPass attack_forward(const AttackNet& net, const AttackFeatures& feat, bool train_mode,
                          std::uint64_t dropout_seed) {
    AttackPass pass;
    pass.component_inputs = build_component_inputs(net.arch, feat);
    if (pass.component_inputs.size() != net.components.size()) {
        throw DimensionError("component count mismatch");
    }

    pass.encoder_input = Tensor::zeros({net.arch.encoder_input()});
    std::size_t at = 0;
    for (std::size_t c = 0; c < net.components.size(); ++c) {
        ForwardTrace trace = forward(net.components[c], pass.component_inputs[c], train_mode,
                                     Rng::derive(dropout_seed, {0xc0u, c}).next_u64());
        const Tensor& out = trace.activations.back();
        std::copy(out.data.begin(), out.data.end(), pass.encoder_input.data.begin() + at);
        at += out.size();
        pass.component_traces.push_back(std::move(trace));
    }

    pass.encoder_trace = forward(net.encoder, pass.encoder_input, train_mode,
                                 Rng::derive(dropout_seed, {0xc1u}).next_u64());
    pass.embedding = pass.encoder_trace.activations.back().data[0];
    pass.probability = logistic(pass.embedding);

    if (net.mode == Knowledge::Unsupervised) {
        Tensor e = Tensor::vector({pass.embedding});
        pass.decoder_trace = forward(net.decoder, e, train_mode,
                                     Rng::derive(dropout_seed, {0xc2u}).next_u64());
        const Tensor& r = pass.decoder_trace.activations.back();
        for (std::size_t i = 0; i < 5 && i < r.size(); ++i) pass.reconstruction[i] = r.data[i];
        pass.has_reconstruction = true;
    }
    return pass;
}

double attack_score(const AttackNet& net, const AttackFeatures& feat) {
    const AttackPass pass = attack_forward(net, feat, false, 0);
    return net.mode == Knowledge::Supervised ? pass.probability : pass.embedding;
}

std::vector<Tensor> attack_backward(const AttackNet& net, const AttackPass& pass,
                                    double d_embedding,
                                    const std::array<double, 5>* d_reconstruction) {
    std::vector<Tensor> grads;

    std::vector<Tensor> decoder_grads;
    if (d_reconstruction != nullptr) {
        if (!pass.has_reconstruction) {
            throw ArgumentError("no decoder ran in this pass");
        }
        Tensor d_rec = Tensor::zeros({net.arch.decoder_out});
        for (std::size_t i = 0; i < 5; ++i) d_rec.data[i] = (*d_reconstruction)[i];
        Tensor e = Tensor::vector({pass.embedding});
        auto [dg, d_e] = backward(net.decoder, e, pass.decoder_trace, d_rec);
        decoder_grads = std::move(dg.param_grads);
        d_embedding += d_e.data[0];
    }

    Tensor d_enc_out = Tensor::vector({d_embedding});
    auto [enc_grads, d_concat] =
        backward(net.encoder, pass.encoder_input, pass.encoder_trace, d_enc_out);

    std::vector<std::vector<Tensor>> comp_grads(net.components.size());
    std::size_t at = 0;
    for (std::size_t c = 0; c < net.components.size(); ++c) {
        const std::size_t width = pass.component_traces[c].activations.back().size();
        Tensor d_comp = Tensor::zeros({width});
        std::copy(d_concat.data.begin() + at, d_concat.data.begin() + at + width,
                  d_comp.data.begin());
        at += width;
        auto [cg, d_in] = backward(net.components[c], pass.component_inputs[c],
                                   pass.component_traces[c], d_comp);
        (void)d_in; // features are constants; no backprop into the target
        comp_grads[c] = std::move(cg.param_grads);
    }

    for (auto& cg : comp_grads) {
        for (Tensor& t : cg) grads.push_back(std::move(t));
    }
    for (Tensor& t : enc_grads.param_grads) grads.push_back(std::move(t));
    if (net.mode == Knowledge::Unsupervised) {
        if (decoder_grads.empty()) {
            for (const Tensor& p : net.decoder.params) decoder_grads.push_back(Tensor::zeros(p.shape));
        }
        for (Tensor& t : decoder_grads) grads.push_back(std::move(t));
    }
    return grads;
}

void AttackTrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ArgumentError("learning rate must be positive");
    if (batch_size < 2) throw ArgumentError("batch size must be >= 2");
    if (balanced_batches && batch_size % 2 != 0) {
        throw ArgumentError("balanced batches need an even batch size");
    }
}

namespace {

struct GradAccumulator {
    std::vector<Tensor> sums;

    void init_like(const std::vector<const Tensor*>& params) {
        sums.clear();
        sums.reserve(params.size());
        for (const Tensor* p : params) sums.push_back(Tensor::zeros(p->shape));
    }
    void add(const std::vector<Tensor>& grads) {
        for (std::size_t i = 0; i < grads.size(); ++i) {
            double* dst = sums[i].data.data();
            const double* src = grads[i].data.data();
            for (std::size_t k = 0; k < grads[i].size(); ++k) dst[k] += src[k];
        }
    }
    void scale(double s) {
        for (Tensor& t : sums) {
            for (double& v : t.data) v *= s;
        }
    }
    std::vector<const Tensor*> ptrs() const {
        std::vector<const Tensor*> out;
        out.reserve(sums.size());
        for (const Tensor& t : sums) out.push_back(&t);
        return out;
    }
};

double supervised_accuracy(const AttackNet& net, const std::vector<AttackFeatures>& members,
                           const std::vector<AttackFeatures>& nonmembers) {
    std::size_t hits = 0;
    for (const auto& f : members) {
        if (attack_score(net, f) >= 0.5) ++hits;
    }
    for (const auto& f : nonmembers) {
        if (attack_score(net, f) < 0.5) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(members.size() + nonmembers.size());
}

std::vector<Tensor> copy_params(const AttackNet& net) {
    std::vector<Tensor> out;
    for (const Tensor* p : net.all_params()) out.push_back(*p);
    return out;
}

void restore_params(AttackNet& net, const std::vector<Tensor>& saved) {
    std::vector<Tensor*> ps = net.all_params();
    for (std::size_t i = 0; i < ps.size(); ++i) *ps[i] = saved[i];
}

} // namespace

SupervisedTrainResult train_supervised(const std::vector<AttackFeatures>& train_members,
                                       const std::vector<AttackFeatures>& train_nonmembers,
                                       const std::vector<AttackFeatures>& test_members,
                                       const std::vector<AttackFeatures>& test_nonmembers,
                                       const AttackTrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (train_members.empty() || train_nonmembers.empty()) {
        throw ArgumentError("supervised attack training needs both classes");
    }

    const AttackArch arch = make_attack_arch(train_members[0], cfg.conv_kernels);
    SupervisedTrainResult result;
    result.net = make_attack_net(arch, Knowledge::Supervised, Rng::derive(seed, {0xaau}).next_u64());
    AttackNet& net = result.net;

    OptimizerState opt = OptimizerState::adam(cfg.learning_rate);
    std::vector<Tensor*> params = net.all_params();
    std::vector<const Tensor*> cparams = std::as_const(net).all_params();

    const std::size_t half = cfg.balanced_batches ? cfg.batch_size / 2 : cfg.batch_size;
    const std::size_t per_class = std::min(train_members.size(), train_nonmembers.size());
    const std::size_t slice = std::min(half, per_class);

    std::vector<Tensor> best_params = copy_params(net);
    double best_acc = -1.0;
    GradAccumulator acc;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng = Rng::derive(seed, {0xab1u, epoch});
        std::vector<std::size_t> m_order = shuffled_indices(train_members.size(), shuffle_rng);
        std::vector<std::size_t> n_order = shuffled_indices(train_nonmembers.size(), shuffle_rng);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        const std::size_t n_batches = per_class / slice;
        for (std::size_t b = 0; b < n_batches; ++b) {
            acc.init_like(cparams);
            std::size_t batch_members = 0;
            double batch_loss = 0.0;

            for (std::size_t k = 0; k < slice; ++k) {
                const auto& f = train_members[m_order[b * slice + k]];
                AttackPass pass = attack_forward(
                    net, f, true, Rng::derive(seed, {0xab2u, epoch, b, k, 1u}).next_u64());
                const double h = pass.probability;
                batch_loss += (h - 1.0) * (h - 1.0);
                const double d_e = 2.0 * (h - 1.0) * h * (1.0 - h);
                acc.add(attack_backward(net, pass, d_e));
                ++batch_members;
            }
            for (std::size_t k = 0; k < slice; ++k) {
                const auto& f = train_nonmembers[n_order[b * slice + k]];
                AttackPass pass = attack_forward(
                    net, f, true, Rng::derive(seed, {0xab2u, epoch, b, k, 0u}).next_u64());
                const double h = pass.probability;
                batch_loss += h * h;
                const double d_e = 2.0 * h * h * (1.0 - h);
                acc.add(attack_backward(net, pass, d_e));
            }

            const std::size_t batch_total = 2 * slice;
            acc.scale(1.0 / static_cast<double>(batch_total));
            auto gptrs = acc.ptrs();
            optimizer_step(opt, params, gptrs);

            epoch_loss += batch_loss;
            seen += batch_total;
            if (epoch == 1) result.batch_member_counts.push_back(batch_members);
        }

        result.train_loss.push_back(seen > 0 ? epoch_loss / static_cast<double>(seen) : 0.0);
        result.train_accuracy.push_back(supervised_accuracy(net, train_members, train_nonmembers));
        const double test_acc = (test_members.empty() || test_nonmembers.empty())
                                    ? 0.0
                                    : supervised_accuracy(net, test_members, test_nonmembers);
        result.test_accuracy.push_back(test_acc);
        if (test_acc > best_acc) {
            best_acc = test_acc;
            best_params = copy_params(net);
            result.best_epoch = epoch;
        }
    }

    restore_params(net, best_params);
    return result;
}

UnsupervisedTrainResult train_unsupervised(const std::vector<AttackFeatures>& pool,
                                           const AttackTrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (pool.empty()) throw ArgumentError("unsupervised attack training needs a pool");

    const AttackArch arch = make_attack_arch(pool[0], cfg.conv_kernels);
    UnsupervisedTrainResult result;
    result.net =
        make_attack_net(arch, Knowledge::Unsupervised, Rng::derive(seed, {0xacu}).next_u64());
    AttackNet& net = result.net;

    // Reconstruction targets are fixed functions of the features.
    std::vector<std::array<double, 5>> targets;
    targets.reserve(pool.size());
    for (const auto& f : pool) {
        const std::size_t y = argmax_lowest(f.label_onehot);
        targets.push_back(derived_targets(f, f.output.back(), y).as_array());
    }

    OptimizerState opt = OptimizerState::adam(cfg.learning_rate);
    std::vector<Tensor*> params = net.all_params();
    std::vector<const Tensor*> cparams = std::as_const(net).all_params();
    GradAccumulator acc;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng = Rng::derive(seed, {0xad1u, epoch});
        std::vector<std::size_t> order = shuffled_indices(pool.size(), shuffle_rng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            acc.init_like(cparams);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                AttackPass pass = attack_forward(
                    net, pool[i], true, Rng::derive(seed, {0xad2u, epoch, k}).next_u64());
                std::array<double, 5> d_rec{};
                double loss = 0.0;
                for (std::size_t j = 0; j < 5; ++j) {
                    const double diff = pass.reconstruction[j] - targets[i][j];
                    loss += diff * diff / 5.0;
                    d_rec[j] = 2.0 * diff / 5.0;
                }
                epoch_loss += loss;
                acc.add(attack_backward(net, pass, 0.0, &d_rec));
            }
            acc.scale(1.0 / static_cast<double>(end - start));
            auto gptrs = acc.ptrs();
            optimizer_step(opt, params, gptrs);
        }
        result.train_loss.push_back(epoch_loss / static_cast<double>(pool.size()));
    }
    return result;
}

std::vector<int> cluster_membership(const std::vector<double>& scores,
                                    const std::vector<double>& grad_norms) {
    const std::size_t n = scores.size();
    if (n != grad_norms.size()) {
        throw ArgumentError("scores and gradient norms must align");
    }
    if (n < 2) throw ArgumentError("clustering needs at least two examples");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    if (scores[order.front()] == scores[order.back()]) {
        throw ArgumentError("all scores identical: no two-cluster structure");
    }

    // prefix sums over the sorted scores
    std::vector<double> pre(n + 1, 0.0), pre2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = scores[order[i]];
        pre[i + 1] = pre[i] + s;
        pre2[i + 1] = pre2[i] + s * s;
    }
    auto sse = [&](std::size_t lo, std::size_t hi) { // [lo, hi)
        const double cnt = static_cast<double>(hi - lo);
        const double sum = pre[hi] - pre[lo];
        return (pre2[hi] - pre2[lo]) - sum * sum / cnt;
    };

    std::size_t best_k = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < n; ++k) {
        if (scores[order[k - 1]] == scores[order[k]]) continue; // same partition
        const double total = sse(0, k) + sse(k, n);
        if (total < best) {
            best = total;
            best_k = k;
        }
    }

    double low_norm = 0.0, high_norm = 0.0;
    for (std::size_t i = 0; i < best_k; ++i) low_norm += grad_norms[order[i]];
    for (std::size_t i = best_k; i < n; ++i) high_norm += grad_norms[order[i]];
    low_norm /= static_cast<double>(best_k);
    high_norm /= static_cast<double>(n - best_k);

    // The cluster with the larger mean gradient norm is the non-members.
    const int low_label = low_norm <= high_norm ? 1 : 0;
    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        labels[order[i]] = i < best_k ? low_label : 1 - low_label;
    }
    return labels;
}

void save_attack_net(const AttackNet& net, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    nlohmann::json manifest;
    manifest["mode"] = net.mode == Knowledge::Supervised ? "supervised" : "unsupervised";
    manifest["seed"] = net.seed;
    nlohmann::json arch;
    arch["T"] = net.arch.T;
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& g : net.arch.grad_components) {
        comps.push_back({{"rows", g.rows}, {"cols", g.cols}});
    }
    arch["grad_components"] = comps;
    arch["layer_output_dims"] = net.arch.layer_output_dims;
    arch["output_dim"] = net.arch.output_dim;
    arch["loss_dim"] = net.arch.loss_dim;
    arch["label_dim"] = net.arch.label_dim;
    arch["fcn_hidden1"] = net.arch.fcn_hidden1;
    arch["fcn_hidden2"] = net.arch.fcn_hidden2;
    arch["conv_kernels"] = net.arch.conv_kernels;
    arch["encoder_sizes"] = net.arch.encoder_sizes;
    arch["decoder_hidden"] = net.arch.decoder_hidden;
    arch["decoder_out"] = net.arch.decoder_out;
    arch["keep_prob"] = net.arch.keep_prob;
    manifest["arch"] = arch;

    auto dump = [&](const Network& n, const std::string& name) {
        ModelSnapshot s;
        s.epoch = 0;
        s.arch = n.layers;
        s.params = n.params;
        save_snapshot(s, (fs::path(dir) / (name + ".snap")).string());
    };
    for (std::size_t c = 0; c < net.components.size(); ++c) {
        dump(net.components[c], "component_" + std::to_string(c));
    }
    manifest["components"] = net.components.size();
    dump(net.encoder, "encoder");
    if (net.mode == Knowledge::Unsupervised) dump(net.decoder, "decoder");

    std::ofstream out(fs::path(dir) / "attack_net.json");
    if (!out) throw IoError("cannot write attack net manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

AttackNet load_attack_net(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "attack_net.json");
    if (!in) throw IoError("cannot open attack net manifest in " + dir);
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad attack net manifest: ") + e.what());
    }

    AttackArch arch;
    const nlohmann::json& a = manifest.at("arch");
    arch.T = a.at("T").get<std::size_t>();
    for (const auto& g : a.at("grad_components")) {
        arch.grad_components.push_back(
            {g.at("rows").get<std::size_t>(), g.at("cols").get<std::size_t>()});
    }
    arch.layer_output_dims = a.at("layer_output_dims").get<std::vector<std::size_t>>();
    arch.output_dim = a.at("output_dim").get<std::size_t>();
    arch.loss_dim = a.at("loss_dim").get<std::size_t>();
    arch.label_dim = a.at("label_dim").get<std::size_t>();
    arch.fcn_hidden1 = a.at("fcn_hidden1").get<std::size_t>();
    arch.fcn_hidden2 = a.at("fcn_hidden2").get<std::size_t>();
    arch.conv_kernels = a.at("conv_kernels").get<std::size_t>();
    arch.encoder_sizes = a.at("encoder_sizes").get<std::vector<std::size_t>>();
    arch.decoder_hidden = a.at("decoder_hidden").get<std::size_t>();
    arch.decoder_out = a.at("decoder_out").get<std::size_t>();
    arch.keep_prob = a.at("keep_prob").get<double>();

    const Knowledge mode = manifest.at("mode").get<std::string>() == "supervised"
                               ? Knowledge::Supervised
                               : Knowledge::Unsupervised;
    AttackNet net = make_attack_net(arch, mode, manifest.at("seed").get<std::uint64_t>());

    auto restore = [&](Network& n, const std::string& name) {
        const ModelSnapshot s = load_snapshot((fs::path(dir) / (name + ".snap")).string());
        if (!(s.arch == n.layers)) {
            throw FormatError("attack net part '" + name + "' does not match the manifest");
        }
        n.params = s.params;
    };
    const std::size_t n_comps = manifest.at("components").get<std::size_t>();
    if (n_comps != net.components.size()) {
        throw FormatError("attack net manifest component count mismatch");
    }
    for (std::size_t c = 0; c < net.components.size(); ++c) {
        restore(net.components[c], "component_" + std::to_string(c));
    }
    restore(net.encoder, "encoder");
    if (mode == Knowledge::Unsupervised) restore(net.decoder, "decoder");
    return net;
}

} // namespace mia
