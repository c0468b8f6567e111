#include "mialab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mialab/rng.hpp"

namespace mia {

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
    if (in < 1 || out < 1) {
        throw ArgumentError("dense layer needs in_dim and out_dim >= 1");
    }
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.in_dim = in;
    s.out_dim = out;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::Relu;
    return s;
}

LayerSpec LayerSpec::dropout(double keep_prob) {
    if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
        throw ArgumentError("dropout keep_prob must be in (0, 1], got " +
                            std::to_string(keep_prob));
    }
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.keep_prob = keep_prob;
    return s;
}

LayerSpec LayerSpec::conv1d_rows(std::size_t rows, std::size_t cols, std::size_t kernels,
                                 std::size_t kernel_width, std::size_t stride) {
    if (rows < 1 || cols < 1 || kernels < 1 || kernel_width < 1 || stride < 1) {
        throw ArgumentError("conv1d-rows dimensions must be positive");
    }
    if (kernel_width > cols) {
        throw ArgumentError("conv1d-rows kernel_width exceeds input cols");
    }
    LayerSpec s;
    s.kind = LayerKind::Conv1dRows;
    s.rows = rows;
    s.cols = cols;
    s.kernels = kernels;
    s.kernel_width = kernel_width;
    s.stride = stride;
    return s;
}

std::size_t LayerSpec::input_size() const {
    switch (kind) {
        case LayerKind::Dense: return in_dim;
        case LayerKind::Conv1dRows: return rows * cols;
        default: return 0; // shape-preserving
    }
}

static std::size_t conv_out_cols(const LayerSpec& s) {
    return (s.cols - s.kernel_width) / s.stride + 1;
}

std::size_t LayerSpec::output_size() const {
    switch (kind) {
        case LayerKind::Dense: return out_dim;
        case LayerKind::Conv1dRows: return kernels * rows * conv_out_cols(*this);
        default: return 0; // shape-preserving
    }
}

std::size_t Network::input_size() const {
    for (const auto& l : layers) {
        if (l.has_params()) return l.input_size();
    }
    return 0;
}

std::size_t Network::output_size() const {
    std::size_t cur = input_size();
    for (const auto& l : layers) {
        if (l.has_params()) cur = l.output_size();
    }
    return cur;
}

std::vector<std::size_t> Network::param_layer_positions() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].has_params()) out.push_back(i);
    }
    return out;
}

Network make_network(std::vector<LayerSpec> layers, std::uint64_t seed) {
    if (layers.empty()) {
        throw ArgumentError("network needs at least one layer");
    }
    // Validate composition on flattened sizes.
    std::size_t cur = 0;
    bool have_size = false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (!l.has_params()) continue;
        if (have_size && cur != l.input_size()) {
            throw DimensionError("layer " + std::to_string(i) + " expects input size " +
                                 std::to_string(l.input_size()) + " but receives " +
                                 std::to_string(cur));
        }
        cur = l.output_size();
        have_size = true;
    }
    if (!have_size) {
        throw ArgumentError("network has no parameterized layer");
    }

    Network net;
    net.layers = std::move(layers);
    net.rng_seed = seed;

    std::size_t param_layer = 0;
    for (const auto& l : net.layers) {
        if (!l.has_params()) continue;
        Rng rng = Rng::derive(seed, {0x57u, param_layer});
        if (l.kind == LayerKind::Dense) {
            Tensor w = Tensor::zeros({l.in_dim, l.out_dim});
            for (double& v : w.data) v = 0.01 * rng.next_normal();
            net.params.push_back(std::move(w));
            net.params.push_back(Tensor::zeros({l.out_dim}));
        } else {
            Tensor k = Tensor::zeros({l.kernels, l.kernel_width});
            for (double& v : k.data) v = 0.01 * rng.next_normal();
            net.params.push_back(std::move(k));
            net.params.push_back(Tensor::zeros({l.kernels}));
        }
        ++param_layer;
    }
    return net;
}

std::size_t argmax_lowest(const Tensor& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v.data[i] > v.data[best]) best = i;
    }
    return best;
}

Tensor softmax(const Tensor& logits) {
    Tensor p = Tensor::zeros({logits.size()});
    double mx = logits.data[0];
    for (double v : logits.data) mx = std::max(mx, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p.data[i] = std::exp(logits.data[i] - mx);
        sum += p.data[i];
    }
    for (double& v : p.data) v /= sum;
    return p;
}

ForwardTrace forward(const Network& net, const Tensor& x, bool train_mode,
                     std::uint64_t dropout_seed) {
    if (x.size() != net.input_size()) {
        throw DimensionError("input size " + std::to_string(x.size()) +
                             " does not match network input " +
                             std::to_string(net.input_size()));
    }
    require_finite(x, "forward input");

    ForwardTrace trace;
    trace.train_mode = train_mode;
    trace.activations.reserve(net.layers.size());
    trace.dropout_masks.resize(net.layers.size());

    const Tensor* cur = &x;
    std::size_t param_idx = 0;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const LayerSpec& l = net.layers[li];
        Tensor out;
        switch (l.kind) {
            case LayerKind::Dense: {
                const Tensor& w = net.params[param_idx];
                const Tensor& b = net.params[param_idx + 1];
                param_idx += 2;
                out = Tensor::zeros({l.out_dim});
                for (std::size_t j = 0; j < l.out_dim; ++j) out.data[j] = b.data[j];
                for (std::size_t i = 0; i < l.in_dim; ++i) {
                    const double xi = cur->data[i];
                    if (xi == 0.0) continue;
                    const double* wrow = &w.data[i * l.out_dim];
                    for (std::size_t j = 0; j < l.out_dim; ++j) {
                        out.data[j] += xi * wrow[j];
                    }
                }
                break;
            }
            case LayerKind::Relu: {
                out = *cur;
                for (double& v : out.data) v = v > 0.0 ? v : 0.0;
                break;
            }
            case LayerKind::Dropout: {
                out = *cur;
                if (train_mode) {
                    // Inverted dropout: kept units scaled by 1/keep_prob so
                    // evaluation needs no rescaling.
                    Rng rng = Rng::derive(dropout_seed, {0xd0u, li});
                    Tensor mask = Tensor::zeros({out.size()});
                    const double scale = 1.0 / l.keep_prob;
                    for (std::size_t i = 0; i < out.size(); ++i) {
                        mask.data[i] = rng.next_double() < l.keep_prob ? scale : 0.0;
                        out.data[i] *= mask.data[i];
                    }
                    trace.dropout_masks[li] = std::move(mask);
                }
                break;
            }
            case LayerKind::Conv1dRows: {
                const Tensor& k = net.params[param_idx];
                const Tensor& b = net.params[param_idx + 1];
                param_idx += 2;
                const std::size_t oc = conv_out_cols(l);
                out = Tensor::zeros({l.kernels, l.rows, oc});
                for (std::size_t kk = 0; kk < l.kernels; ++kk) {
                    const double* kw = &k.data[kk * l.kernel_width];
                    const double bias = b.data[kk];
                    for (std::size_t r = 0; r < l.rows; ++r) {
                        const double* in_row = &cur->data[r * l.cols];
                        double* out_row = &out.data[(kk * l.rows + r) * oc];
                        for (std::size_t c = 0; c < oc; ++c) {
                            double acc = bias;
                            const double* seg = in_row + c * l.stride;
                            for (std::size_t w = 0; w < l.kernel_width; ++w) {
                                acc += kw[w] * seg[w];
                            }
                            out_row[c] = acc;
                        }
                    }
                }
                break;
            }
        }
        require_finite(out, "forward");
        trace.activations.push_back(std::move(out));
        cur = &trace.activations.back();
    }

    trace.logits = trace.activations.back();
    trace.probs = softmax(trace.logits);
    return trace;
}

double loss_only(const Network& net, const Tensor& x, std::size_t y_index) {
    ForwardTrace t = forward(net, x);
    if (y_index >= t.probs.size()) {
        throw RangeError("label index out of range");
    }
    return -std::log(t.probs.data[y_index]);
}

std::pair<BackwardTrace, Tensor> backward(const Network& net, const Tensor& x,
                                          const ForwardTrace& trace, const Tensor& d_output) {
    if (trace.activations.size() != net.layers.size()) {
        throw DimensionError("trace does not match network");
    }
    if (d_output.size() != trace.activations.back().size()) {
        throw DimensionError("d_output size does not match network output");
    }

    BackwardTrace grads;
    grads.param_grads.reserve(net.params.size());
    for (const Tensor& p : net.params) grads.param_grads.push_back(Tensor::zeros(p.shape));

    // param index just past each layer's tensors, walked backwards
    std::vector<std::size_t> param_at(net.layers.size(), 0);
    {
        std::size_t pi = 0;
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            param_at[li] = pi;
            if (net.layers[li].has_params()) pi += 2;
        }
    }

    Tensor d = d_output;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const LayerSpec& l = net.layers[li];
        const Tensor& input = li == 0 ? x : trace.activations[li - 1];
        switch (l.kind) {
            case LayerKind::Dense: {
                const Tensor& w = net.params[param_at[li]];
                Tensor& dw = grads.param_grads[param_at[li]];
                Tensor& db = grads.param_grads[param_at[li] + 1];
                for (std::size_t j = 0; j < l.out_dim; ++j) db.data[j] += d.data[j];
                Tensor d_in = Tensor::zeros({l.in_dim});
                for (std::size_t i = 0; i < l.in_dim; ++i) {
                    const double xi = input.data[i];
                    const double* wrow = &w.data[i * l.out_dim];
                    double* dwrow = &dw.data[i * l.out_dim];
                    double acc = 0.0;
                    for (std::size_t j = 0; j < l.out_dim; ++j) {
                        dwrow[j] += xi * d.data[j];
                        acc += wrow[j] * d.data[j];
                    }
                    d_in.data[i] = acc;
                }
                d = std::move(d_in);
                break;
            }
            case LayerKind::Relu: {
                for (std::size_t i = 0; i < d.size(); ++i) {
                    if (input.data[i] <= 0.0) d.data[i] = 0.0;
                }
                break;
            }
            case LayerKind::Dropout: {
                if (trace.train_mode && trace.dropout_masks[li].size() > 0) {
                    const Tensor& mask = trace.dropout_masks[li];
                    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] *= mask.data[i];
                }
                break;
            }
            case LayerKind::Conv1dRows: {
                const Tensor& k = net.params[param_at[li]];
                Tensor& dk = grads.param_grads[param_at[li]];
                Tensor& db = grads.param_grads[param_at[li] + 1];
                const std::size_t oc = conv_out_cols(l);
                Tensor d_in = Tensor::zeros({l.rows * l.cols});
                for (std::size_t kk = 0; kk < l.kernels; ++kk) {
                    const double* kw = &k.data[kk * l.kernel_width];
                    double* dkw = &dk.data[kk * l.kernel_width];
                    for (std::size_t r = 0; r < l.rows; ++r) {
                        const double* in_row = &input.data[r * l.cols];
                        double* din_row = &d_in.data[r * l.cols];
                        const double* d_row = &d.data[(kk * l.rows + r) * oc];
                        for (std::size_t c = 0; c < oc; ++c) {
                            const double g = d_row[c];
                            if (g == 0.0) continue;
                            db.data[kk] += g;
                            const std::size_t base = c * l.stride;
                            for (std::size_t w = 0; w < l.kernel_width; ++w) {
                                dkw[w] += g * in_row[base + w];
                                din_row[base + w] += g * kw[w];
                            }
                        }
                    }
                }
                d = std::move(d_in);
                break;
            }
        }
    }

    for (const Tensor& g : grads.param_grads) require_finite(g, "backward");
    return {std::move(grads), std::move(d)};
}

std::pair<ForwardTrace, BackwardTrace> loss_and_backward(const Network& net, const Tensor& x,
                                                         std::size_t y_index, bool train_mode,
                                                         std::uint64_t dropout_seed) {
    ForwardTrace trace = forward(net, x, train_mode, dropout_seed);
    if (y_index >= trace.probs.size()) {
        throw RangeError("label index " + std::to_string(y_index) + " out of range for " +
                         std::to_string(trace.probs.size()) + " classes");
    }
    trace.loss = -std::log(trace.probs.data[y_index]);
    if (!std::isfinite(trace.loss)) {
        throw NumericError("non-finite cross-entropy loss");
    }

    // d(loss)/d(logits) for softmax cross-entropy: probs - onehot(y).
    Tensor d_logits = trace.probs;
    d_logits.data[y_index] -= 1.0;
    auto [grads, d_in] = backward(net, x, trace, d_logits);
    (void)d_in;
    return {std::move(trace), std::move(grads)};
}

double gradient_norm(const BackwardTrace& grads, const LayerSelector& selector) {
    const std::size_t n_layers = grads.param_grads.size() / 2;
    if (n_layers == 0) {
        throw ArgumentError("no gradients to take the norm of");
    }
    std::size_t first = 0;
    std::size_t last = n_layers; // exclusive
    switch (selector.kind) {
        case LayerSelector::Kind::All:
            break;
        case LayerSelector::Kind::Last:
            first = n_layers - 1;
            break;
        case LayerSelector::Kind::Index:
            if (selector.index >= n_layers) {
                throw RangeError("layer selector index " + std::to_string(selector.index) +
                                 " out of range for " + std::to_string(n_layers) + " layers");
            }
            first = selector.index;
            last = selector.index + 1;
            break;
    }
    double s = 0.0;
    for (std::size_t layer = first; layer < last; ++layer) {
        s += squared_norm(grads.param_grads[2 * layer]);
        s += squared_norm(grads.param_grads[2 * layer + 1]);
    }
    return std::sqrt(s);
}

} // namespace mia
