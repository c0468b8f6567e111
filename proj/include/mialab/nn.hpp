#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mialab/tensor.hpp"

namespace mia {

enum class LayerKind { Dense, Relu, Dropout, Conv1dRows };

/// One layer of a sequential network. Dense and Conv1dRows carry
/// parameters (a weight tensor followed by a bias tensor); Relu and
/// Dropout are parameter-free.
struct LayerSpec {
    LayerKind kind = LayerKind::Dense;

    // dense
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;

    // dropout
    double keep_prob = 1.0;

    // conv1d-rows: a 1 x kernel_width kernel slides with `stride` across
    // each row of a (rows x cols) input independently; `kernels` output
    // channels, no padding. Output shape: [kernels, rows, out_cols].
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t kernels = 0;
    std::size_t kernel_width = 0;
    std::size_t stride = 1;

    static LayerSpec dense(std::size_t in, std::size_t out);
    static LayerSpec relu();
    static LayerSpec dropout(double keep_prob);
    static LayerSpec conv1d_rows(std::size_t rows, std::size_t cols, std::size_t kernels,
                                 std::size_t kernel_width, std::size_t stride = 1);

    bool has_params() const { return kind == LayerKind::Dense || kind == LayerKind::Conv1dRows; }
    std::size_t input_size() const;
    std::size_t output_size() const;

    bool operator==(const LayerSpec&) const = default;
};

/// Sequential network: ordered layers plus a flat parameter list holding,
/// for each parameterized layer in order, its weight tensor then its bias
/// tensor. Weights are initialized N(0, 0.01), biases zero.
struct Network {
    std::vector<LayerSpec> layers;
    std::vector<Tensor> params;
    std::uint64_t rng_seed = 0;

    std::size_t input_size() const;
    std::size_t output_size() const;

    /// Index into `layers` of the i-th parameterized layer.
    std::vector<std::size_t> param_layer_positions() const;
};

/// Validates layer composition and initializes parameters from `seed`.
Network make_network(std::vector<LayerSpec> layers, std::uint64_t seed);

/// Everything the forward pass produced: per-layer outputs, final logits,
/// softmax probabilities and (when computed against a label) the loss.
/// Dropout masks are retained so the backward pass replays exactly.
struct ForwardTrace {
    std::vector<Tensor> activations; // one per layer
    Tensor logits;
    Tensor probs;
    double loss = 0.0;
    std::vector<Tensor> dropout_masks; // parallel to layers; empty when unused
    bool train_mode = false;
};

/// Gradients of the loss w.r.t. every parameter, aligned with
/// Network::params.
struct BackwardTrace {
    std::vector<Tensor> param_grads;
};

/// Runs the network on x. In train mode, dropout masks are drawn
/// deterministically from dropout_seed (keyed per layer).
ForwardTrace forward(const Network& net, const Tensor& x, bool train_mode = false,
                     std::uint64_t dropout_seed = 0);

/// Numerically stable softmax (max-subtraction).
Tensor softmax(const Tensor& logits);

/// Index of the largest entry; ties broken toward the lowest index.
std::size_t argmax_lowest(const Tensor& v);

/// Cross-entropy of the softmax output at y_index, via forward only.
double loss_only(const Network& net, const Tensor& x, std::size_t y_index);

/// Forward plus exact analytic gradients of the cross-entropy loss at
/// y_index with respect to every parameter.
std::pair<ForwardTrace, BackwardTrace> loss_and_backward(const Network& net, const Tensor& x,
                                                         std::size_t y_index,
                                                         bool train_mode = false,
                                                         std::uint64_t dropout_seed = 0);

/// Generic vector-Jacobian product: given d(loss)/d(output of the final
/// layer), returns parameter gradients and d(loss)/d(input). The trace
/// must come from a forward pass of the same net on the same x.
std::pair<BackwardTrace, Tensor> backward(const Network& net, const Tensor& x,
                                          const ForwardTrace& trace, const Tensor& d_output);

/// Selects which parameterized layers a gradient norm covers.
struct LayerSelector {
    enum class Kind { All, Last, Index };
    Kind kind = Kind::All;
    std::size_t index = 0;

    static LayerSelector all() { return {Kind::All, 0}; }
    static LayerSelector last() { return {Kind::Last, 0}; }
    static LayerSelector at(std::size_t i) { return {Kind::Index, i}; }
};

/// Euclidean norm over the selected layers' gradient tensors (weights and
/// biases). Parameter tensors come in (weight, bias) pairs per layer.
double gradient_norm(const BackwardTrace& grads, const LayerSelector& selector);

} // namespace mia
