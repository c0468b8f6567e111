#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mialab/features.hpp"
#include "mialab/optim.hpp"

namespace mia {

/// Shapes of the inference model: one submodule per attack feature, a
/// fully connected encoder emitting a single membership score, and (for
/// the unsupervised mode) a decoder reconstructing the five derived
/// targets. Defaults follow the reference sizes: 128/64 feature FCNs,
/// 1000-kernel gradient conv, 256/128/64/1 encoder, 64-wide decoder,
/// dropout 0.2, ReLU throughout. Experiments shrink conv_kernels to fit
/// desk-scale budgets.
struct AttackArch {
    struct GradComponent {
        std::size_t rows = 0; // T * fan_in
        std::size_t cols = 0; // fan_out (also kernel width)
    };

    std::size_t T = 1;
    std::vector<GradComponent> grad_components;
    std::vector<std::size_t> layer_output_dims; // per component, already x T
    std::size_t output_dim = 0;                 // K * T, 0 if disabled
    std::size_t loss_dim = 0;                   // T, 0 if disabled
    std::size_t label_dim = 0;                  // K, 0 if disabled

    std::size_t fcn_hidden1 = 128;
    std::size_t fcn_hidden2 = 64;
    std::size_t conv_kernels = 1000;
    std::vector<std::size_t> encoder_sizes{256, 128, 64, 1};
    std::size_t decoder_hidden = 64;
    std::size_t decoder_out = 5;
    double keep_prob = 0.8;

    std::size_t component_count() const;
    std::size_t encoder_input() const;
};

/// Derives component shapes from a sample feature bundle.
AttackArch make_attack_arch(const AttackFeatures& sample, std::size_t conv_kernels = 1000);

enum class Knowledge { Supervised, Unsupervised };

/// The composite inference model. Components feed a shared encoder; the
/// encoder's single output is the attack score. Supervised mode squashes
/// it through a logistic map into a membership probability; unsupervised
/// mode trains a decoder to reconstruct the derived targets from it.
struct AttackNet {
    AttackArch arch;
    Knowledge mode = Knowledge::Supervised;
    std::vector<Network> components; // grads..., layer outputs..., output, loss, label
    Network encoder;
    Network decoder; // present in unsupervised mode
    std::uint64_t seed = 0;

    std::vector<Tensor*> all_params();
    std::vector<const Tensor*> all_params() const;
};

AttackNet make_attack_net(const AttackArch& arch, Knowledge mode, std::uint64_t seed);

/// Everything one forward pass produced, kept for the backward pass.
struct AttackPass {
    std::vector<Tensor> component_inputs;
    std::vector<ForwardTrace> component_traces;
    Tensor encoder_input;
    ForwardTrace encoder_trace;
    double embedding = 0.0;   // raw encoder output
    double probability = 0.0; // logistic(embedding)
    ForwardTrace decoder_trace;
    std::array<double, 5> reconstruction{};
    bool has_reconstruction = false;
};

AttackPass attack_forward(const AttackNet& net, const AttackFeatures& feat,
                          bool train_mode = false, std::uint64_t dropout_seed = 0);

/// Membership score at inference (dropout off): the squashed probability
/// in supervised mode, the raw embedding otherwise.
double attack_score(const AttackNet& net, const AttackFeatures& feat);

/// Gradients of a scalar loss w.r.t. every attack parameter, given
/// d(loss)/d(embedding) and, when the decoder ran, d(loss)/d(recon).
std::vector<Tensor> attack_backward(const AttackNet& net, const AttackPass& pass,
                                    double d_embedding,
                                    const std::array<double, 5>* d_reconstruction = nullptr);

/// Adam over the attack parameters, lr 1e-4, batch 64, 100 epochs,
/// balanced batches, best-test-accuracy model selection.
struct AttackTrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    bool balanced_batches = true;
    std::size_t conv_kernels = 1000;

    void validate() const;
};

struct SupervisedTrainResult {
    AttackNet net;
    std::vector<double> train_accuracy;
    std::vector<double> test_accuracy;
    std::vector<double> train_loss;
    std::size_t best_epoch = 0;
    /// per-epoch member counts per batch, recorded for the balance check
    std::vector<std::size_t> batch_member_counts;
};

/// Minimizes the mean squared membership loss
/// (score - 1)^2 on members, score^2 on non-members,
/// over balanced mini-batches; returns the model at the best test
/// accuracy epoch (threshold 0.5).
SupervisedTrainResult train_supervised(const std::vector<AttackFeatures>& train_members,
                                       const std::vector<AttackFeatures>& train_nonmembers,
                                       const std::vector<AttackFeatures>& test_members,
                                       const std::vector<AttackFeatures>& test_nonmembers,
                                       const AttackTrainConfig& cfg, std::uint64_t seed);

struct UnsupervisedTrainResult {
    AttackNet net;
    std::vector<double> train_loss;
};

/// Encoder-decoder training on an unlabeled pool: the decoder
/// reconstructs the five derived targets from the scalar embedding; after
/// training only the encoder matters.
UnsupervisedTrainResult train_unsupervised(const std::vector<AttackFeatures>& pool,
                                           const AttackTrainConfig& cfg, std::uint64_t seed);

/// Two-way 1-D clustering of scores by exhaustive threshold search
/// minimizing within-cluster variance (2-means on a line). The cluster
/// with the larger mean gradient norm is labeled non-member. Returns 1
/// for member, 0 for non-member, per example.
std::vector<int> cluster_membership(const std::vector<double>& scores,
                                    const std::vector<double>& grad_norms);

/// Persists a trained attack net as one snapshot file per sub-network
/// plus a JSON manifest describing the architecture.
void save_attack_net(const AttackNet& net, const std::string& dir);
AttackNet load_attack_net(const std::string& dir);

} // namespace mia
