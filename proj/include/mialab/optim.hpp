#pragma once

#include <cstddef>
#include <vector>

#include "mialab/nn.hpp"

namespace mia {

enum class OptKind { Sgd, Adam };

/// SGD or Adam state. l2_weight applies weight decay inside the step:
/// effective gradient is g + l2_weight * w.
struct OptimizerState {
    OptKind kind = OptKind::Sgd;
    double learning_rate = 0.01;
    double l2_weight = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<Tensor> m; // first moments, lazily initialized
    std::vector<Tensor> v; // second moments
    std::size_t step_count = 0;

    static OptimizerState sgd(double lr, double l2 = 0.0);
    static OptimizerState adam(double lr, double l2 = 0.0, double beta1 = 0.9,
                               double beta2 = 0.999, double epsilon = 1e-8);
};

/// One update over an arbitrary parameter list (used by the attack net,
/// whose parameters span several sub-networks).
void optimizer_step(OptimizerState& state, std::vector<Tensor*>& params,
                    const std::vector<const Tensor*>& grads);

/// One update of a network's parameters from a backward trace.
void optimizer_step(OptimizerState& state, Network& net, const BackwardTrace& grads);

} // namespace mia
