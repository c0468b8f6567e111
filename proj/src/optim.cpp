#include "mialab/optim.hpp"

#include <cmath>
#include <string>

namespace mia {

OptimizerState OptimizerState::sgd(double lr, double l2) {
    OptimizerState s;
    s.kind = OptKind::Sgd;
    s.learning_rate = lr;
    s.l2_weight = l2;
    return s;
}

OptimizerState OptimizerState::adam(double lr, double l2, double beta1, double beta2,
                                    double epsilon) {
    OptimizerState s;
    s.kind = OptKind::Adam;
    s.learning_rate = lr;
    s.l2_weight = l2;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    return s;
}

void optimizer_step(OptimizerState& state, std::vector<Tensor*>& params,
                    const std::vector<const Tensor*>& grads) {
    if (params.size() != grads.size()) {
        throw DimensionError("optimizer received " + std::to_string(grads.size()) +
                             " gradients for " + std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(*grads[i])) {
            throw DimensionError("gradient " + std::to_string(i) +
                                 " shape does not match its parameter");
        }
    }

    if (state.kind == OptKind::Adam && state.m.empty()) {
        state.m.reserve(params.size());
        state.v.reserve(params.size());
        for (const Tensor* p : params) {
            state.m.push_back(Tensor::zeros(p->shape));
            state.v.push_back(Tensor::zeros(p->shape));
        }
    }
    if (state.kind == OptKind::Adam && state.m.size() != params.size()) {
        throw DimensionError("Adam moments do not match parameter count");
    }

    ++state.step_count;
    const double lr = state.learning_rate;
    const double l2 = state.l2_weight;

    if (state.kind == OptKind::Sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            double* w = params[i]->data.data();
            const double* g = grads[i]->data.data();
            const std::size_t n = params[i]->size();
            for (std::size_t k = 0; k < n; ++k) {
                w[k] -= lr * (g[k] + l2 * w[k]);
            }
        }
        return;
    }

    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double eps = state.epsilon;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* w = params[i]->data.data();
        const double* g = grads[i]->data.data();
        double* m = state.m[i].data.data();
        double* v = state.v[i].data.data();
        const std::size_t n = params[i]->size();
        for (std::size_t k = 0; k < n; ++k) {
            const double gk = g[k] + l2 * w[k];
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            w[k] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

void optimizer_step(OptimizerState& state, Network& net, const BackwardTrace& grads) {
    std::vector<Tensor*> params;
    std::vector<const Tensor*> gptrs;
    params.reserve(net.params.size());
    gptrs.reserve(grads.param_grads.size());
    for (Tensor& p : net.params) params.push_back(&p);
    for (const Tensor& g : grads.param_grads) gptrs.push_back(&g);
    optimizer_step(state, params, gptrs);
}

} // namespace mia
