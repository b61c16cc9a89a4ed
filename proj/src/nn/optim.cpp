#include "mixagent/nn/optim.hpp"

#include <cmath>

namespace mixagent::nn {

namespace {
void check_shapes(const NetworkParams& a, const NetworkParams& b, const char* what) {
    if (a.tensors().size() != b.tensors().size()) throw ShapeMismatch(what);
    for (std::size_t i = 0; i < a.tensors().size(); ++i) {
        const auto& [an, am] = a.tensors()[i];
        const auto& [bn, bm] = b.tensors()[i];
        if (an != bn || am.rows() != bm.rows() || am.cols() != bm.cols()) throw ShapeMismatch(what);
    }
}
}  // namespace

void sgd_step(NetworkParams& params, const NetworkParams& grads, const SgdConfig& cfg) {
    check_shapes(params, grads, "sgd_step shape mismatch");
    for (std::size_t i = 0; i < params.tensors().size(); ++i)
        params.tensors()[i].second -= cfg.lr * grads.tensors()[i].second;
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, const AdamConfig& cfg) {
    check_shapes(params, grads, "adam_step shape mismatch");
    check_shapes(params, state.m, "adam state shape mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.tensors().size(); ++i) {
        const Mat& g = grads.tensors()[i].second;
        Mat& m = state.m.tensors()[i].second;
        Mat& v = state.v.tensors()[i].second;
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = (cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square()).matrix();
        params.tensors()[i].second.array() -=
            cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
    }
}

}  // namespace mixagent::nn
