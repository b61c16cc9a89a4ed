#pragma once

#include "mixagent/nn/params.hpp"

namespace mixagent::nn {

struct SgdConfig {
    double lr = 0.1;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

void sgd_step(NetworkParams& params, const NetworkParams& grads, const SgdConfig& cfg);

// First/second moment state, shaped like the parameters.
struct AdamState {
    NetworkParams m;
    NetworkParams v;
    long t = 0;

    static AdamState for_params(const NetworkParams& p) { return {p.zeros_like(), p.zeros_like(), 0}; }
};

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, const AdamConfig& cfg);

}  // namespace mixagent::nn
