#pragma once

#include "mixagent/nn/decoder.hpp"
#include "mixagent/nn/params.hpp"

namespace mixagent::nn {

enum class LossSpec { MseToTarget, NextTokenCrossEntropy };

// One supervised example set for a decoder network: per-position input
// features, and either a dense target matrix (MSE) or class ids (CE).
struct SupervisedBatch {
    Mat inputs;
    Mat targets;                  // MseToTarget
    std::vector<int> target_ids;  // NextTokenCrossEntropy
};

// Exact reverse-mode gradients of the scalar loss w.r.t. every parameter.
std::pair<double, NetworkParams> loss_and_gradients(const NetworkParams& params, const SupervisedBatch& batch,
                                                    LossSpec spec);

}  // namespace mixagent::nn
