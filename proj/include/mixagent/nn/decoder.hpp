#pragma once

#include <unordered_map>

#include "mixagent/nn/graph.hpp"
#include "mixagent/nn/params.hpp"

namespace mixagent::nn {

// Parameter tensors registered as graph leaves, by name, so a caller can
// read gradients back after backward().
struct ParamNodes {
    std::unordered_map<std::string, Graph::NodeId> ids;

    static ParamNodes leaves(Graph& g, const NetworkParams& p);
    void accumulate_grads(const Graph& g, NetworkParams& grads) const;
};

Mat sinusoidal_positions(int length, int d_model);

// Builds the causal pre-norm decoder on the tape. `x` is T x input_dim.
// Returns the head output node: T x output_dim for Linear/Softmax heads,
// T x 1 sigmoid values for SigmoidScalar.
Graph::NodeId decoder_forward_graph(Graph& g, const NetworkParams& params, const ParamNodes& nodes, Graph::NodeId x);

// Plain evaluation: one output vector per input position.
std::vector<std::vector<double>> decoder_forward(const NetworkParams& params,
                                                 const std::vector<std::vector<double>>& input_sequence);

}  // namespace mixagent::nn
