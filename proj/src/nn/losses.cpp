#include "mixagent/nn/losses.hpp"

namespace mixagent::nn {

std::pair<double, NetworkParams> loss_and_gradients(const NetworkParams& params, const SupervisedBatch& batch,
                                                    LossSpec spec) {
    Graph g;
    const auto nodes = ParamNodes::leaves(g, params);
    const auto out = decoder_forward_graph(g, params, nodes, g.leaf(batch.inputs));
    Graph::NodeId loss;
    switch (spec) {
        case LossSpec::MseToTarget: loss = g.sq_error_sum(out, batch.targets); break;
        case LossSpec::NextTokenCrossEntropy: loss = g.cross_entropy_mean(out, batch.target_ids); break;
        default: throw ShapeMismatch("unknown loss spec");
    }
    const double value = g.backward(loss);
    NetworkParams grads = params.zeros_like();
    nodes.accumulate_grads(g, grads);
    return {value, std::move(grads)};
}

}  // namespace mixagent::nn
