#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "mixagent/errors.hpp"

namespace mixagent::nn {

using Mat = Eigen::MatrixXd;

// Tape-based reverse-mode autodiff over dense double matrices. Nodes are
// created in topological order; backward() walks the tape in reverse.
// Scalars are 1x1 matrices.
class Graph {
  public:
    using NodeId = int;

    NodeId leaf(Mat value);
    const Mat& value(NodeId id) const { return nodes_[id].value; }
    const Mat& grad(NodeId id) const { return nodes_[id].grad; }

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId add_rowvec(NodeId a, NodeId bias);  // bias 1xC broadcast over rows
    NodeId scale(NodeId a, double s);
    NodeId add_const(NodeId a, double c);
    NodeId transpose(NodeId a);
    NodeId tanh_op(NodeId a);
    NodeId gelu(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId layernorm_rows(NodeId a, NodeId gain, NodeId bias);
    NodeId softmax_rows(NodeId a);
    NodeId causal_softmax(NodeId scores);  // TxT, entries with col > row masked
    NodeId gather_rows(NodeId table, std::vector<int> indices);
    NodeId row(NodeId a, int i);
    NodeId vstack(const std::vector<NodeId>& parts);
    NodeId sum_all(NodeId a);
    NodeId mean_all(NodeId a);
    NodeId logsumexp_all(NodeId a);
    NodeId sq_error_sum(NodeId pred, Mat target);            // sum (pred-target)^2
    NodeId cross_entropy_mean(NodeId logits, std::vector<int> targets);

    // Seeds d(loss)/d(loss)=1 and accumulates gradients down the tape.
    // Returns the scalar loss value.
    double backward(NodeId loss);

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Mat value;
        Mat grad;
        std::function<void(Graph&)> back;  // empty for leaves
    };

    NodeId push(Mat value, std::function<void(Graph&)> back);
    Mat& grad_mut(NodeId id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
};

}  // namespace mixagent::nn
