#include "mixagent/nn/graph.hpp"

#include <cmath>

namespace mixagent::nn {

Graph::NodeId Graph::push(Mat value, std::function<void(Graph&)> back) {
    nodes_.push_back(Node{std::move(value), Mat(), std::move(back)});
    return static_cast<NodeId>(nodes_.size()) - 1;
}

Graph::NodeId Graph::leaf(Mat value) { return push(std::move(value), {}); }

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    if (A.cols() != B.rows()) throw ShapeMismatch("matmul shape mismatch");
    const NodeId id = push(A * B, {});
    nodes_[id].back = [a, b, id](Graph& g) {
        const Mat& dC = g.grad(id);
        g.grad_mut(a) += dC * g.value(b).transpose();
        g.grad_mut(b) += g.value(a).transpose() * dC;
    };
    return id;
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) throw ShapeMismatch("add shape mismatch");
    const NodeId id = push(value(a) + value(b), {});
    nodes_[id].back = [a, b, id](Graph& g) {
        g.grad_mut(a) += g.grad(id);
        g.grad_mut(b) += g.grad(id);
    };
    return id;
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) throw ShapeMismatch("sub shape mismatch");
    const NodeId id = push(value(a) - value(b), {});
    nodes_[id].back = [a, b, id](Graph& g) {
        g.grad_mut(a) += g.grad(id);
        g.grad_mut(b) -= g.grad(id);
    };
    return id;
}

Graph::NodeId Graph::add_rowvec(NodeId a, NodeId bias) {
    const Mat& A = value(a);
    const Mat& B = value(bias);
    if (B.rows() != 1 || B.cols() != A.cols()) throw ShapeMismatch("add_rowvec bias must be 1xC");
    const NodeId id = push(A.rowwise() + B.row(0), {});
    nodes_[id].back = [a, bias, id](Graph& g) {
        g.grad_mut(a) += g.grad(id);
        g.grad_mut(bias).row(0) += g.grad(id).colwise().sum();
    };
    return id;
}

Graph::NodeId Graph::scale(NodeId a, double s) {
    const NodeId id = push(value(a) * s, {});
    nodes_[id].back = [a, s, id](Graph& g) { g.grad_mut(a) += g.grad(id) * s; };
    return id;
}

Graph::NodeId Graph::add_const(NodeId a, double c) {
    const NodeId id = push((value(a).array() + c).matrix(), {});
    nodes_[id].back = [a, id](Graph& g) { g.grad_mut(a) += g.grad(id); };
    return id;
}

Graph::NodeId Graph::transpose(NodeId a) {
    const NodeId id = push(value(a).transpose(), {});
    nodes_[id].back = [a, id](Graph& g) { g.grad_mut(a) += g.grad(id).transpose(); };
    return id;
}

Graph::NodeId Graph::tanh_op(NodeId a) {
    const NodeId id = push(value(a).array().tanh().matrix(), {});
    nodes_[id].back = [a, id](Graph& g) {
        g.grad_mut(a).array() += g.grad(id).array() * (1.0 - g.value(id).array().square());
    };
    return id;
}

namespace {
inline double gauss_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }
inline double gauss_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
}  // namespace

Graph::NodeId Graph::gelu(NodeId a) {
    Mat Y = value(a).unaryExpr([](double x) { return x * gauss_cdf(x); });
    const NodeId id = push(std::move(Y), {});
    nodes_[id].back = [a, id](Graph& g) {
        const Mat dYdX = g.value(a).unaryExpr([](double x) { return gauss_cdf(x) + x * gauss_pdf(x); });
        g.grad_mut(a).array() += g.grad(id).array() * dYdX.array();
    };
    return id;
}

Graph::NodeId Graph::sigmoid(NodeId a) {
    Mat Y = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
    const NodeId id = push(std::move(Y), {});
    nodes_[id].back = [a, id](Graph& g) {
        const auto& Y = g.value(id).array();
        g.grad_mut(a).array() += g.grad(id).array() * Y * (1.0 - Y);
    };
    return id;
}

Graph::NodeId Graph::layernorm_rows(NodeId a, NodeId gain, NodeId bias) {
    constexpr double eps = 1e-5;
    const Mat& X = value(a);
    const Mat& G = value(gain);
    const Mat& B = value(bias);
    if (G.rows() != 1 || G.cols() != X.cols() || B.rows() != 1 || B.cols() != X.cols())
        throw ShapeMismatch("layernorm gain/bias must be 1xC");
    Mat Xhat(X.rows(), X.cols());
    Eigen::VectorXd inv_std(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        const double mu = X.row(r).mean();
        const double var = (X.row(r).array() - mu).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        Xhat.row(r) = (X.row(r).array() - mu) * inv_std(r);
    }
    const Eigen::RowVectorXd grow = G.row(0);
    const Eigen::RowVectorXd brow = B.row(0);
    Mat Y = ((Xhat.array().rowwise() * grow.array()).rowwise() + brow.array()).matrix();
    const NodeId id = push(std::move(Y), {});
    nodes_[id].back = [a, gain, bias, id, Xhat = std::move(Xhat), inv_std = std::move(inv_std)](Graph& g) {
        const Mat& dY = g.grad(id);
        g.grad_mut(bias).row(0) += dY.colwise().sum();
        g.grad_mut(gain).row(0) += (dY.array() * Xhat.array()).colwise().sum().matrix();
        const Eigen::RowVectorXd gv = g.value(gain).row(0);
        const Mat dXhat = (dY.array().rowwise() * gv.array()).matrix();
        Mat& dX = g.grad_mut(a);
        for (Eigen::Index r = 0; r < dY.rows(); ++r) {
            const double m1 = dXhat.row(r).mean();
            const double m2 = (dXhat.row(r).array() * Xhat.row(r).array()).mean();
            dX.row(r).array() += inv_std(r) * (dXhat.row(r).array() - m1 - Xhat.row(r).array() * m2);
        }
    };
    return id;
}

namespace {
// dx_row += y ∘ (dy − y·dy), shared by plain and causally masked softmax.
inline void softmax_backward_rows(const Mat& Y, const Mat& dY, Mat& dX) {
    for (Eigen::Index r = 0; r < Y.rows(); ++r) {
        const double dot = Y.row(r).dot(dY.row(r));
        dX.row(r).array() += Y.row(r).array() * (dY.row(r).array() - dot);
    }
}
}  // namespace

Graph::NodeId Graph::softmax_rows(NodeId a) {
    const Mat& X = value(a);
    Mat Y(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        const double m = X.row(r).maxCoeff();
        Y.row(r) = (X.row(r).array() - m).exp();
        Y.row(r) /= Y.row(r).sum();
    }
    const NodeId id = push(std::move(Y), {});
    nodes_[id].back = [a, id](Graph& g) {
        const Mat& Y = g.value(id);
        const Mat& dY = g.grad(id);
        softmax_backward_rows(Y, dY, g.grad_mut(a));
    };
    return id;
}

Graph::NodeId Graph::causal_softmax(NodeId scores) {
    const Mat& X = value(scores);
    if (X.rows() != X.cols()) throw ShapeMismatch("causal_softmax needs a square matrix");
    Mat Y = Mat::Zero(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        const auto seg = X.row(r).head(r + 1);
        const double m = seg.maxCoeff();
        Eigen::RowVectorXd e = (seg.array() - m).exp();
        Y.row(r).head(r + 1) = e / e.sum();
    }
    const NodeId id = push(std::move(Y), {});
    nodes_[id].back = [scores, id](Graph& g) {
        const Mat& Y = g.value(id);
        const Mat& dY = g.grad(id);
        // Masked entries have y == 0, so the standard softmax backward leaves
        // their gradients at zero.
        softmax_backward_rows(Y, dY, g.grad_mut(scores));
    };
    return id;
}

Graph::NodeId Graph::gather_rows(NodeId table, std::vector<int> indices) {
    const Mat& T = value(table);
    Mat Y(static_cast<Eigen::Index>(indices.size()), T.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= T.rows()) throw ShapeMismatch("gather_rows index out of range");
        Y.row(static_cast<Eigen::Index>(i)) = T.row(indices[i]);
    }
    const NodeId id = push(std::move(Y), {});
    nodes_[id].back = [table, id, indices = std::move(indices)](Graph& g) {
        Mat& dT = g.grad_mut(table);
        const Mat& dY = g.grad(id);
        for (std::size_t i = 0; i < indices.size(); ++i) dT.row(indices[i]) += dY.row(static_cast<Eigen::Index>(i));
    };
    return id;
}

Graph::NodeId Graph::row(NodeId a, int i) {
    if (i < 0 || i >= value(a).rows()) throw ShapeMismatch("row index out of range");
    const NodeId id = push(value(a).row(i), {});
    nodes_[id].back = [a, i, id](Graph& g) { g.grad_mut(a).row(i) += g.grad(id).row(0); };
    return id;
}

Graph::NodeId Graph::vstack(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw ShapeMismatch("vstack of nothing");
    Eigen::Index rows = 0;
    const Eigen::Index cols = value(parts[0]).cols();
    for (NodeId p : parts) {
        if (value(p).cols() != cols) throw ShapeMismatch("vstack column mismatch");
        rows += value(p).rows();
    }
    Mat Y(rows, cols);
    Eigen::Index at = 0;
    for (NodeId p : parts) {
        Y.middleRows(at, value(p).rows()) = value(p);
        at += value(p).rows();
    }
    const NodeId id = push(std::move(Y), {});
    nodes_[id].back = [parts, id](Graph& g) {
        Eigen::Index at = 0;
        for (NodeId p : parts) {
            const Eigen::Index n = g.value(p).rows();
            g.grad_mut(p) += g.grad(id).middleRows(at, n);
            at += n;
        }
    };
    return id;
}

Graph::NodeId Graph::sum_all(NodeId a) {
    Mat Y(1, 1);
    Y(0, 0) = value(a).sum();
    const NodeId id = push(std::move(Y), {});
    nodes_[id].back = [a, id](Graph& g) { g.grad_mut(a).array() += g.grad(id)(0, 0); };
    return id;
}

Graph::NodeId Graph::mean_all(NodeId a) {
    const double n = static_cast<double>(value(a).size());
    return scale(sum_all(a), 1.0 / n);
}

Graph::NodeId Graph::logsumexp_all(NodeId a) {
    const Mat& X = value(a);
    const double m = X.maxCoeff();
    const double s = (X.array() - m).exp().sum();
    Mat Y(1, 1);
    Y(0, 0) = m + std::log(s);
    const NodeId id = push(std::move(Y), {});
    nodes_[id].back = [a, id, m, s](Graph& g) {
        g.grad_mut(a).array() += g.grad(id)(0, 0) * (g.value(a).array() - m).exp() / s;
    };
    return id;
}

Graph::NodeId Graph::sq_error_sum(NodeId pred, Mat target) {
    const Mat& P = value(pred);
    if (P.rows() != target.rows() || P.cols() != target.cols()) throw ShapeMismatch("sq_error_sum shape mismatch");
    Mat Y(1, 1);
    Y(0, 0) = (P - target).squaredNorm();
    const NodeId id = push(std::move(Y), {});
    nodes_[id].back = [pred, id, target = std::move(target)](Graph& g) {
        g.grad_mut(pred) += 2.0 * g.grad(id)(0, 0) * (g.value(pred) - target);
    };
    return id;
}

Graph::NodeId Graph::cross_entropy_mean(NodeId logits, std::vector<int> targets) {
    const Mat& L = value(logits);
    if (static_cast<Eigen::Index>(targets.size()) != L.rows()) throw ShapeMismatch("one target per logits row");
    const double inv_b = 1.0 / static_cast<double>(targets.size());
    Mat P(L.rows(), L.cols());
    double loss = 0.0;
    for (Eigen::Index r = 0; r < L.rows(); ++r) {
        const int t = targets[static_cast<std::size_t>(r)];
        if (t < 0 || t >= L.cols()) throw ShapeMismatch("target id out of vocabulary");
        const double m = L.row(r).maxCoeff();
        Eigen::RowVectorXd e = (L.row(r).array() - m).exp();
        const double z = e.sum();
        P.row(r) = e / z;
        loss += (m + std::log(z)) - L(r, t);
    }
    Mat Y(1, 1);
    Y(0, 0) = loss * inv_b;
    const NodeId id = push(std::move(Y), {});
    nodes_[id].back = [logits, id, inv_b, P = std::move(P), targets = std::move(targets)](Graph& g) {
        Mat dL = P;
        for (Eigen::Index r = 0; r < dL.rows(); ++r) dL(r, targets[static_cast<std::size_t>(r)]) -= 1.0;
        g.grad_mut(logits) += g.grad(id)(0, 0) * inv_b * dL;
    };
    return id;
}

double Graph::backward(NodeId loss) {
    if (value(loss).rows() != 1 || value(loss).cols() != 1) throw ShapeMismatch("backward needs a scalar loss");
    for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    nodes_[loss].grad(0, 0) = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
        if (it->back) it->back(*this);
    return value(loss)(0, 0);
}

}  // namespace mixagent::nn
