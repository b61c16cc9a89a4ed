#include "mixagent/nn/decoder.hpp"

#include <cmath>

namespace mixagent::nn {

ParamNodes ParamNodes::leaves(Graph& g, const NetworkParams& p) {
    ParamNodes out;
    for (const auto& [name, m] : p.tensors()) out.ids.emplace(name, g.leaf(m));
    return out;
}

void ParamNodes::accumulate_grads(const Graph& g, NetworkParams& grads) const {
    for (auto& [name, m] : grads.tensors()) m += g.grad(ids.at(name));
}

Mat sinusoidal_positions(int length, int d_model) {
    Mat pe = Mat::Zero(length, d_model);
    for (int t = 0; t < length; ++t) {
        for (int i = 0; i * 2 < d_model; ++i) {
            const double freq = std::pow(10000.0, -2.0 * i / d_model);
            pe(t, 2 * i) = std::sin(t * freq);
            if (2 * i + 1 < d_model) pe(t, 2 * i + 1) = std::cos(t * freq);
        }
    }
    return pe;
}

Graph::NodeId decoder_forward_graph(Graph& g, const NetworkParams& params, const ParamNodes& nodes, Graph::NodeId x) {
    const Descriptor& desc = params.descriptor();
    const Eigen::Index T = g.value(x).rows();
    if (g.value(x).cols() != desc.input_dim) throw ShapeMismatch("decoder input dim mismatch");
    if (T > desc.max_context) throw ContextOverflow("sequence longer than max context");

    auto P = [&](const std::string& name) { return nodes.ids.at(name); };

    Graph::NodeId h = g.add_rowvec(g.matmul(x, P("in.w")), P("in.b"));
    h = g.add(h, g.leaf(sinusoidal_positions(static_cast<int>(T), desc.d_model)));

    const int dk = desc.d_model / desc.heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    for (int l = 0; l < desc.layers; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        // Attention with per-head projections; head outputs are summed through
        // their own output matrices, equivalent to concat + a joint W_o.
        Graph::NodeId a = g.layernorm_rows(h, P(pre + "ln1.g"), P(pre + "ln1.b"));
        Graph::NodeId attn = -1;
        for (int hd = 0; hd < desc.heads; ++hd) {
            const std::string hs = std::to_string(hd);
            Graph::NodeId q = g.matmul(a, P(pre + "attn.wq" + hs));
            Graph::NodeId k = g.matmul(a, P(pre + "attn.wk" + hs));
            Graph::NodeId v = g.matmul(a, P(pre + "attn.wv" + hs));
            Graph::NodeId scores = g.scale(g.matmul(q, g.transpose(k)), inv_sqrt_dk);
            Graph::NodeId probs = g.causal_softmax(scores);
            Graph::NodeId head_out = g.matmul(g.matmul(probs, v), P(pre + "attn.wo" + hs));
            attn = (attn < 0) ? head_out : g.add(attn, head_out);
        }
        attn = g.add_rowvec(attn, P(pre + "attn.bo"));
        h = g.add(h, attn);

        Graph::NodeId f = g.layernorm_rows(h, P(pre + "ln2.g"), P(pre + "ln2.b"));
        f = g.add_rowvec(g.matmul(f, P(pre + "ffn.w1")), P(pre + "ffn.b1"));
        f = g.gelu(f);
        f = g.add_rowvec(g.matmul(f, P(pre + "ffn.w2")), P(pre + "ffn.b2"));
        h = g.add(h, f);
    }

    h = g.layernorm_rows(h, P("final_ln.g"), P("final_ln.b"));
    Graph::NodeId out = g.add_rowvec(g.matmul(h, P("head.w")), P("head.b"));
    switch (desc.head) {
        case Head::Linear: return out;
        case Head::Softmax: return g.softmax_rows(out);
        case Head::SigmoidScalar:
            if (desc.output_dim != 1) throw DescriptorInvalid("sigmoid_scalar head needs output_dim 1");
            return g.sigmoid(out);
    }
    throw DescriptorInvalid("unreachable head");
}

std::vector<std::vector<double>> decoder_forward(const NetworkParams& params,
                                                 const std::vector<std::vector<double>>& input_sequence) {
    if (input_sequence.empty()) throw EmptyHistory("decoder_forward on empty sequence");
    const auto dim = static_cast<Eigen::Index>(params.descriptor().input_dim);
    Mat x(static_cast<Eigen::Index>(input_sequence.size()), dim);
    for (std::size_t t = 0; t < input_sequence.size(); ++t) {
        if (static_cast<Eigen::Index>(input_sequence[t].size()) != dim) throw ShapeMismatch("feature dim mismatch");
        for (Eigen::Index j = 0; j < dim; ++j) x(static_cast<Eigen::Index>(t), j) = input_sequence[t][j];
    }
    Graph g;
    const auto nodes = ParamNodes::leaves(g, params);
    const auto out = decoder_forward_graph(g, params, nodes, g.leaf(std::move(x)));
    const Mat& y = g.value(out);
    std::vector<std::vector<double>> result(y.rows());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        result[r].resize(y.cols());
        for (Eigen::Index c = 0; c < y.cols(); ++c) result[r][c] = y(r, c);
    }
    return result;
}

}  // namespace mixagent::nn
