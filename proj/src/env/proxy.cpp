#include "mixagent/env/proxy.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "mixagent/nn/decoder.hpp"
#include "mixagent/nn/optim.hpp"

namespace mixagent::env {

using core::Field;
using nn::Graph;
using nn::Mat;

EvalSets build_eval_sets(const DomainCorpora& corpora, int pairs_per_field, std::uint64_t seed) {
    if (pairs_per_field < 1) throw SpecInvalid("pairs_per_field must be positive");
    const auto& space = corpora.space();
    auto build = [&](Field f, const std::string& name, std::uint64_t stream) {
        Rng rng(derive_seed(seed, "eval." + name, stream));
        const auto idx = space.field_indices(f);
        EvalField field{name, {}};
        for (int i = 0; i < pairs_per_field; ++i) {
            const std::size_t d = idx[i % idx.size()];
            const auto& pool = corpora.heldout_pools()[d];
            const TokenSeq& seq = pool[rng.below(pool.size())];
            const std::size_t cut = seq.size() / 2;
            field.pairs.push_back({TokenSeq(seq.begin(), seq.begin() + cut), TokenSeq(seq.begin() + cut, seq.end())});
        }
        return field;
    };
    return {build(Field::Source, "general", 0), build(Field::Target, "target", 1)};
}

namespace {
Mat random_mat(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
    return m;
}
}  // namespace

ProxyLearner::ProxyLearner(const ProxyConfig& cfg) : cfg_(cfg) {
    Rng rng(derive_seed(cfg.seed, "proxy.init"));
    nn::Descriptor desc;
    desc.layers = 1;
    desc.d_model = cfg.embed_dim;
    desc.heads = 1;
    desc.d_ff = cfg.hidden_dim;
    desc.input_dim = cfg.vocab;
    desc.output_dim = cfg.vocab;
    desc.head = nn::Head::Linear;
    params_ = nn::NetworkParams(desc);
    params_.add("embed", random_mat(cfg.vocab, cfg.embed_dim, 1.0 / std::sqrt(cfg.embed_dim), rng));
    params_.add("w1", random_mat(cfg.embed_dim, cfg.hidden_dim, 1.0 / std::sqrt(cfg.embed_dim), rng));
    params_.add("b1", Mat::Zero(1, cfg.hidden_dim));
    params_.add("w2", Mat::Zero(cfg.hidden_dim, cfg.vocab));  // exact uniform start
    params_.add("b2", Mat::Zero(1, cfg.vocab));
}

namespace {
// Forward to logits for a list of context tokens.
Graph::NodeId proxy_logits(Graph& g, const nn::ParamNodes& nodes, const std::vector<int>& prev_tokens) {
    Graph::NodeId x = g.gather_rows(nodes.ids.at("embed"), prev_tokens);
    Graph::NodeId h = g.tanh_op(g.add_rowvec(g.matmul(x, nodes.ids.at("w1")), nodes.ids.at("b1")));
    return g.add_rowvec(g.matmul(h, nodes.ids.at("w2")), nodes.ids.at("b2"));
}
}  // namespace

double ProxyLearner::train_step(const TokenBatch& batch) {
    std::vector<int> prev, next;
    for (const auto& seq : batch.sequences) {
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            if (static_cast<int>(seq[i]) >= cfg_.vocab || static_cast<int>(seq[i + 1]) >= cfg_.vocab)
                throw ShapeMismatch("token id out of vocabulary");
            prev.push_back(seq[i]);
            next.push_back(seq[i + 1]);
        }
    }
    if (prev.empty()) return 0.0;
    Graph g;
    const auto nodes = nn::ParamNodes::leaves(g, params_);
    const auto loss = g.cross_entropy_mean(proxy_logits(g, nodes, prev), next);
    const double value = g.backward(loss);
    if (!std::isfinite(value)) throw NumericError("proxy loss diverged");
    nn::NetworkParams grads = params_.zeros_like();
    nodes.accumulate_grads(g, grads);
    nn::sgd_step(params_, grads, {cfg_.lr});
    ++steps_;
    return value;
}

double ProxyLearner::log_prob(int prev_token, int token) const {
    Graph g;
    const auto nodes = nn::ParamNodes::leaves(g, params_);
    const auto logits = proxy_logits(g, nodes, {prev_token});
    const Mat& L = g.value(logits);
    const double m = L.row(0).maxCoeff();
    const double z = (L.row(0).array() - m).exp().sum();
    return L(0, token) - m - std::log(z);
}

double score(const ProxyLearner& learner, const EvalField& field) {
    if (field.pairs.empty()) throw EmptyEvalSet("empty eval field " + field.name);
    // One forward pass per pair via the batched graph would be overkill for
    // these sizes; evaluate the chain rule directly.
    Graph g;
    const auto nodes = nn::ParamNodes::leaves(g, learner.params());
    std::vector<int> prev;
    std::vector<std::pair<std::size_t, int>> wanted;  // (row, token)
    std::vector<double> pair_len;
    for (const auto& p : field.pairs) {
        if (p.response.empty()) throw EmptyEvalSet("empty response in field " + field.name);
        int ctx = p.prompt.empty() ? 0 : p.prompt.back();
        for (std::size_t j = 0; j < p.response.size(); ++j) {
            wanted.emplace_back(prev.size(), p.response[j]);
            prev.push_back(ctx);
            ctx = p.response[j];
        }
        pair_len.push_back(static_cast<double>(p.response.size()));
    }
    const Mat& L = g.value(proxy_logits(g, nodes, prev));
    std::vector<double> logprob(prev.size());
    for (std::size_t r = 0; r < prev.size(); ++r) {
        const double m = L.row(r).maxCoeff();
        const double z = (L.row(r).array() - m).exp().sum();
        logprob[r] = L(r, wanted[r].second) - m - std::log(z);
    }
    double total = 0.0;
    std::size_t at = 0;
    for (std::size_t i = 0; i < field.pairs.size(); ++i) {
        double lp = 0.0;
        for (std::size_t j = 0; j < field.pairs[i].response.size(); ++j) lp += logprob[at++];
        total += lp / pair_len[i];
    }
    return total / static_cast<double>(field.pairs.size());
}

FeedbackVector feedback(const ProxyLearner& learner, const EvalSets& eval_sets) {
    std::vector<double> scores;
    scores.reserve(eval_sets.size());
    for (const auto& field : eval_sets) scores.push_back(score(learner, field));
    return FeedbackVector(std::move(scores), false);
}

std::vector<FeedbackVector> standardize_feedback(const std::vector<FeedbackVector>& history, StandardizeMode) {
    if (history.empty()) throw EmptyHistory("standardize_feedback on empty history");
    const std::size_t fields = history.front().scores.size();
    for (const auto& f : history)
        if (f.scores.size() != fields) throw DimensionMismatch("feedback field count varies in history");
    const double n = static_cast<double>(history.size());
    std::vector<double> mean(fields, 0.0), stddev(fields, 0.0);
    for (const auto& f : history)
        for (std::size_t i = 0; i < fields; ++i) mean[i] += f.scores[i];
    for (auto& m : mean) m /= n;
    for (const auto& f : history)
        for (std::size_t i = 0; i < fields; ++i) stddev[i] += (f.scores[i] - mean[i]) * (f.scores[i] - mean[i]);
    for (auto& s : stddev) {
        s = std::sqrt(s / n);
        if (s < 1e-12) s = 1.0;  // length-1 and constant histories
    }
    std::vector<FeedbackVector> out;
    out.reserve(history.size());
    for (const auto& f : history) {
        std::vector<double> z(fields);
        for (std::size_t i = 0; i < fields; ++i) z[i] = (f.scores[i] - mean[i]) / stddev[i];
        out.emplace_back(std::move(z), true);
    }
    return out;
}

void standardize_corpus(std::vector<core::TrajectoryRecord>& corpus) {
    std::vector<FeedbackVector> all;
    for (const auto& t : corpus) {
        t.check_feedback_shape();
        if (!t.has_feedback()) throw MissingFeedback("corpus-wide standardization needs feedback");
        all.insert(all.end(), t.feedback.begin(), t.feedback.end());
    }
    const auto z = standardize_feedback(all, StandardizeMode::CorpusWide);
    std::size_t at = 0;
    for (auto& t : corpus)
        for (auto& f : t.feedback) f = z[at++];
}

namespace {
core::TrajectoryRecord collect_one(const core::TrajectoryRecord& traj, const DomainCorpora& corpora,
                                   const EvalSets& eval_sets, const CollectConfig& cfg) {
    ProxyConfig pc;
    pc.vocab = corpora.spec().vocab;
    pc.seed = cfg.proxy_seed;
    ProxyLearner learner(pc);
    // Keyed on the trajectory's own seed so results do not depend on list
    // position (resume and parallel collection reuse the same stream).
    Rng batch_rng(derive_seed(cfg.proxy_seed, "collect.batch", traj.provenance.seed));

    core::TrajectoryRecord out = traj;
    out.feedback.clear();
    out.feedback.push_back(feedback(learner, eval_sets));  // untrained base model
    for (const auto& action : traj.actions) {
        const TokenBatch batch = sample_batch(corpora, action, cfg.samples_per_step, batch_rng);
        learner.train_step(batch);
        out.feedback.push_back(feedback(learner, eval_sets));
    }
    return out;
}
}  // namespace

std::vector<core::TrajectoryRecord> collect_feedback(const std::vector<core::TrajectoryRecord>& trajectories,
                                                     const DomainCorpora& corpora, const EvalSets& eval_sets,
                                                     const CollectConfig& cfg) {
    for (const auto& t : trajectories)
        if (t.has_feedback()) throw DataError("trajectory already has feedback");
    std::vector<core::TrajectoryRecord> out(trajectories.size(), core::TrajectoryRecord{
        core::validate_distribution(std::vector<double>(2, 0.5), 2), {}, {}, {}});
    const int workers = std::max(1, cfg.workers);
    if (workers == 1) {
        for (std::size_t i = 0; i < trajectories.size(); ++i)
            out[i] = collect_one(trajectories[i], corpora, eval_sets, cfg);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < trajectories.size(); i = next.fetch_add(1))
                    out[i] = collect_one(trajectories[i], corpora, eval_sets, cfg);
            });
        for (auto& t : pool) t.join();
    }
    return out;
}

}  // namespace mixagent::env
