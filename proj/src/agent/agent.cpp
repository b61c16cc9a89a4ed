#include "mixagent/agent/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mixagent/nn/decoder.hpp"
#include "mixagent/nn/optim.hpp"
#include "mixagent/rng.hpp"

namespace mixagent::agent {

using nn::Graph;
using nn::Mat;

AgentInputStep AgentInputStep::make(const MixtureDistribution& rho, const FeedbackVector& fb) {
    AgentInputStep step;
    step.feature = rho.weights();
    step.feature.insert(step.feature.end(), fb.scores.begin(), fb.scores.end());
    return step;
}

namespace {
Mat history_matrix(const std::vector<AgentInputStep>& history, int input_dim, int max_context) {
    if (history.empty()) throw EmptyHistory("agent history is empty");
    const std::size_t keep = std::min<std::size_t>(history.size(), static_cast<std::size_t>(max_context));
    const std::size_t from = history.size() - keep;
    Mat x(static_cast<Eigen::Index>(keep), input_dim);
    for (std::size_t t = 0; t < keep; ++t) {
        const auto& f = history[from + t].feature;
        if (static_cast<int>(f.size()) != input_dim) throw ShapeMismatch("agent feature dim mismatch");
        for (int j = 0; j < input_dim; ++j) x(static_cast<Eigen::Index>(t), j) = f[j];
    }
    return x;
}

MixtureDistribution row_to_distribution(const Eigen::RowVectorXd& row) {
    std::vector<double> w(row.data(), row.data() + row.size());
    // Softmax rows sum to 1 up to the last digit; absorb the residual.
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    *std::max_element(w.begin(), w.end()) += 1.0 - s;
    return core::validate_distribution(w, w.size());
}

// Features for positions 0..T-1 of a feedback-bearing trajectory.
Mat trajectory_features(const TrajectoryRecord& traj, int input_dim) {
    traj.check_feedback_shape();
    if (!traj.has_feedback()) throw MissingFeedback("trajectory lacks feedback");
    for (const auto& f : traj.feedback)
        if (!f.standardized) throw MissingFeedback("trajectory feedback is not standardized");
    std::vector<AgentInputStep> steps;
    steps.push_back(AgentInputStep::make(traj.start, traj.feedback[0]));
    for (std::size_t i = 0; i + 1 < traj.actions.size(); ++i)
        steps.push_back(AgentInputStep::make(traj.actions[i], traj.feedback[i + 1]));
    Mat x(static_cast<Eigen::Index>(steps.size()), input_dim);
    for (std::size_t t = 0; t < steps.size(); ++t) {
        if (static_cast<int>(steps[t].feature.size()) != input_dim) throw ShapeMismatch("feature dim mismatch");
        for (int j = 0; j < input_dim; ++j) x(static_cast<Eigen::Index>(t), j) = steps[t].feature[j];
    }
    return x;
}

Mat trajectory_targets(const TrajectoryRecord& traj) {
    const auto n = static_cast<Eigen::Index>(traj.start.dimension());
    Mat y(static_cast<Eigen::Index>(traj.actions.size()), n);
    for (std::size_t t = 0; t < traj.actions.size(); ++t)
        for (Eigen::Index j = 0; j < n; ++j) y(static_cast<Eigen::Index>(t), j) = traj.actions[t][j];
    return y;
}
}  // namespace

MixtureDistribution agent_predict(const nn::NetworkParams& actor, const std::vector<AgentInputStep>& history) {
    const auto& desc = actor.descriptor();
    Mat x = history_matrix(history, desc.input_dim, desc.max_context);
    Graph g;
    const auto nodes = nn::ParamNodes::leaves(g, actor);
    const auto out = decoder_forward_graph(g, actor, nodes, g.leaf(std::move(x)));
    return row_to_distribution(g.value(out).row(g.value(out).rows() - 1));
}

double sft_loss(const nn::NetworkParams& actor, const TrajectoryRecord& trajectory) {
    if (trajectory.actions.empty()) return 0.0;
    const auto& desc = actor.descriptor();
    Graph g;
    const auto nodes = nn::ParamNodes::leaves(g, actor);
    const auto out = decoder_forward_graph(g, actor, nodes, g.leaf(trajectory_features(trajectory, desc.input_dim)));
    return (g.value(out) - trajectory_targets(trajectory)).squaredNorm();
}

SftResult train_sft(const std::vector<TrajectoryRecord>& corpus, const nn::Descriptor& actor_desc,
                    const SftConfig& config) {
    if (corpus.empty()) throw EmptyCorpus("SFT corpus is empty");
    nn::NetworkParams actor = nn::init_params(actor_desc, derive_seed(config.seed, "sft.init"));
    nn::AdamState opt = nn::AdamState::for_params(actor);
    Rng rng(derive_seed(config.seed, "sft.shuffle"));
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);

    SftResult result{actor, {}};
    long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Fisher-Yates with the project RNG; std::shuffle is not portable.
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        double epoch_loss = 0.0;
        for (std::size_t at = 0; at < order.size(); at += config.batch_size) {
            Graph g;
            const auto nodes = nn::ParamNodes::leaves(g, actor);
            Graph::NodeId total = -1;
            for (std::size_t b = at; b < std::min(order.size(), at + config.batch_size); ++b) {
                const auto& traj = corpus[order[b]];
                if (traj.actions.empty()) continue;
                const auto out =
                    decoder_forward_graph(g, actor, nodes, g.leaf(trajectory_features(traj, actor_desc.input_dim)));
                const auto loss = g.sq_error_sum(out, trajectory_targets(traj));
                total = total < 0 ? loss : g.add(total, loss);
            }
            if (total < 0) continue;
            epoch_loss += g.backward(total);
            nn::NetworkParams grads = actor.zeros_like();
            nodes.accumulate_grads(g, grads);
            nn::adam_step(actor, grads, opt, {config.lr});
            ++step;
        }
        result.curve.push_back({step, epoch_loss / static_cast<double>(corpus.size()), 0.0, 0.0});
    }
    result.actor = std::move(actor);
    return result;
}

double scalar_reward(const FeedbackVector& current, const FeedbackVector& previous,
                     const std::vector<double>& lambda) {
    if (current.scores.size() != previous.scores.size() || current.scores.size() != lambda.size())
        throw DimensionMismatch("scalar_reward dimension mismatch");
    double sum = 0.0;
    for (double l : lambda) sum += l;
    if (std::fabs(sum - 1.0) > 1e-9) throw DimensionMismatch("lambda must sum to 1");
    double r = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) r += lambda[i] * (current.scores[i] - previous.scores[i]);
    return r;
}

std::vector<Transition> build_transitions(const std::vector<TrajectoryRecord>& corpus,
                                          const std::vector<double>& lambda) {
    std::vector<Transition> out;
    for (const auto& traj : corpus) {
        traj.check_feedback_shape();
        if (!traj.has_feedback()) throw MissingFeedback("trajectory lacks feedback");
        for (const auto& f : traj.feedback)
            if (!f.standardized) throw MissingFeedback("transitions need standardized feedback");
        std::vector<MixtureDistribution> state{traj.start};
        std::vector<FeedbackVector> state_fb{traj.feedback[0]};
        for (std::size_t t = 0; t < traj.actions.size(); ++t) {
            Transition tr{state, state_fb, traj.actions[t], traj.feedback[t + 1],
                          scalar_reward(traj.feedback[t + 1], traj.feedback[t], lambda)};
            out.push_back(tr);
            state.push_back(traj.actions[t]);
            state_fb.push_back(traj.feedback[t + 1]);
        }
    }
    return out;
}

namespace {
Mat state_matrix(const std::vector<MixtureDistribution>& state, int n) {
    Mat x(static_cast<Eigen::Index>(state.size()), n);
    for (std::size_t t = 0; t < state.size(); ++t) {
        if (static_cast<int>(state[t].dimension()) != n) throw DimensionMismatch("state dimension mismatch");
        for (int j = 0; j < n; ++j) x(static_cast<Eigen::Index>(t), j) = state[t][j];
    }
    return x;
}

Mat action_row(const MixtureDistribution& a, int n) {
    Mat x(1, n);
    for (int j = 0; j < n; ++j) x(0, j) = a[j];
    return x;
}

// Q through the tape for a state node already holding [rho_0..rho_t].
Graph::NodeId critic_q_node(Graph& g, const nn::NetworkParams& critic, const nn::ParamNodes& nodes,
                            Graph::NodeId seq) {
    const auto out = decoder_forward_graph(g, critic, nodes, seq);
    return g.row(out, static_cast<int>(g.value(out).rows()) - 1);
}

std::vector<AgentInputStep> transition_history(const Transition& t, bool include_action) {
    std::vector<AgentInputStep> h;
    for (std::size_t i = 0; i < t.state.size(); ++i) h.push_back(AgentInputStep::make(t.state[i], t.state_feedback[i]));
    if (include_action) h.push_back(AgentInputStep::make(t.action, t.action_feedback));
    return h;
}
}  // namespace

double critic_q(const nn::NetworkParams& critic, const std::vector<MixtureDistribution>& state,
                const MixtureDistribution& action) {
    const auto& desc = critic.descriptor();
    std::vector<MixtureDistribution> seq = state;
    seq.push_back(action);
    Graph g;
    const auto nodes = nn::ParamNodes::leaves(g, critic);
    const auto q = critic_q_node(g, critic, nodes, g.leaf(state_matrix(seq, desc.input_dim)));
    return g.value(q)(0, 0);
}

void CqlConfig::validate() const {
    if (alpha_cql < 0.0) throw SpecInvalid("alpha_cql must be >= 0");
    if (discount < 0.0 || discount >= 1.0) throw SpecInvalid("discount must be in [0,1)");
    if (ood_action_samples < 0) throw SpecInvalid("ood_action_samples must be >= 0");
    if (target_sync_period < 1 || batch_size < 1 || iterations < 0) throw SpecInvalid("bad cql config");
}

RewardMap RewardMap::fit(const std::vector<Transition>& transitions, double discount) {
    if (transitions.empty()) throw EmptyBatch("cannot fit reward map on empty transitions");
    double lo = transitions[0].reward, hi = transitions[0].reward;
    for (const auto& t : transitions) {
        lo = std::min(lo, t.reward);
        hi = std::max(hi, t.reward);
    }
    RewardMap map;
    map.offset = lo;
    map.scale = hi > lo ? (1.0 - discount) / (hi - lo) : 0.0;
    return map;
}

namespace {
MixtureDistribution dirichlet_action(std::size_t n, Rng& rng) {
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) {
        x = rng.exponential();
        s += x;
    }
    for (auto& x : w) x /= s;
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    *std::max_element(w.begin(), w.end()) += 1.0 - sum;
    return core::validate_distribution(w, n);
}

struct CqlBatchEval {
    double loss = 0.0;
    double bellman = 0.0;
    double penalty = 0.0;
    double mean_q = 0.0;
};

// Shared by the value-only API and the critic update. When `grads` is given,
// the full loss is built on one tape and differentiated w.r.t. the critic.
CqlBatchEval cql_batch(const nn::NetworkParams& critic, const nn::NetworkParams& target_critic,
                       const nn::NetworkParams& actor, const std::vector<Transition>& batch,
                       const RewardMap& reward_map, const CqlConfig& config, nn::NetworkParams* grads) {
    if (batch.empty()) throw EmptyBatch("cql batch is empty");
    const int n = critic.descriptor().input_dim;
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    Graph g;
    const auto nodes = nn::ParamNodes::leaves(g, critic);
    Graph::NodeId total = -1;
    CqlBatchEval eval;

    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Transition& t = batch[i];
        // Bellman target through the frozen nets; a constant on this tape.
        const MixtureDistribution next_action = agent_predict(actor, transition_history(t, true));
        std::vector<MixtureDistribution> next_state = t.state;
        next_state.push_back(t.action);
        const double target = reward_map.apply(t.reward) + config.discount * critic_q(target_critic, next_state, next_action);

        std::vector<MixtureDistribution> sa = t.state;
        sa.push_back(t.action);
        const auto q_data = critic_q_node(g, critic, nodes, g.leaf(state_matrix(sa, n)));
        eval.mean_q += g.value(q_data)(0, 0) * inv_b;

        Mat target_mat(1, 1);
        target_mat(0, 0) = target;
        Graph::NodeId item = g.sq_error_sum(q_data, target_mat);
        eval.bellman += g.value(item)(0, 0) * inv_b;

        if (config.alpha_cql > 0.0) {
            Rng ood_rng(derive_seed(config.seed, "cql.ood", i));
            std::vector<Graph::NodeId> qs;
            for (int k = 0; k < config.ood_action_samples; ++k) {
                std::vector<MixtureDistribution> alt = t.state;
                alt.push_back(dirichlet_action(t.action.dimension(), ood_rng));
                qs.push_back(critic_q_node(g, critic, nodes, g.leaf(state_matrix(alt, n))));
            }
            {
                std::vector<MixtureDistribution> alt = t.state;
                alt.push_back(config.ood_action_samples == 0 ? t.action
                                                             : agent_predict(actor, transition_history(t, false)));
                qs.push_back(critic_q_node(g, critic, nodes, g.leaf(state_matrix(alt, n))));
            }
            Graph::NodeId lme = g.add_const(g.logsumexp_all(g.vstack(qs)), -std::log(static_cast<double>(qs.size())));
            Graph::NodeId pen = g.sub(lme, q_data);
            eval.penalty += g.value(pen)(0, 0) * inv_b;
            item = g.add(item, g.scale(pen, config.alpha_cql));
        }
        total = total < 0 ? item : g.add(total, item);
    }
    total = g.scale(total, inv_b);
    eval.loss = g.value(total)(0, 0);
    if (grads) {
        g.backward(total);
        nodes.accumulate_grads(g, *grads);
    }
    return eval;
}
}  // namespace

double cql_loss(const nn::NetworkParams& critic, const nn::NetworkParams& target_critic,
                const nn::NetworkParams& actor, const std::vector<Transition>& batch, const RewardMap& reward_map,
                const CqlConfig& config) {
    config.validate();
    return cql_batch(critic, target_critic, actor, batch, reward_map, config, nullptr).loss;
}

namespace {
// Actor objective on one batch: mean Q(s, actor(s)) through the frozen
// critic, optionally anchored to the data action. Returns the objective and
// fills actor gradients of the *negated* objective (a descent direction).
double actor_batch(const nn::NetworkParams& actor, const nn::NetworkParams& critic,
                   const std::vector<Transition>& batch, const CqlConfig& config, nn::NetworkParams* grads) {
    if (batch.empty()) throw EmptyBatch("actor batch is empty");
    const int n = critic.descriptor().input_dim;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    Graph g;
    const auto actor_nodes = nn::ParamNodes::leaves(g, actor);
    const auto critic_nodes = nn::ParamNodes::leaves(g, critic);  // leaves: no grads applied
    Graph::NodeId total = -1;
    double objective = 0.0;
    for (const Transition& t : batch) {
        const auto& desc = actor.descriptor();
        const auto history = transition_history(t, false);
        Mat hx(static_cast<Eigen::Index>(history.size()), desc.input_dim);
        for (std::size_t r = 0; r < history.size(); ++r)
            for (int j = 0; j < desc.input_dim; ++j) hx(static_cast<Eigen::Index>(r), j) = history[r].feature[j];
        const auto actor_out = decoder_forward_graph(g, actor, actor_nodes, g.leaf(std::move(hx)));
        const auto action = g.row(actor_out, static_cast<int>(g.value(actor_out).rows()) - 1);

        const auto seq = g.vstack({g.leaf(state_matrix(t.state, n)), action});
        const auto q = critic_q_node(g, critic, critic_nodes, seq);
        objective += g.value(q)(0, 0) * inv_b;
        Graph::NodeId item = g.scale(q, -1.0);
        if (config.bc_anchor > 0.0)
            item = g.add(item, g.scale(g.sq_error_sum(action, action_row(t.action, n)), config.bc_anchor));
        total = total < 0 ? item : g.add(total, item);
    }
    total = g.scale(total, inv_b);
    if (grads) {
        g.backward(total);
        actor_nodes.accumulate_grads(g, *grads);
    }
    return objective;
}
}  // namespace

CqlResult train_cql(const nn::NetworkParams& actor_init, const std::vector<Transition>& transitions,
                    const nn::Descriptor& critic_desc, const CqlConfig& config) {
    config.validate();
    if (transitions.empty()) throw EmptyBatch("no transitions to train on");

    CqlResult result{actor_init, nn::init_params(critic_desc, derive_seed(config.seed, "cql.critic_init")),
                     RewardMap::fit(transitions, config.discount), {}, {}};
    nn::NetworkParams target_critic = result.critic;
    nn::AdamState critic_opt = nn::AdamState::for_params(result.critic);
    nn::AdamState actor_opt = nn::AdamState::for_params(result.actor);
    Rng rng(derive_seed(config.seed, "cql.batches"));

    for (int it = 0; it < config.iterations; ++it) {
        std::vector<Transition> batch;
        for (int b = 0; b < config.batch_size; ++b) batch.push_back(transitions[rng.below(transitions.size())]);

        nn::NetworkParams critic_grads = result.critic.zeros_like();
        CqlConfig step_cfg = config;
        step_cfg.seed = derive_seed(config.seed, "cql.step", static_cast<std::uint64_t>(it));
        const auto eval = cql_batch(result.critic, target_critic, result.actor, batch, result.reward_map, step_cfg,
                                    &critic_grads);
        nn::adam_step(result.critic, critic_grads, critic_opt, {config.critic_lr});
        result.critic_curve.push_back({it, eval.loss, eval.mean_q, eval.penalty});

        nn::NetworkParams actor_grads = result.actor.zeros_like();
        const double obj = actor_batch(result.actor, result.critic, batch, config, &actor_grads);
        nn::adam_step(result.actor, actor_grads, actor_opt, {config.actor_lr});
        result.actor_curve.push_back({it, -obj, obj, 0.0});

        if ((it + 1) % config.target_sync_period == 0) target_critic = result.critic;
    }
    return result;
}

nn::Descriptor desk_actor_descriptor(int n_domains, int n_fields) {
    nn::Descriptor d;
    d.layers = 2;
    d.d_model = 32;
    d.heads = 4;
    d.d_ff = 64;
    d.input_dim = n_domains + n_fields;
    d.output_dim = n_domains;
    d.max_context = 128;
    d.head = nn::Head::Softmax;
    return d;
}

nn::Descriptor desk_critic_descriptor(int n_domains) {
    nn::Descriptor d;
    d.layers = 1;
    d.d_model = 32;
    d.heads = 4;
    d.d_ff = 64;
    d.input_dim = n_domains;
    d.output_dim = 1;
    d.max_context = 129;  // one position more than the actor: state plus action
    d.head = nn::Head::SigmoidScalar;
    return d;
}

nn::Descriptor paper_actor_descriptor() {
    nn::Descriptor d;
    d.layers = 2;
    d.d_model = 288;
    d.heads = 8;
    d.d_ff = 1152;
    d.input_dim = 54;   // 52 domains + 2 feedback fields
    d.output_dim = 52;
    d.max_context = 128;
    d.head = nn::Head::Softmax;
    return d;
}

void write_curve_csv(const std::string& path, const std::vector<TrainCurvePoint>& curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "step,loss,mean_q,penalty\n";
    for (const auto& p : curve) out << p.step << ',' << p.loss << ',' << p.mean_q << ',' << p.penalty << '\n';
}

}  // namespace mixagent::agent
