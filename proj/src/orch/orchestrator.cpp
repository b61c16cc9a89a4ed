#include "mixagent/orch/orchestrator.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mixagent/core/serialize.hpp"
#include "mixagent/hash.hpp"
#include "mixagent/sampler/sampler.hpp"

namespace mixagent::orch {

using core::Field;
using core::validate_distribution;

void GuidedRunConfig::validate() const {
    if (max_steps < 1 || samples_per_step < 1) throw SpecInvalid("max_steps and samples_per_step must be >= 1");
    if (target_pool_size < 0) throw SpecInvalid("target_pool_size must be >= 0");
    if (pretrain_steps < 0) throw SpecInvalid("pretrain_steps must be >= 0");
}

namespace {
// Conditional of `dist` over the domains of one field; uniform when the
// field carries no mass.
std::vector<double> field_conditional(const MixtureDistribution& dist, const DomainSpace& space, Field f) {
    const auto idx = space.field_indices(f);
    std::vector<double> cond(idx.size(), 0.0);
    double mass = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) mass += dist[idx[k]];
    if (mass <= 0.0) {
        for (auto& c : cond) c = 1.0 / static_cast<double>(idx.size());
    } else {
        for (std::size_t k = 0; k < idx.size(); ++k) cond[k] = dist[idx[k]] / mass;
    }
    return cond;
}

// Two-dimensional guided mode: collapse the native action to field masses,
// then spread each field's mass over its domains following the reference
// conditionals (start state for source, target state for target).
MixtureDistribution spread_fields(const MixtureDistribution& action, const DomainSpace& space,
                                  const MixtureDistribution& start_state, const MixtureDistribution& target_state) {
    const auto projected = core::project_to_fields(action, space);
    const auto src_cond = field_conditional(start_state, space, Field::Source);
    const auto tgt_cond = field_conditional(target_state, space, Field::Target);
    const auto src_idx = space.field_indices(Field::Source);
    const auto tgt_idx = space.field_indices(Field::Target);
    std::vector<double> w(space.dimension(), 0.0);
    for (std::size_t k = 0; k < src_idx.size(); ++k) w[src_idx[k]] = projected[0] * src_cond[k];
    for (std::size_t k = 0; k < tgt_idx.size(); ++k) w[tgt_idx[k]] = projected[1] * tgt_cond[k];
    double s = 0.0;
    for (double x : w) s += x;
    std::size_t arg = 0;
    for (std::size_t i = 1; i < w.size(); ++i)
        if (w[i] > w[arg]) arg = i;
    w[arg] += 1.0 - s;
    return validate_distribution(w, space.dimension());
}
}  // namespace

RunReport guide_training(Policy& policy, const GuidedRunConfig& config, const env::DomainCorpora& corpora,
                         const env::EvalSets& eval_sets, const MixtureDistribution& start_state,
                         const MixtureDistribution* target_state) {
    config.validate();
    const auto& space = corpora.space();
    if (config.space_mode == SpaceMode::Fields && target_state == nullptr)
        throw SpecInvalid("fields mode needs a target state for the within-field spread");

    env::ProxyConfig lc = config.learner;
    lc.vocab = corpora.spec().vocab;
    lc.seed = derive_seed(config.seed, "guide.learner");
    env::ProxyLearner learner(lc);
    Rng batch_rng(derive_seed(config.seed, "guide.batch"));

    for (int i = 0; i < config.pretrain_steps; ++i)
        learner.train_step(env::sample_batch(corpora, start_state, config.samples_per_step, batch_rng));

    RunReport report{TrajectoryRecord{start_state, {}, {}, {config.seed, 0, ""}}, {}, std::nullopt, 0, {}, learner};
    std::vector<FeedbackVector> raw_history;
    long covered = 0;

    for (int t = 1; t <= config.max_steps; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        raw_history.push_back(env::feedback(learner, eval_sets));
        const auto standardized = env::standardize_feedback(raw_history, env::StandardizeMode::RunningList);

        std::vector<agent::AgentInputStep> history;
        history.push_back(agent::AgentInputStep::make(report.executed.start, standardized[0]));
        for (std::size_t i = 0; i < report.executed.actions.size(); ++i)
            history.push_back(agent::AgentInputStep::make(report.executed.actions[i], standardized[i + 1]));

        MixtureDistribution action = policy.act(history);
        if (config.space_mode == SpaceMode::Fields) action = spread_fields(action, space, start_state, *target_state);

        learner.train_step(env::sample_batch(corpora, action, config.samples_per_step, batch_rng));
        report.executed.actions.push_back(action);

        const long step_covered = sampler::target_samples_covered(action, config.samples_per_step, space);
        covered += step_covered;
        report.coverage.push_back(covered);
        report.source_samples += config.samples_per_step - step_covered;
        report.step_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

        if (covered >= config.target_pool_size) {
            report.early_stop_step = t;
            break;
        }
    }
    raw_history.push_back(env::feedback(learner, eval_sets));
    report.executed.feedback = raw_history;
    report.executed.check_feedback_shape();
    report.final_learner = learner;
    return report;
}

RunReport run_baseline(BaselineMode mode, const GuidedRunConfig& config, const env::DomainCorpora& corpora,
                       const env::EvalSets& eval_sets, const MixtureDistribution& start_state,
                       const MixtureDistribution& target_state,
                       const std::optional<MixtureDistribution>& static_mixture) {
    switch (mode) {
        case BaselineMode::Naive: {
            FixedPolicy policy(target_state);
            return guide_training(policy, config, corpora, eval_sets, start_state, &target_state);
        }
        case BaselineMode::StaticMixture: {
            if (!static_mixture) throw SpecInvalid("static baseline needs a mixture");
            FixedPolicy policy(*static_mixture);
            return guide_training(policy, config, corpora, eval_sets, start_state, &target_state);
        }
        case BaselineMode::RegMixLite: {
            if (!static_mixture) throw SpecInvalid("regmix baseline needs the fitted mixture");
            FixedPolicy policy(*static_mixture);
            return guide_training(policy, config, corpora, eval_sets, start_state, &target_state);
        }
    }
    throw SpecInvalid("unknown baseline mode");
}

std::vector<double> regmix_coefficients(const std::vector<std::pair<MixtureDistribution, FeedbackVector>>& samples,
                                        std::size_t field) {
    if (samples.empty()) throw TooFewSamples("no regression samples");
    const std::size_t n = samples.front().first.dimension();
    if (field >= samples.front().second.scores.size()) throw DimensionMismatch("field index out of range");
    if (samples.size() < n + 1) throw TooFewSamples("need at least N+1 samples");

    Eigen::MatrixXd x(samples.size(), n);
    Eigen::VectorXd y(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::size_t j = 0; j < n; ++j)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = samples[i].first[j];
        y(static_cast<Eigen::Index>(i)) = samples[i].second.scores[field];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < static_cast<Eigen::Index>(n)) throw DegenerateDesign("rank-deficient mixture design");
    const Eigen::VectorXd w = qr.solve(y);
    return std::vector<double>(w.data(), w.data() + w.size());
}

MixtureDistribution regmix_fit(const std::vector<std::pair<MixtureDistribution, FeedbackVector>>& samples,
                               const std::vector<double>& lambda, std::uint64_t seed) {
    if (samples.empty()) throw TooFewSamples("no regression samples");
    const std::size_t n = samples.front().first.dimension();
    const std::size_t fields = samples.front().second.scores.size();
    if (lambda.size() != fields) throw DimensionMismatch("lambda length mismatch");

    // Score ~ w . rho per field; no intercept, the simplex absorbs it.
    Eigen::VectorXd combined = Eigen::VectorXd::Zero(n);
    for (std::size_t f = 0; f < fields; ++f) {
        const auto w = regmix_coefficients(samples, f);
        for (std::size_t j = 0; j < n; ++j) combined(static_cast<Eigen::Index>(j)) += lambda[f] * w[j];
    }

    // Candidate re-ranking over the simplex: uniform first (the documented
    // tie rule), vertices, then random interior points.
    std::vector<MixtureDistribution> candidates;
    candidates.push_back(validate_distribution(std::vector<double>(n, 1.0 / static_cast<double>(n)), n));
    for (std::size_t v = 0; v < n; ++v) {
        std::vector<double> w(n, 0.0);
        w[v] = 1.0;
        candidates.push_back(validate_distribution(w, n));
    }
    Rng rng(derive_seed(seed, "regmix.candidates"));
    for (int i = 0; i < 512; ++i) candidates.push_back(sampler::random_probability(n, rng));

    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < n; ++j) v += combined(static_cast<Eigen::Index>(j)) * candidates[i][j];
        if (v > best_value + 1e-12) {
            best_value = v;
            best = i;
        }
    }
    return candidates[best];
}

MixtureDistribution regmix_lite_mixture(const RegMixLiteConfig& cfg, const env::DomainCorpora& corpora,
                                        const env::EvalSets& eval_sets, const std::vector<double>& lambda) {
    std::vector<std::pair<MixtureDistribution, FeedbackVector>> samples;
    for (int run = 0; run < cfg.proxy_runs; ++run) {
        Rng mix_rng(derive_seed(cfg.seed, "regmix.mixture", static_cast<std::uint64_t>(run)));
        const auto mixture = sampler::random_probability(corpora.space().dimension(), mix_rng);
        env::ProxyConfig pc;
        pc.vocab = corpora.spec().vocab;
        pc.seed = derive_seed(cfg.seed, "regmix.proxy", static_cast<std::uint64_t>(run));
        env::ProxyLearner learner(pc);
        Rng batch_rng(derive_seed(cfg.seed, "regmix.batch", static_cast<std::uint64_t>(run)));
        for (int s = 0; s < cfg.steps_per_run; ++s)
            learner.train_step(env::sample_batch(corpora, mixture, cfg.samples_per_step, batch_rng));
        samples.emplace_back(mixture, env::feedback(learner, eval_sets));
    }
    return regmix_fit(samples, lambda, cfg.seed);
}

TrajectoryAnalysis analyze_trajectories(const std::vector<TrajectoryRecord>& corpus, std::size_t field) {
    TrajectoryAnalysis out;
    std::vector<double> inc, dec;
    std::size_t n = 0;
    for (const auto& traj : corpus) {
        traj.check_feedback_shape();
        if (!traj.has_feedback()) throw MissingFeedback("analysis needs feedback");
        n = traj.start.dimension();
        if (inc.empty()) {
            inc.assign(n, 0.0);
            dec.assign(n, 0.0);
        }
        for (std::size_t t = 0; t < traj.actions.size(); ++t) {
            if (field >= traj.feedback[t].scores.size()) throw DimensionMismatch("field index out of range");
            const double delta = traj.feedback[t + 1].scores[field] - traj.feedback[t].scores[field];
            if (delta == 0.0) continue;  // zero-sign deltas join neither side
            auto& acc = delta > 0.0 ? inc : dec;
            auto& count = delta > 0.0 ? out.increase_count : out.decrease_count;
            for (std::size_t j = 0; j < n; ++j) acc[j] += traj.actions[t][j];
            ++count;
        }
    }
    auto mean_of = [&](std::vector<double> acc, std::size_t count) -> std::optional<MixtureDistribution> {
        if (count == 0) return std::nullopt;
        for (auto& x : acc) x /= static_cast<double>(count);
        double s = 0.0;
        for (double x : acc) s += x;
        *std::max_element(acc.begin(), acc.end()) += 1.0 - s;
        return validate_distribution(acc, acc.size());
    };
    out.increase_mean = mean_of(inc, out.increase_count);
    out.decrease_mean = mean_of(dec, out.decrease_count);
    return out;
}

void write_run_report(const std::string& dir, const RunReport& report, const DomainSpace& space,
                      const std::string& config_json) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    const std::string traj_line = core::trajectory_to_line(report.executed) + "\n";
    {
        std::ofstream out(dir + "/trajectory.jsonl", std::ios::binary);
        out << traj_line;
    }

    std::ostringstream csv;
    const auto standardized = env::standardize_feedback(report.executed.feedback, env::StandardizeMode::RunningList);
    const std::size_t fields = report.executed.feedback.front().scores.size();
    csv << "step";
    for (std::size_t f = 0; f < fields; ++f) csv << ",raw_" << f;
    for (std::size_t f = 0; f < fields; ++f) csv << ",std_" << f;
    csv << ",source_mass,target_mass\n";
    for (std::size_t i = 0; i < report.executed.feedback.size(); ++i) {
        const MixtureDistribution& dist = i == 0 ? report.executed.start : report.executed.actions[i - 1];
        const auto projected = core::project_to_fields(dist, space);
        csv << i;
        csv.precision(12);
        for (std::size_t f = 0; f < fields; ++f) csv << ',' << report.executed.feedback[i].scores[f];
        for (std::size_t f = 0; f < fields; ++f) csv << ',' << standardized[i].scores[f];
        csv << ',' << projected[0] << ',' << projected[1] << '\n';
    }
    {
        std::ofstream out(dir + "/timeseries.csv", std::ios::binary);
        out << csv.str();
    }

    nlohmann::json manifest{
        {"config", nlohmann::json::parse(config_json)},
        {"early_stop_step", report.early_stop_step ? nlohmann::json(*report.early_stop_step) : nlohmann::json()},
        {"source_samples", report.source_samples},
        {"coverage", report.coverage},
        {"artifacts",
         {{"trajectory.jsonl", content_hash(traj_line)}, {"timeseries.csv", content_hash(csv.str())}}},
    };
    std::ofstream out(dir + "/manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
}

}  // namespace mixagent::orch
