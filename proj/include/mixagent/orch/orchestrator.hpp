#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mixagent/agent/agent.hpp"
#include "mixagent/env/proxy.hpp"

namespace mixagent::orch {

using core::DomainSpace;
using core::FeedbackVector;
using core::MixtureDistribution;
using core::TrajectoryRecord;

// The policy seen by the guided-training loop: the agent, a fixed mixture,
// or a test stub.
struct Policy {
    virtual ~Policy() = default;
    virtual MixtureDistribution act(const std::vector<agent::AgentInputStep>& history) = 0;
};

struct AgentPolicy : Policy {
    nn::NetworkParams actor;
    explicit AgentPolicy(nn::NetworkParams a) : actor(std::move(a)) {}
    MixtureDistribution act(const std::vector<agent::AgentInputStep>& history) override {
        return agent::agent_predict(actor, history);
    }
};

struct FixedPolicy : Policy {
    MixtureDistribution mixture;
    explicit FixedPolicy(MixtureDistribution m) : mixture(std::move(m)) {}
    MixtureDistribution act(const std::vector<agent::AgentInputStep>&) override { return mixture; }
};

enum class SpaceMode { Native, Fields };

struct GuidedRunConfig {
    int max_steps = 40;           // M_tgt
    int samples_per_step = 4096;  // R_tgt
    long target_pool_size = 0;    // |T|
    int pretrain_steps = 0;       // source-mixture warm-up of the target learner
    env::ProxyConfig learner;
    SpaceMode space_mode = SpaceMode::Native;
    std::uint64_t seed = 1;

    void validate() const;
};

struct RunReport {
    TrajectoryRecord executed;          // start + actions + raw feedback
    std::vector<long> coverage;         // cumulative covered target samples per step
    std::optional<int> early_stop_step; // 1-based step at which coverage hit |T|
    long source_samples = 0;            // source-field samples consumed
    std::vector<double> step_seconds;
    env::ProxyLearner final_learner;
};

// Algorithm loop: feedback -> running-list standardization -> policy action
// -> batch -> update -> coverage check; a final feedback entry is taken after
// the loop so feedback count = actions + 1. Fields mode collapses actions to
// (source, target) masses and spreads them back using the start and target
// states' within-field conditionals, so target_state is required there.
RunReport guide_training(Policy& policy, const GuidedRunConfig& config, const env::DomainCorpora& corpora,
                         const env::EvalSets& eval_sets, const MixtureDistribution& start_state,
                         const MixtureDistribution* target_state = nullptr);

enum class BaselineMode { Naive, StaticMixture, RegMixLite };

RunReport run_baseline(BaselineMode mode, const GuidedRunConfig& config, const env::DomainCorpora& corpora,
                       const env::EvalSets& eval_sets, const MixtureDistribution& start_state,
                       const MixtureDistribution& target_state,
                       const std::optional<MixtureDistribution>& static_mixture = std::nullopt);

// Least-squares coefficients of one field's linear model (score ~ w . rho,
// no intercept since rho lives on the simplex).
std::vector<double> regmix_coefficients(const std::vector<std::pair<MixtureDistribution, FeedbackVector>>& samples,
                                        std::size_t field);

// Fits one linear model per field via regmix_coefficients and returns the
// candidate maximizing the lambda-combination; the uniform point leads the
// candidate list so constant scores resolve to it.
MixtureDistribution regmix_fit(const std::vector<std::pair<MixtureDistribution, FeedbackVector>>& samples,
                               const std::vector<double>& lambda, std::uint64_t seed = 0);

struct RegMixLiteConfig {
    int proxy_runs = 64;
    int steps_per_run = 8;
    int samples_per_step = 256;
    std::uint64_t seed = 1;
};

// Reduced-budget RegMix baseline: short proxy runs on random static mixtures,
// then regmix_fit on their final feedback.
MixtureDistribution regmix_lite_mixture(const RegMixLiteConfig& cfg, const env::DomainCorpora& corpora,
                                        const env::EvalSets& eval_sets, const std::vector<double>& lambda);

struct TrajectoryAnalysis {
    std::optional<MixtureDistribution> increase_mean;
    std::optional<MixtureDistribution> decrease_mean;
    std::size_t increase_count = 0;
    std::size_t decrease_count = 0;
};

// Partitions step actions by the sign of the chosen field's feedback delta;
// exact-zero deltas join neither side.
TrajectoryAnalysis analyze_trajectories(const std::vector<TrajectoryRecord>& corpus, std::size_t field);

// Report persistence: manifest + trajectory line + per-step CSV
// (step, raw scores, standardized scores, source mass, target mass).
void write_run_report(const std::string& dir, const RunReport& report, const DomainSpace& space,
                      const std::string& config_json);

}  // namespace mixagent::orch
