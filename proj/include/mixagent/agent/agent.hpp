#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mixagent/core/domain.hpp"
#include "mixagent/nn/params.hpp"

namespace mixagent::agent {

using core::FeedbackVector;
using core::MixtureDistribution;
using core::TrajectoryRecord;
using core::Transition;

// One agent input position: the mixture concatenated with that checkpoint's
// standardized feedback.
struct AgentInputStep {
    std::vector<double> feature;

    static AgentInputStep make(const MixtureDistribution& rho, const FeedbackVector& fb);
};

// Softmax head at the final position; histories longer than the context
// window keep the most recent positions.
MixtureDistribution agent_predict(const nn::NetworkParams& actor, const std::vector<AgentInputStep>& history);

// Sum over steps t >= 1 of squared error between the causal prediction from
// [rho_0..rho_{t-1}] and the recorded action rho_t. Needs standardized
// feedback on the trajectory.
double sft_loss(const nn::NetworkParams& actor, const TrajectoryRecord& trajectory);

struct SftConfig {
    int epochs = 60;
    int batch_size = 4;  // trajectories per update
    double lr = 3e-3;
    std::uint64_t seed = 1;
};

struct TrainCurvePoint {
    long step = 0;
    double loss = 0.0;
    double mean_q = 0.0;
    double penalty = 0.0;
};

struct SftResult {
    nn::NetworkParams actor;
    std::vector<TrainCurvePoint> curve;
};

// Warm-up on the top-1 tier (CorpusWide-standardized feedback applied by the
// caller); Adam on the summed per-trajectory MSE.
SftResult train_sft(const std::vector<TrajectoryRecord>& corpus, const nn::Descriptor& actor_desc,
                    const SftConfig& config);

// Eq.-style gain of the equal-weight linear combination of standardized
// feedback between consecutive checkpoints.
double scalar_reward(const FeedbackVector& current, const FeedbackVector& previous, const std::vector<double>& lambda);

// One transition per (trajectory, step t >= 1); feedback must be present and
// standardized corpus-wide before the call.
std::vector<Transition> build_transitions(const std::vector<TrajectoryRecord>& corpus,
                                          const std::vector<double>& lambda);

// Q(s, a): single-layer decoder over the state distributions with the action
// appended; sigmoid scalar at the final position.
double critic_q(const nn::NetworkParams& critic, const std::vector<MixtureDistribution>& state,
                const MixtureDistribution& action);

struct CqlConfig {
    double alpha_cql = 1.0;
    double discount = 0.99;
    int ood_action_samples = 10;  // flat-Dirichlet penalty actions per state
    int target_sync_period = 25;
    double critic_lr = 1e-3;
    double actor_lr = 3e-4;
    double bc_anchor = 0.0;  // optional MSE pull toward the data action
    int batch_size = 16;
    int iterations = 400;
    std::uint64_t seed = 1;

    void validate() const;
};

// Affine map taking raw reward gains into [0, 1 - discount] so returns fit
// the sigmoid-bounded critic. Recorded in run manifests and inverted for
// reporting.
struct RewardMap {
    double offset = 0.0;
    double scale = 1.0;

    double apply(double r) const { return (r - offset) * scale; }
    static RewardMap fit(const std::vector<Transition>& transitions, double discount);
};

// Mean over the batch of squared Bellman error plus alpha_cql times the
// conservative penalty (log-mean-exp over penalty actions minus the data
// action's Q). Bellman targets use the frozen target critic with the actor's
// action standing in for max over the continuous simplex.
double cql_loss(const nn::NetworkParams& critic, const nn::NetworkParams& target_critic,
                const nn::NetworkParams& actor, const std::vector<Transition>& batch, const RewardMap& reward_map,
                const CqlConfig& config);

struct CqlResult {
    nn::NetworkParams actor;
    nn::NetworkParams critic;
    RewardMap reward_map;
    std::vector<TrainCurvePoint> critic_curve;
    std::vector<TrainCurvePoint> actor_curve;
};

// Alternating updates: critic minimizes cql_loss, actor ascends
// Q(s, actor(s)) through the frozen critic; hard target sync on a period.
CqlResult train_cql(const nn::NetworkParams& actor_init, const std::vector<Transition>& transitions,
                    const nn::Descriptor& critic_desc, const CqlConfig& config);

// Default descriptors. The desk actor stays small; the paper-scale profile
// (input 54 = 52 domains + 2 feedback fields) lands near 2.1M parameters.
nn::Descriptor desk_actor_descriptor(int n_domains, int n_fields);
nn::Descriptor desk_critic_descriptor(int n_domains);
nn::Descriptor paper_actor_descriptor();

void write_curve_csv(const std::string& path, const std::vector<TrainCurvePoint>& curve);

}  // namespace mixagent::agent
