#pragma once

#include <cstdint>
#include <vector>

#include "mixagent/core/domain.hpp"
#include "mixagent/rng.hpp"

namespace mixagent::sampler {

using core::DomainSpace;
using core::MixtureDistribution;
using core::TrajectoryRecord;

struct InductiveWeights {
    double alpha = 1.0;  // smoothness: KL(last action || candidate)
    double beta = 1.0;   // target drift: sigmoid(d/5) * KL(target || candidate)
    double gamma = 0.5;  // diversity bonus across prior trajectories
};

struct SamplerConfig {
    int trajectories_per_run = 4;       // P
    int max_steps = 20;                 // M
    int samples_per_step = 8000;        // R
    int top_k = 1;                      // K
    int candidate_count = 20000;
    InductiveWeights weights;
    long target_pool_size = -1;         // |T|; < 0 means 50 * R
    std::uint64_t seed = 1;
    bool share_prior_trajectories = false;  // feed earlier runs into s_d

    void validate() const;
    long resolved_target_pool() const { return target_pool_size < 0 ? 50L * samples_per_step : target_pool_size; }
};

struct TrajectorySet {
    std::vector<TrajectoryRecord> trajectories;
    int tier_k = 0;
};

// Flat Dirichlet draw over the N-simplex.
MixtureDistribution random_probability(std::size_t n, Rng& rng);

// alpha*KL(last||cand) + beta*sigmoid(d/5)*KL(target||cand)
//   - gamma * mean over prior trajectories' step-d actions of KL(prior||cand)
double calculate_inductive_score(int step, const MixtureDistribution& candidate,
                                 const std::vector<TrajectoryRecord>& prior, const MixtureDistribution& last_action,
                                 const MixtureDistribution& target_state, const InductiveWeights& w);

// Uniform choice among the K lowest-scoring candidates; ties broken by the
// stable candidate index.
std::size_t random_top_k(const std::vector<double>& scores, int k, Rng& rng);

// round(R * target-field mass of rho).
long target_samples_covered(const MixtureDistribution& rho, int samples_per_step, const DomainSpace& space);

// Algorithm: per trajectory, score candidate_count fresh Dirichlet draws per
// step, pick via random_top_k, stop at max_steps or once the cumulative
// covered target samples reach the pool size. Completed trajectories join
// the prior set so later ones feel the diversity term.
TrajectorySet sample_trajectories(const SamplerConfig& config, const MixtureDistribution& start,
                                  const MixtureDistribution& target_state, const DomainSpace& space,
                                  const std::vector<TrajectoryRecord>* prior_runs = nullptr);

}  // namespace mixagent::sampler
