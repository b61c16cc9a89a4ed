#include "mixagent/sampler/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mixagent::sampler {

using core::kl_divergence;
using core::validate_distribution;

void SamplerConfig::validate() const {
    if (trajectories_per_run < 1 || max_steps < 1 || samples_per_step < 1 || top_k < 1 || candidate_count < 1)
        throw SpecInvalid("sampler config fields must be positive");
    if (top_k > candidate_count) throw SpecInvalid("top_k exceeds candidate_count");
}

MixtureDistribution random_probability(std::size_t n, Rng& rng) {
    if (n < 2) throw DimensionMismatch("simplex dimension must be >= 2");
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) {
        x = rng.exponential();
        s += x;
    }
    for (auto& x : w) x /= s;
    // Normalization leaves a last-digit deficit now and then; absorb it into
    // the largest coordinate so the simplex check stays exact.
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    auto it = std::max_element(w.begin(), w.end());
    *it += 1.0 - sum;
    return validate_distribution(w, n);
}

namespace {
// tau[d] with the start state at index 0.
const MixtureDistribution& trajectory_element(const TrajectoryRecord& t, int d) {
    return d == 0 ? t.start : t.actions[static_cast<std::size_t>(d) - 1];
}
}  // namespace

double calculate_inductive_score(int step, const MixtureDistribution& candidate,
                                 const std::vector<TrajectoryRecord>& prior, const MixtureDistribution& last_action,
                                 const MixtureDistribution& target_state, const InductiveWeights& w) {
    if (step < 0) throw DataError("negative step index");
    const double smooth = kl_divergence(last_action, candidate);
    const double drift = kl_divergence(target_state, candidate);
    double diversity = 0.0;
    int count = 0;
    for (const auto& t : prior) {
        const int len = static_cast<int>(t.actions.size()) + 1;
        if (step < len) {
            diversity += kl_divergence(trajectory_element(t, step), candidate);
            ++count;
        }
    }
    if (count > 0) diversity /= count;
    const double gate = 1.0 / (1.0 + std::exp(-static_cast<double>(step) / 5.0));
    return w.alpha * smooth + w.beta * gate * drift - w.gamma * diversity;
}

std::size_t random_top_k(const std::vector<double>& scores, int k, Rng& rng) {
    if (scores.empty()) throw EmptyCandidates("no candidates to select from");
    if (k < 1 || static_cast<std::size_t>(k) > scores.size()) throw KTooLarge("top-k out of range");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] < scores[b] : a < b;
    });
    return order[rng.below(static_cast<std::uint64_t>(k))];
}

long target_samples_covered(const MixtureDistribution& rho, int samples_per_step, const DomainSpace& space) {
    const auto projected = core::project_to_fields(rho, space);
    return std::lround(static_cast<double>(samples_per_step) * projected[1]);
}

TrajectorySet sample_trajectories(const SamplerConfig& config, const MixtureDistribution& start,
                                  const MixtureDistribution& target_state, const DomainSpace& space,
                                  const std::vector<TrajectoryRecord>* prior_runs) {
    config.validate();
    if (start.dimension() != space.dimension() || target_state.dimension() != space.dimension())
        throw DimensionMismatch("start/target state dimension mismatch");

    std::vector<TrajectoryRecord> prior;
    if (config.share_prior_trajectories && prior_runs) prior = *prior_runs;

    TrajectorySet out;
    out.tier_k = config.top_k;
    const long pool = config.resolved_target_pool();

    for (int p = 0; p < config.trajectories_per_run; ++p) {
        const std::uint64_t traj_seed = derive_seed(config.seed, "sampler.trajectory", static_cast<std::uint64_t>(p));
        Rng rng(traj_seed);
        TrajectoryRecord traj{start, {}, {}, {traj_seed, config.top_k, ""}};
        const MixtureDistribution* last = &traj.start;
        long covered = 0;
        for (int d = 0; d < config.max_steps; ++d) {
            std::vector<MixtureDistribution> candidates;
            std::vector<double> scores;
            candidates.reserve(config.candidate_count);
            scores.reserve(config.candidate_count);
            for (int c = 0; c < config.candidate_count; ++c) {
                candidates.push_back(random_probability(space.dimension(), rng));
                scores.push_back(
                    calculate_inductive_score(d, candidates.back(), prior, *last, target_state, config.weights));
            }
            const std::size_t pick = random_top_k(scores, config.top_k, rng);
            traj.actions.push_back(candidates[pick]);
            last = &traj.actions.back();
            covered += target_samples_covered(*last, config.samples_per_step, space);
            if (covered >= pool) break;
        }
        prior.push_back(traj);
        out.trajectories.push_back(std::move(traj));
    }
    return out;
}

}  // namespace mixagent::sampler
