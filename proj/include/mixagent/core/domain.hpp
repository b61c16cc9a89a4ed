#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixagent/errors.hpp"

namespace mixagent::core {

enum class Field { Source, Target };

struct Domain {
    std::string name;
    Field field = Field::Source;
};

// Ordered list of named domains; defines the action dimension N.
class DomainSpace {
  public:
    explicit DomainSpace(std::vector<Domain> domains);

    std::size_t dimension() const { return domains_.size(); }
    const std::vector<Domain>& domains() const { return domains_; }
    const Domain& at(std::size_t i) const { return domains_.at(i); }

    std::vector<std::size_t> field_indices(Field f) const;
    std::size_t source_count() const { return field_indices(Field::Source).size(); }
    std::size_t target_count() const { return field_indices(Field::Target).size(); }

  private:
    std::vector<Domain> domains_;
};

// A point on the N-simplex. Immutable after construction; construction
// validates (no silent renormalization anywhere).
class MixtureDistribution {
  public:
    static constexpr double kSumTolerance = 1e-9;

    const std::vector<double>& weights() const { return w_; }
    double operator[](std::size_t i) const { return w_[i]; }
    std::size_t dimension() const { return w_.size(); }

    // L-inf equality at 1e-9, the persistence round-trip tolerance.
    bool approx_equal(const MixtureDistribution& o, double tol = 1e-9) const;

    friend MixtureDistribution validate_distribution(const std::vector<double>& raw, std::size_t n);

  private:
    explicit MixtureDistribution(std::vector<double> w) : w_(std::move(w)) {}
    std::vector<double> w_;
};

// Rejects anything off the simplex: DimensionMismatch, NegativeWeight,
// SumNotOne (|sum-1| > 1e-9).
MixtureDistribution validate_distribution(const std::vector<double>& raw, std::size_t n);

// KL(p || q) in nats with epsilon-smoothing of both arguments:
// w -> (1-eps) w + eps/N, eps = 1e-8. Exactly zero when p == q.
double kl_divergence(const MixtureDistribution& p, const MixtureDistribution& q);

// Sums source-field and target-field mass into a 2-simplex point
// [source, target]. Compensated summation so mass is preserved exactly.
MixtureDistribution project_to_fields(const MixtureDistribution& dist, const DomainSpace& space);

// Normalizes per-domain sample counts into a start-state estimate.
MixtureDistribution estimate_state_from_counts(const std::vector<std::uint64_t>& counts);

// Zero mass on every source domain; target_empirical (over the target
// domains, in space order) fills the target coordinates.
MixtureDistribution make_target_state(const std::vector<double>& target_empirical, const DomainSpace& space);

// One checkpoint's per-field environment scores.
struct FeedbackVector {
    std::vector<double> scores;
    bool standardized = false;

    FeedbackVector() = default;
    FeedbackVector(std::vector<double> s, bool std_flag);
};

struct Provenance {
    std::uint64_t seed = 0;
    int tier_k = 0;
    std::string config_hash;
};

// One data mixing trajectory: start state, the ordered actions, and (once
// collected) one feedback vector per checkpoint, index 0 being the start
// state's feedback from the untrained proxy.
struct TrajectoryRecord {
    MixtureDistribution start;
    std::vector<MixtureDistribution> actions;
    std::vector<FeedbackVector> feedback;  // empty, or actions.size() + 1
    Provenance provenance;

    bool has_feedback() const { return !feedback.empty(); }
    void check_feedback_shape() const;
};

// Offline RL tuple: state = [rho_0..rho_{t-1}] with aligned standardized
// feedback, action = rho_t, next_state = state with the action appended.
struct Transition {
    std::vector<MixtureDistribution> state;
    std::vector<FeedbackVector> state_feedback;
    MixtureDistribution action;
    FeedbackVector action_feedback;
    double reward = 0.0;
};

}  // namespace mixagent::core
