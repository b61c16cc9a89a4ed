#include "mixagent/core/domain.hpp"

#include <cmath>
#include <set>

namespace mixagent::core {

DomainSpace::DomainSpace(std::vector<Domain> domains) : domains_(std::move(domains)) {
    if (domains_.size() < 2) throw SpecInvalid("domain space needs at least 2 domains");
    std::set<std::string> names;
    bool has_source = false, has_target = false;
    for (const auto& d : domains_) {
        if (!names.insert(d.name).second) throw SpecInvalid("duplicate domain name: " + d.name);
        (d.field == Field::Source ? has_source : has_target) = true;
    }
    if (!has_source || !has_target) throw SpecInvalid("domain space needs both source and target domains");
}

std::vector<std::size_t> DomainSpace::field_indices(Field f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < domains_.size(); ++i)
        if (domains_[i].field == f) out.push_back(i);
    return out;
}

bool MixtureDistribution::approx_equal(const MixtureDistribution& o, double tol) const {
    if (o.w_.size() != w_.size()) return false;
    for (std::size_t i = 0; i < w_.size(); ++i)
        if (std::fabs(w_[i] - o.w_[i]) > tol) return false;
    return true;
}

namespace {
double kahan_sum(const std::vector<double>& v) {
    double s = 0.0, c = 0.0;
    for (double x : v) {
        const double y = x - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}
}  // namespace

MixtureDistribution validate_distribution(const std::vector<double>& raw, std::size_t n) {
    if (raw.size() != n) throw DimensionMismatch("distribution has wrong dimension");
    for (double w : raw) {
        if (!std::isfinite(w)) throw NegativeWeight("non-finite weight");
        if (w < 0.0) throw NegativeWeight("negative weight");
    }
    const double s = kahan_sum(raw);
    if (std::fabs(s - 1.0) > MixtureDistribution::kSumTolerance) throw SumNotOne("weights sum to " + std::to_string(s));
    return MixtureDistribution(raw);
}

double kl_divergence(const MixtureDistribution& p, const MixtureDistribution& q) {
    if (p.dimension() != q.dimension()) throw DimensionMismatch("kl_divergence dimension mismatch");
    constexpr double eps = 1e-8;
    const double n = static_cast<double>(p.dimension());
    double kl = 0.0;
    for (std::size_t i = 0; i < p.dimension(); ++i) {
        const double pi = (1.0 - eps) * p[i] + eps / n;
        const double qi = (1.0 - eps) * q[i] + eps / n;
        if (pi != qi) kl += pi * std::log(pi / qi);
    }
    return kl;
}

MixtureDistribution project_to_fields(const MixtureDistribution& dist, const DomainSpace& space) {
    if (dist.dimension() != space.dimension()) throw DimensionMismatch("project_to_fields dimension mismatch");
    std::vector<double> src, tgt;
    for (std::size_t i = 0; i < space.dimension(); ++i)
        (space.at(i).field == Field::Source ? src : tgt).push_back(dist[i]);
    return validate_distribution({kahan_sum(src), kahan_sum(tgt)}, 2);
}

MixtureDistribution estimate_state_from_counts(const std::vector<std::uint64_t>& counts) {
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw EmptySample("all counts zero");
    std::vector<double> w(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) w[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    return validate_distribution(w, counts.size());
}

MixtureDistribution make_target_state(const std::vector<double>& target_empirical, const DomainSpace& space) {
    const auto targets = space.field_indices(Field::Target);
    if (target_empirical.size() != targets.size()) throw DimensionMismatch("target_empirical has wrong length");
    double s = 0.0;
    for (double w : target_empirical) {
        if (!(w >= 0.0)) throw InvalidEmpirical("negative target weight");
        s += w;
    }
    if (std::fabs(s - 1.0) > MixtureDistribution::kSumTolerance) throw InvalidEmpirical("target weights sum to " + std::to_string(s));
    std::vector<double> w(space.dimension(), 0.0);
    for (std::size_t k = 0; k < targets.size(); ++k) w[targets[k]] = target_empirical[k];
    return validate_distribution(w, space.dimension());
}

FeedbackVector::FeedbackVector(std::vector<double> s, bool std_flag) : scores(std::move(s)), standardized(std_flag) {
    for (double x : scores)
        if (!std::isfinite(x)) throw DataError("non-finite feedback score");
}

void TrajectoryRecord::check_feedback_shape() const {
    if (!feedback.empty() && feedback.size() != actions.size() + 1)
        throw MissingFeedback("feedback count must equal actions + 1");
}

}  // namespace mixagent::core
