#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mixagent/sampler/sampler.hpp"

using namespace mixagent;
using namespace mixagent::core;
using namespace mixagent::sampler;

namespace {
DomainSpace desk_space() {
    return DomainSpace({{"web", Field::Source},
                        {"books", Field::Source},
                        {"news", Field::Source},
                        {"wiki", Field::Source},
                        {"code", Field::Target},
                        {"math", Field::Target}});
}

MixtureDistribution dist(std::vector<double> w) { return validate_distribution(w, w.size()); }

MixtureDistribution start6() { return dist({0.25, 0.25, 0.25, 0.25, 0.0, 0.0}); }
MixtureDistribution target6() { return dist({0.0, 0.0, 0.0, 0.0, 0.5, 0.5}); }
}  // namespace

TEST_CASE("flat dirichlet draws are valid and roughly uniform") {
    Rng rng(1);
    std::vector<double> mean(4, 0.0);
    for (int i = 0; i < 4000; ++i) {
        const auto d = random_probability(4, rng);
        for (int j = 0; j < 4; ++j) {
            CHECK(d[j] >= 0.0);
            mean[j] += d[j] / 4000.0;
        }
    }
    for (int j = 0; j < 4; ++j) CHECK(std::fabs(mean[j] - 0.25) < 0.02);
    CHECK_THROWS_AS(random_probability(1, rng), DimensionMismatch);
}

TEST_CASE("inductive score matches a hand oracle") {
    const auto space = desk_space();
    const auto cand = dist({0.1, 0.1, 0.1, 0.1, 0.3, 0.3});
    const auto last = start6();
    const auto target = target6();
    InductiveWeights w{0.7, 1.3, 0.5};

    // no prior trajectories: diversity term contributes nothing
    const double d3 = calculate_inductive_score(3, cand, {}, last, target, w);
    const double gate = 1.0 / (1.0 + std::exp(-3.0 / 5.0));
    const double expect = 0.7 * kl_divergence(last, cand) + 1.3 * gate * kl_divergence(target, cand);
    CHECK(d3 == doctest::Approx(expect).epsilon(1e-12));

    // prior trajectory with a step-3 element pulls the score down
    TrajectoryRecord prior{start6(), {cand, cand, cand}, {}, {}};
    const double with_prior = calculate_inductive_score(3, cand, {prior}, last, target, w);
    CHECK(with_prior == doctest::Approx(expect - 0.5 * kl_divergence(cand, cand)).epsilon(1e-12));
    // a different prior element gives a strictly lower score than no prior
    TrajectoryRecord far{start6(), {target6(), target6(), target6()}, {}, {}};
    CHECK(calculate_inductive_score(3, cand, {far}, last, target, w) < expect);

    // later steps gate the drift term harder
    const double d0 = calculate_inductive_score(0, cand, {}, last, target, w);
    CHECK(d3 > d0);

    // prior trajectories shorter than the step index are skipped
    TrajectoryRecord shorty{start6(), {}, {}, {}};
    CHECK(calculate_inductive_score(3, cand, {shorty}, last, target, w) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("top-k selection") {
    Rng rng(2);
    const std::vector<double> scores{3.0, 1.0, 2.0, 1.0, 5.0};
    // K=1 is the exact argmin; ties resolve to the lower index
    for (int i = 0; i < 20; ++i) CHECK(random_top_k(scores, 1, rng) == 1);
    // K=2 picks among the two lowest (the tied pair at indices 1 and 3)
    std::vector<int> seen(5, 0);
    for (int i = 0; i < 200; ++i) ++seen[random_top_k(scores, 2, rng)];
    CHECK(seen[0] == 0);
    CHECK(seen[2] == 0);
    CHECK(seen[4] == 0);
    CHECK(seen[1] > 0);
    CHECK(seen[3] > 0);

    CHECK_THROWS_AS(random_top_k({}, 1, rng), EmptyCandidates);
    CHECK_THROWS_AS(random_top_k(scores, 6, rng), KTooLarge);
    CHECK_THROWS_AS(random_top_k(scores, 0, rng), KTooLarge);
}

TEST_CASE("covered target samples round half away from zero") {
    const auto space = desk_space();
    CHECK(target_samples_covered(dist({0, 0, 0, 0, 0.5, 0.5}), 100, space) == 100);
    CHECK(target_samples_covered(start6(), 100, space) == 0);
    CHECK(target_samples_covered(dist({0.5, 0, 0, 0, 0.25, 0.25}), 101, space) == 51);  // 50.5 rounds up
}

TEST_CASE("trajectory sampling structure and determinism") {
    const auto space = desk_space();
    SamplerConfig cfg;
    cfg.trajectories_per_run = 3;
    cfg.max_steps = 5;
    cfg.samples_per_step = 100;
    cfg.candidate_count = 50;
    cfg.top_k = 1;
    cfg.target_pool_size = 1000000;  // unreachable: all trajectories run full length
    cfg.seed = 42;

    const auto a = sample_trajectories(cfg, start6(), target6(), space);
    CHECK(a.tier_k == 1);
    REQUIRE(a.trajectories.size() == 3);
    for (const auto& t : a.trajectories) {
        CHECK(t.actions.size() == 5);
        CHECK(t.start.approx_equal(start6()));
        CHECK(t.feedback.empty());
        CHECK(t.provenance.tier_k == 1);
        for (const auto& act : t.actions) CHECK(act.dimension() == 6);
    }
    // distinct per-trajectory seeds
    CHECK(a.trajectories[0].provenance.seed != a.trajectories[1].provenance.seed);

    const auto b = sample_trajectories(cfg, start6(), target6(), space);
    for (int p = 0; p < 3; ++p)
        for (int d = 0; d < 5; ++d) CHECK(a.trajectories[p].actions[d].approx_equal(b.trajectories[p].actions[d]));

    cfg.seed = 43;
    const auto c = sample_trajectories(cfg, start6(), target6(), space);
    CHECK_FALSE(a.trajectories[0].actions[0].approx_equal(c.trajectories[0].actions[0]));
}

TEST_CASE("early stop on covered target pool") {
    const auto space = desk_space();
    SamplerConfig cfg;
    cfg.trajectories_per_run = 2;
    cfg.max_steps = 50;
    cfg.samples_per_step = 1000;
    cfg.candidate_count = 100;
    cfg.top_k = 1;
    cfg.weights = {0.0, 10.0, 0.0};  // pure drift: actions rush toward the target state
    cfg.target_pool_size = 2000;
    cfg.seed = 7;
    const auto set = sample_trajectories(cfg, start6(), target6(), space);
    for (const auto& t : set.trajectories) {
        CHECK(t.actions.size() < 50);
        long covered = 0;
        for (std::size_t d = 0; d + 1 < t.actions.size(); ++d)
            covered += target_samples_covered(t.actions[d], cfg.samples_per_step, space);
        CHECK(covered < 2000);  // stop fired at the first step crossing the pool
        covered += target_samples_covered(t.actions.back(), cfg.samples_per_step, space);
        CHECK(covered >= 2000);
    }
}

TEST_CASE("K=1 selects the exact argmin each step") {
    const auto space = desk_space();
    // replicate one trajectory by hand with the same per-trajectory stream
    SamplerConfig cfg;
    cfg.trajectories_per_run = 1;
    cfg.max_steps = 3;
    cfg.samples_per_step = 10;
    cfg.candidate_count = 40;
    cfg.top_k = 1;
    cfg.target_pool_size = 1000000;
    cfg.seed = 11;
    const auto set = sample_trajectories(cfg, start6(), target6(), space);

    Rng rng(derive_seed(11, "sampler.trajectory", 0));
    MixtureDistribution last = start6();
    for (int d = 0; d < 3; ++d) {
        std::vector<MixtureDistribution> cands;
        std::vector<double> scores;
        for (int c = 0; c < 40; ++c) {
            cands.push_back(random_probability(6, rng));
            scores.push_back(calculate_inductive_score(d, cands.back(), {}, last, target6(), cfg.weights));
        }
        rng.u64();  // the tie-break draw consumed by random_top_k
        const auto best = static_cast<std::size_t>(
            std::min_element(scores.begin(), scores.end()) - scores.begin());
        CHECK(set.trajectories[0].actions[d].approx_equal(cands[best]));
        last = cands[best];
    }
}

TEST_CASE("sampler config validation") {
    SamplerConfig cfg;
    cfg.top_k = 100;
    cfg.candidate_count = 50;
    CHECK_THROWS_AS(cfg.validate(), SpecInvalid);
    cfg = {};
    cfg.max_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), SpecInvalid);
    cfg = {};
    CHECK(cfg.resolved_target_pool() == 50L * cfg.samples_per_step);
    cfg.target_pool_size = 123;
    CHECK(cfg.resolved_target_pool() == 123);
}

TEST_CASE("diversity weight spreads same-step actions apart") {
    const auto space = desk_space();
    SamplerConfig base;
    base.trajectories_per_run = 4;
    base.max_steps = 4;
    base.samples_per_step = 100;
    base.candidate_count = 300;
    base.top_k = 1;
    base.target_pool_size = 1000000;
    base.seed = 3;

    auto spread = [&](double gamma) {
        SamplerConfig cfg = base;
        cfg.weights.gamma = gamma;
        const auto set = sample_trajectories(cfg, start6(), target6(), space);
        double total = 0.0;
        int count = 0;
        for (std::size_t i = 0; i < set.trajectories.size(); ++i)
            for (std::size_t j = i + 1; j < set.trajectories.size(); ++j)
                for (int d = 0; d < 4; ++d) {
                    total += kl_divergence(set.trajectories[i].actions[d], set.trajectories[j].actions[d]);
                    ++count;
                }
        return total / count;
    };
    CHECK(spread(0.5) > spread(0.0) * 0.9);  // single-seed smoke; the 18/20 form runs in acceptance
}
