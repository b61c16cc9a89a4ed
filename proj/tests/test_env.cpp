#include <doctest.h>

#include <cmath>

#include "mixagent/env/proxy.hpp"

using namespace mixagent;
using namespace mixagent::core;
using namespace mixagent::env;

namespace {
DomainSpace desk_space() {
    return DomainSpace({{"web", Field::Source},
                        {"books", Field::Source},
                        {"news", Field::Source},
                        {"wiki", Field::Source},
                        {"code", Field::Target},
                        {"math", Field::Target}});
}

CorpusSpec small_spec(std::uint64_t seed = 1) {
    CorpusSpec s{desk_space(), 64, 16, 512, 64, seed};
    return s;
}

MixtureDistribution dist(std::vector<double> w) { return validate_distribution(w, w.size()); }
}  // namespace

TEST_CASE("corpus generation is deterministic and separated") {
    const auto a = generate_corpus(small_spec());
    const auto b = generate_corpus(small_spec());
    REQUIRE(a.train_pools().size() == 6);
    CHECK(a.train_pools()[2] == b.train_pools()[2]);
    CHECK(a.heldout_pools()[5] == b.heldout_pools()[5]);
    const auto c = generate_corpus(small_spec(2));
    CHECK(a.train_pools()[0] != c.train_pools()[0]);

    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(a.train_pools()[i].size() == 512);
        CHECK(a.heldout_pools()[i].size() == 64);
        for (const auto& seq : a.heldout_pools()[i]) CHECK(seq.size() == 16);
        for (std::size_t j = 0; j < 6; ++j)
            if (i != j) CHECK(generator_unigram_kl(a.generators()[i], a.generators()[j]) > 0.1);
    }
}

TEST_CASE("batch sampling follows the mixture") {
    const auto corpora = generate_corpus(small_spec());
    Rng rng(5);
    // vertex mixture: every sequence from domain 4
    const auto b = sample_batch(corpora, dist({0, 0, 0, 0, 1, 0}), 200, rng);
    REQUIRE(b.sequences.size() == 200);
    for (auto d : b.domains) CHECK(d == 4);

    // balanced mixture lands near expectation
    const auto c = sample_batch(corpora, dist({0.5, 0, 0, 0, 0.5, 0}), 4000, rng);
    std::size_t first = 0;
    for (auto d : c.domains) {
        CHECK((d == 0 || d == 4));
        first += d == 0;
    }
    CHECK(std::fabs(static_cast<double>(first) / 4000.0 - 0.5) < 0.05);
}

TEST_CASE("eval sets split held-out sequences") {
    const auto corpora = generate_corpus(small_spec());
    const auto evals = build_eval_sets(corpora, 6, 9);
    REQUIRE(evals.size() == 2);
    CHECK(evals[0].name == "general");
    CHECK(evals[1].name == "target");
    for (const auto& field : evals) {
        CHECK(field.pairs.size() == 6);
        for (const auto& p : field.pairs) {
            CHECK(p.prompt.size() == 8);
            CHECK(p.response.size() == 8);
        }
    }
}

TEST_CASE("untrained learner scores exactly minus log vocab") {
    const auto corpora = generate_corpus(small_spec());
    const auto evals = build_eval_sets(corpora, 8, 9);
    ProxyLearner learner({64, 16, 32, 1.0, 7});
    const auto fb = feedback(learner, evals);
    REQUIRE(fb.scores.size() == 2);
    const double expect = -std::log(64.0);
    CHECK(std::fabs(fb.scores[0] - expect) < 1e-12);
    CHECK(std::fabs(fb.scores[1] - expect) < 1e-12);
    CHECK(std::fabs(expect + 4.158883) < 1e-6);
    CHECK_FALSE(fb.standardized);
}

TEST_CASE("score matches the per-pair chain rule oracle") {
    const auto corpora = generate_corpus(small_spec());
    ProxyLearner learner({64, 16, 32, 1.0, 3});
    // train a little so logits are not uniform
    Rng rng(2);
    for (int i = 0; i < 5; ++i)
        learner.train_step(sample_batch(corpora, dist({0.25, 0.25, 0.25, 0.25, 0, 0}), 64, rng));

    EvalField field{"hand", {{{3, 7}, {11, 12, 13}}, {{}, {1}}, {{20}, {21, 22}}}};
    double expect = 0.0;
    {
        double lp = learner.log_prob(7, 11) + learner.log_prob(11, 12) + learner.log_prob(12, 13);
        expect += lp / 3.0;
    }
    expect += learner.log_prob(0, 1);  // empty prompt falls back to token 0 context
    expect += (learner.log_prob(20, 21) + learner.log_prob(21, 22)) / 2.0;
    expect /= 3.0;
    CHECK(std::fabs(score(learner, field) - expect) < 1e-10);
    CHECK(score(learner, field) <= 0.0);

    CHECK_THROWS_AS(score(learner, EvalField{"empty", {}}), EmptyEvalSet);
    CHECK_THROWS_AS(score(learner, EvalField{"bad", {{{1}, {}}}}), EmptyEvalSet);
}

TEST_CASE("standardization analytic values") {
    std::vector<FeedbackVector> h{FeedbackVector({1.0, -3.0}, false), FeedbackVector({2.0, -3.0}, false),
                                  FeedbackVector({3.0, -3.0}, false)};
    const auto z = standardize_feedback(h, StandardizeMode::RunningList);
    REQUIRE(z.size() == 3);
    CHECK(z[0].scores[0] == doctest::Approx(-1.224744871391589).epsilon(1e-12));
    CHECK(z[1].scores[0] == doctest::Approx(0.0));
    CHECK(z[2].scores[0] == doctest::Approx(1.224744871391589).epsilon(1e-12));
    // constant field falls back to unit std
    CHECK(z[0].scores[1] == 0.0);
    CHECK(z[0].standardized);

    const auto single = standardize_feedback({FeedbackVector({-4.2, 0.7}, false)}, StandardizeMode::RunningList);
    CHECK(single[0].scores[0] == 0.0);
    CHECK(single[0].scores[1] == 0.0);

    CHECK_THROWS_AS(standardize_feedback({}, StandardizeMode::RunningList), EmptyHistory);
}

TEST_CASE("corpus-wide standardization pools all checkpoints") {
    const auto s = dist({0.5, 0.5});
    std::vector<TrajectoryRecord> corpus;
    TrajectoryRecord a{s, {s}, {FeedbackVector({0.0}, false), FeedbackVector({2.0}, false)}, {}};
    TrajectoryRecord b{s, {s}, {FeedbackVector({4.0}, false), FeedbackVector({6.0}, false)}, {}};
    corpus = {a, b};
    standardize_corpus(corpus);
    // pooled mean 3, population std sqrt(5)
    const double sd = std::sqrt(5.0);
    CHECK(corpus[0].feedback[0].scores[0] == doctest::Approx(-3.0 / sd).epsilon(1e-12));
    CHECK(corpus[1].feedback[1].scores[0] == doctest::Approx(3.0 / sd).epsilon(1e-12));
    CHECK(corpus[0].feedback[0].standardized);
}

TEST_CASE("proxy training reduces loss on a fixed mixture") {
    const auto corpora = generate_corpus(small_spec());
    ProxyLearner learner({64, 16, 32, 1.0, 11});
    Rng rng(6);
    const auto mix = dist({0.25, 0.25, 0.25, 0.25, 0, 0});
    const double first = learner.train_step(sample_batch(corpora, mix, 128, rng));
    double last = first;
    for (int i = 0; i < 40; ++i) last = learner.train_step(sample_batch(corpora, mix, 128, rng));
    CHECK(first == doctest::Approx(std::log(64.0)).epsilon(1e-9));  // uniform start
    CHECK(last < first - 0.2);
}

TEST_CASE("target-only training causes forgetting") {
    const auto corpora = generate_corpus(small_spec());
    const auto evals = build_eval_sets(corpora, 8, 9);
    ProxyLearner learner({64, 16, 32, 1.0, 11});
    Rng rng(6);
    const auto general_mix = dist({0.25, 0.25, 0.25, 0.25, 0, 0});
    const auto target_mix = dist({0, 0, 0, 0, 0.5, 0.5});
    for (int i = 0; i < 20; ++i) learner.train_step(sample_batch(corpora, general_mix, 256, rng));
    const auto pre = feedback(learner, evals);
    for (int i = 0; i < 20; ++i) learner.train_step(sample_batch(corpora, target_mix, 256, rng));
    const auto post = feedback(learner, evals);
    CHECK(post.scores[1] > pre.scores[1]);  // target improves
    CHECK(post.scores[0] < pre.scores[0]);  // general degrades
}

TEST_CASE("feedback collection shape, determinism, parallel equals serial") {
    const auto corpora = generate_corpus(small_spec());
    const auto evals = build_eval_sets(corpora, 4, 9);
    std::vector<TrajectoryRecord> trajs;
    Rng rng(17);
    for (int p = 0; p < 3; ++p) {
        TrajectoryRecord t{dist({0.25, 0.25, 0.25, 0.25, 0, 0}), {}, {}, {derive_seed(99, "t", p), 1, ""}};
        for (int d = 0; d < 3; ++d) {
            std::vector<double> w(6);
            double s = 0;
            for (auto& x : w) {
                x = rng.exponential();
                s += x;
            }
            for (auto& x : w) x /= s;
            w[0] += 1.0 - (w[0] + w[1] + w[2] + w[3] + w[4] + w[5]);
            t.actions.push_back(dist(w));
        }
        trajs.push_back(t);
    }
    CollectConfig cfg{64, 5, 1};
    const auto serial = collect_feedback(trajs, corpora, evals, cfg);
    REQUIRE(serial.size() == 3);
    for (const auto& t : serial) {
        REQUIRE(t.feedback.size() == t.actions.size() + 1);
        CHECK(std::fabs(t.feedback[0].scores[0] + std::log(64.0)) < 1e-12);  // untrained base
        CHECK_FALSE(t.feedback[0].standardized);
    }
    cfg.workers = 3;
    const auto parallel = collect_feedback(trajs, corpora, evals, cfg);
    for (std::size_t i = 0; i < serial.size(); ++i)
        for (std::size_t j = 0; j < serial[i].feedback.size(); ++j)
            for (std::size_t f = 0; f < 2; ++f)
                CHECK(parallel[i].feedback[j].scores[f] == serial[i].feedback[j].scores[f]);

    CHECK_THROWS_AS(collect_feedback(serial, corpora, evals, cfg), DataError);  // already collected
}
