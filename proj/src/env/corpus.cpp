#include "mixagent/env/corpus.hpp"

#include <cmath>

namespace mixagent::env {

void CorpusSpec::validate() const {
    if (vocab < 4 || vocab > 65535) throw SpecInvalid("vocab out of range");
    if (seq_len < 2) throw SpecInvalid("seq_len must be >= 2");
    if (train_pool < 1 || heldout_pool < 1) throw SpecInvalid("pool sizes must be positive");
}

namespace {
std::vector<double> normalized(std::vector<double> w) {
    double s = 0.0;
    for (double x : w) s += x;
    for (double& x : w) x /= s;
    return w;
}

// Each domain concentrates mass on its own token block; bigram rows shift
// the signature by a domain-specific offset so conditionals differ too.
DomainGenerator make_generator(std::size_t domain, std::size_t n_domains, int vocab, Rng& rng) {
    DomainGenerator g;
    const int block = vocab / static_cast<int>(n_domains);
    const int lo = static_cast<int>(domain) * block;
    g.unigram.resize(vocab);
    for (int t = 0; t < vocab; ++t) {
        const bool in_block = t >= lo && t < lo + block;
        g.unigram[t] = (in_block ? 8.0 : 0.25) * (0.5 + rng.uniform());
    }
    g.unigram = normalized(g.unigram);

    const int offset = static_cast<int>(1 + domain * 7);
    g.bigram.resize(vocab);
    for (int t = 0; t < vocab; ++t) {
        std::vector<double> row(vocab);
        const int kick = (t + offset) % vocab;
        for (int u = 0; u < vocab; ++u) row[u] = 0.45 * g.unigram[u] + (u == kick ? 0.5 : 0.0) + 0.05 / vocab;
        g.bigram[t] = normalized(std::move(row));
    }
    return g;
}

TokenSeq draw_sequence(const DomainGenerator& g, int seq_len, Rng& rng) {
    TokenSeq seq(seq_len);
    seq[0] = static_cast<std::uint16_t>(rng.categorical(g.unigram, 1.0));
    for (int i = 1; i < seq_len; ++i)
        seq[i] = static_cast<std::uint16_t>(rng.categorical(g.bigram[seq[i - 1]], 1.0));
    return seq;
}
}  // namespace

double generator_unigram_kl(const DomainGenerator& a, const DomainGenerator& b) {
    double kl = 0.0;
    for (std::size_t t = 0; t < a.unigram.size(); ++t) kl += a.unigram[t] * std::log(a.unigram[t] / b.unigram[t]);
    return kl;
}

DomainCorpora generate_corpus(const CorpusSpec& spec) {
    spec.validate();
    const std::size_t n = spec.space.dimension();
    std::vector<DomainGenerator> generators;
    for (std::size_t d = 0; d < n; ++d) {
        Rng rng(derive_seed(spec.seed, "corpus.generator", d));
        generators.push_back(make_generator(d, n, spec.vocab, rng));
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && generator_unigram_kl(generators[i], generators[j]) <= 0.1)
                throw SpecInvalid("domain generators not separated (unigram KL <= 0.1)");

    std::vector<std::vector<TokenSeq>> train(n), heldout(n);
    for (std::size_t d = 0; d < n; ++d) {
        Rng train_rng(derive_seed(spec.seed, "corpus.train", d));
        Rng held_rng(derive_seed(spec.seed, "corpus.heldout", d));
        train[d].reserve(spec.train_pool);
        for (int i = 0; i < spec.train_pool; ++i) train[d].push_back(draw_sequence(generators[d], spec.seq_len, train_rng));
        heldout[d].reserve(spec.heldout_pool);
        for (int i = 0; i < spec.heldout_pool; ++i) heldout[d].push_back(draw_sequence(generators[d], spec.seq_len, held_rng));
    }
    return DomainCorpora(spec, std::move(generators), std::move(train), std::move(heldout));
}

TokenBatch sample_batch(const DomainCorpora& corpora, const MixtureDistribution& rho, int samples, Rng& rng) {
    if (rho.dimension() != corpora.space().dimension()) throw DimensionMismatch("sample_batch dimension mismatch");
    TokenBatch batch;
    batch.sequences.reserve(samples);
    batch.domains.reserve(samples);
    for (int i = 0; i < samples; ++i) {
        const std::size_t d = rng.categorical(rho.weights(), 1.0);
        const auto& pool = corpora.train_pools()[d];
        if (pool.empty()) throw ExhaustedPool("empty train pool for domain " + corpora.space().at(d).name);
        batch.sequences.push_back(pool[rng.below(pool.size())]);
        batch.domains.push_back(d);
    }
    return batch;
}

}  // namespace mixagent::env
