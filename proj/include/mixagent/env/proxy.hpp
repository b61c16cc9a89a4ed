#pragma once

#include <string>

#include "mixagent/env/corpus.hpp"
#include "mixagent/nn/params.hpp"

namespace mixagent::env {

using core::FeedbackVector;

// One per-field evaluation set of (prompt, response) pairs.
struct EvalPair {
    TokenSeq prompt;
    TokenSeq response;
};

struct EvalField {
    std::string name;
    std::vector<EvalPair> pairs;
};

using EvalSets = std::vector<EvalField>;

// Default two-field environment: a "general" field drawn from source-domain
// held-out pools and a "target" field from target-domain pools. Prompt is
// the first half of each held-out sequence, response the rest.
EvalSets build_eval_sets(const DomainCorpora& corpora, int pairs_per_field, std::uint64_t seed);

struct ProxyConfig {
    int vocab = 64;
    int embed_dim = 16;
    int hidden_dim = 32;
    double lr = 1.0;
    std::uint64_t seed = 1;
};

// Small neural next-token predictor: token embedding, one tanh hidden layer,
// softmax over the vocabulary. The output layer starts at zero so the
// initial predictor is exactly uniform (score = -ln V).
class ProxyLearner {
  public:
    explicit ProxyLearner(const ProxyConfig& cfg);

    const ProxyConfig& config() const { return cfg_; }
    const nn::NetworkParams& params() const { return params_; }
    nn::NetworkParams& mutable_params() { return params_; }  // perturbation hook for numeric checks
    long steps() const { return steps_; }

    // One SGD pass of mean next-token cross-entropy over the batch.
    double train_step(const TokenBatch& batch);

    // log P(token | prev) for a single prediction.
    double log_prob(int prev_token, int token) const;

  private:
    ProxyConfig cfg_;
    nn::NetworkParams params_;
    long steps_ = 0;
};

// Eq.-style scores: mean over pairs of length-normalized response log-prob.
double score(const ProxyLearner& learner, const EvalField& field);
FeedbackVector feedback(const ProxyLearner& learner, const EvalSets& eval_sets);

enum class StandardizeMode { CorpusWide, RunningList };

// Per-field z-scoring with population std; std < 1e-12 falls back to 1 so a
// single-element history standardizes to zero.
std::vector<FeedbackVector> standardize_feedback(const std::vector<FeedbackVector>& history, StandardizeMode mode);

// In-place corpus-wide standardization: one mean/std per field pooled over
// every checkpoint of every trajectory.
void standardize_corpus(std::vector<core::TrajectoryRecord>& corpus);

struct CollectConfig {
    int samples_per_step = 256;  // R for proxy rollouts
    std::uint64_t proxy_seed = 1;
    int workers = 1;
};

// Per trajectory: fresh learner, start-state feedback from the untrained
// model, then sample_batch -> train_step -> feedback per action. Raw scores;
// standardization is applied downstream. Parallel and serial runs match.
std::vector<core::TrajectoryRecord> collect_feedback(const std::vector<core::TrajectoryRecord>& trajectories,
                                                     const DomainCorpora& corpora, const EvalSets& eval_sets,
                                                     const CollectConfig& cfg);

}  // namespace mixagent::env
