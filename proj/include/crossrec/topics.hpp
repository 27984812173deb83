#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "crossrec/events.hpp"

namespace crossrec {

// LDA over short documents with one topic sampled per document (collapsed
// Gibbs). Topic-word rows are valid distributions after fitting.
struct TopicModel {
  int num_topics = 0;
  std::map<std::string, int> vocabulary;    // token -> column index
  Eigen::MatrixXd topic_word;               // num_topics x V, rows sum to 1
  double alpha_doc = 0.0;
  double beta_word = 0.0;
};

// Per-step context for one user: topic mass aggregated over the source
// events in the window (prev_t, t], concatenated as x = (x_a | x_b).
struct TopicContext {
  std::string user_id;
  std::int64_t step_time = 0;
  std::int64_t window_start = 0;
  Eigen::VectorXd x;        // length 2*K^t, non-negative
  double delta_t = 0.0;     // seconds since previous target event; < 0 on a
                            // user's first step (no previous event)
};

// Deterministic given the seed. alpha_doc <= 0 selects 50/K, beta_word <= 0
// selects 0.01.
TopicModel fit_lda(const std::vector<std::vector<std::string>>& corpus,
                   int num_topics, double alpha_doc, double beta_word,
                   int iterations, std::uint64_t seed);

// Point-estimate fold-in with a uniform document prior; OOV tokens are
// dropped, an all-OOV document maps to the uniform distribution.
Eigen::VectorXd infer_topics(const TopicModel& model,
                             const std::vector<std::string>& document);

// x_a[c] = sum of per-document topic mass over SourceA events in the window,
// likewise x_b. Events outside (window_start, step_time] are ignored.
TopicContext window_aggregate(const std::vector<InteractionEvent>& user_events,
                              const TopicModel& model,
                              const std::string& user_id,
                              std::int64_t window_start, std::int64_t step_time,
                              double delta_t);

// Precomputed contexts keyed by (user, step_time), as an alternative to the
// built-in sampler.
struct PrecomputedContexts {
  int context_dim = 0;  // 2*K^t
  std::map<std::pair<std::string, std::int64_t>, TopicContext> by_step;
};

PrecomputedContexts load_precomputed(const std::string& path);
void write_precomputed(const std::string& path, const PrecomputedContexts& ctxs);

}  // namespace crossrec
