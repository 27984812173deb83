#pragma once

#include <string>
#include <vector>

#include "crossrec/events.hpp"
#include "crossrec/metrics.hpp"
#include "crossrec/model.hpp"
#include "crossrec/online.hpp"
#include "crossrec/topics.hpp"
#include "crossrec/train.hpp"

namespace crossrec {

// Every train-set source document, in (timestamp, user) order.
std::vector<std::vector<std::string>> training_corpus(const DatasetSplit& split);

// Per-user step sequences: each target event becomes one step whose context
// aggregates the user's source events since their previous target event.
// delta_t is negative on a user's first step.
std::vector<UserSequence> build_sequences(const DatasetSplit& split,
                                          const TopicModel& topics);
std::vector<UserSequence> build_sequences(const DatasetSplit& split,
                                          const PrecomputedContexts& contexts);

// Mean training-step context per item (the item feature used by the
// diversity metric); items never interacted with in train get zero vectors.
std::vector<Eigen::VectorXd> item_topic_features(
    const std::vector<UserSequence>& sequences, int context_dim, int items);

// Train-split interaction counts per item (novelty / TimePop padding base).
std::vector<std::int64_t> item_popularity(const DatasetSplit& split);

struct StreamOutcome {
  std::vector<EventResult> events;
  std::vector<std::string> warnings;
};

// The prequential run: seeds per-user states by forwarding through the
// offline part, then replays the chosen split part through an OnlineSession.
// Returns the session through *session_out when provided (snapshot tests).
StreamOutcome run_stream(const DatasetSplit& split, const TopicModel& topics,
                         const std::vector<UserSequence>& sequences,
                         const ParameterSet& params, const AdamState& opt,
                         double tau, StreamIterator::Part part,
                         const OnlinePolicy& policy,
                         OnlineSession* session_out = nullptr);

// HR@K / NDCG@K of the TimePop baseline over the same stream part, averaged
// per user then across users. Warm-started on the offline target events.
EvalScore timepop_baseline(const DatasetSplit& split, StreamIterator::Part part,
                           int top_k_size);

struct StreamSummary {
  MetricReport cumulative;
  std::vector<MetricReport> windows;
};

// Per-window and cumulative reports; users with fewer than min_eval_targets
// evaluated events are excluded from the averages.
StreamSummary summarize(const std::vector<EventResult>& events,
                        const std::vector<Eigen::VectorXd>& item_features,
                        const std::vector<std::int64_t>& popularity,
                        const std::string& variant, std::uint64_t seed,
                        int num_windows, int min_eval_targets = 2);

void write_metric_csv(const std::string& path,
                      const std::vector<MetricReport>& windows,
                      const MetricReport& cumulative);

// Long-format cumulative accuracy per test-interaction index.
void write_trail_csv(const std::string& path, const std::string& variant,
                     const std::vector<EventResult>& events);

}  // namespace crossrec
