#include "crossrec/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace crossrec {

std::vector<std::vector<std::string>> training_corpus(const DatasetSplit& split) {
  std::vector<const InteractionEvent*> docs;
  for (const auto& [uid, evs] : split.train)
    for (const auto& ev : evs)
      if (ev.is_source()) docs.push_back(&ev);
  std::sort(docs.begin(), docs.end(),
            [](const InteractionEvent* a, const InteractionEvent* b) {
              if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
              return a->user_id < b->user_id;
            });
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(docs.size());
  for (const auto* d : docs) corpus.push_back(d->tokens);
  return corpus;
}

namespace {

// Target events of one user with the source events since the previous
// target folded into per-step contexts.
template <typename ContextFn>
void build_user_part(const std::vector<InteractionEvent>& events,
                     const std::map<std::string, int>& item_index,
                     ContextFn&& make_context, std::int64_t& prev_target,
                     bool& first_step, std::vector<StepInput>& inputs,
                     std::vector<int>& targets,
                     std::vector<InteractionEvent>& pending) {
  for (const auto& ev : events) {
    if (ev.is_source()) {
      pending.push_back(ev);
      continue;
    }
    StepInput in;
    in.delta_t = first_step ? -1.0
                            : static_cast<double>(ev.timestamp - prev_target);
    in.timestamp = static_cast<double>(ev.timestamp);
    in.x = make_context(ev, pending, prev_target, first_step);
    inputs.push_back(std::move(in));
    targets.push_back(item_index.at(ev.item_id));
    pending.clear();
    prev_target = ev.timestamp;
    first_step = false;
  }
}

template <typename ContextFn>
std::vector<UserSequence> build_all(const DatasetSplit& split,
                                    ContextFn&& make_context) {
  std::vector<UserSequence> out;
  int user_index = 0;
  for (const auto& [uid, train_events] : split.train) {
    UserSequence seq;
    seq.user_id = uid;
    seq.user_index = user_index++;

    std::int64_t prev_target = 0;
    bool first_step = true;
    std::vector<InteractionEvent> pending;
    auto ctx = [&](const InteractionEvent& ev,
                   const std::vector<InteractionEvent>& window,
                   std::int64_t prev, bool first) {
      return make_context(uid, ev, window, prev, first);
    };
    build_user_part(train_events, split.item_index, ctx, prev_target,
                    first_step, seq.train_in, seq.train_targets, pending);
    auto vit = split.validation.find(uid);
    if (vit != split.validation.end())
      build_user_part(vit->second, split.item_index, ctx, prev_target,
                      first_step, seq.val_in, seq.val_targets, pending);
    auto tit = split.test.find(uid);
    if (tit != split.test.end())
      build_user_part(tit->second, split.item_index, ctx, prev_target,
                      first_step, seq.test_in, seq.test_targets, pending);
    for (std::size_t i = 0; i < seq.train_in.size(); ++i)
      seq.train_in[i].user = seq.user_index;
    for (std::size_t i = 0; i < seq.val_in.size(); ++i)
      seq.val_in[i].user = seq.user_index;
    for (std::size_t i = 0; i < seq.test_in.size(); ++i)
      seq.test_in[i].user = seq.user_index;
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace

std::vector<UserSequence> build_sequences(const DatasetSplit& split,
                                          const TopicModel& topics) {
  return build_all(split, [&](const std::string& uid, const InteractionEvent& ev,
                              const std::vector<InteractionEvent>& window,
                              std::int64_t prev, bool first) {
    const std::int64_t start =
        first ? std::numeric_limits<std::int64_t>::min() : prev;
    return window_aggregate(window, topics, uid, start, ev.timestamp,
                            first ? -1.0
                                  : static_cast<double>(ev.timestamp - prev))
        .x;
  });
}

std::vector<UserSequence> build_sequences(const DatasetSplit& split,
                                          const PrecomputedContexts& contexts) {
  return build_all(split, [&](const std::string& uid, const InteractionEvent& ev,
                              const std::vector<InteractionEvent>&, std::int64_t,
                              bool) -> Eigen::VectorXd {
    auto it = contexts.by_step.find({uid, ev.timestamp});
    if (it == contexts.by_step.end())
      throw std::runtime_error("no precomputed context for user " + uid +
                               " at " + std::to_string(ev.timestamp));
    return it->second.x;
  });
}

std::vector<Eigen::VectorXd> item_topic_features(
    const std::vector<UserSequence>& sequences, int context_dim, int items) {
  std::vector<Eigen::VectorXd> features(items,
                                        Eigen::VectorXd::Zero(context_dim));
  std::vector<long> counts(items, 0);
  for (const auto& seq : sequences)
    for (std::size_t i = 0; i < seq.train_in.size(); ++i) {
      features[seq.train_targets[i]] += seq.train_in[i].x;
      counts[seq.train_targets[i]] += 1;
    }
  for (int i = 0; i < items; ++i)
    if (counts[i] > 0) features[i] /= static_cast<double>(counts[i]);
  return features;
}

std::vector<std::int64_t> item_popularity(const DatasetSplit& split) {
  std::vector<std::int64_t> counts(split.item_catalog.size(), 0);
  for (const auto& [uid, evs] : split.train)
    for (const auto& ev : evs)
      if (!ev.is_source()) counts[split.item_index.at(ev.item_id)] += 1;
  return counts;
}

StreamOutcome run_stream(const DatasetSplit& split, const TopicModel& topics,
                         const std::vector<UserSequence>& sequences,
                         const ParameterSet& params, const AdamState& opt,
                         double tau, StreamIterator::Part part,
                         const OnlinePolicy& policy,
                         OnlineSession* session_out) {
  OnlineSession session(params, opt, tau, topics, split.item_catalog,
                        [&] {
                          std::vector<std::string> ids;
                          for (const auto& s : sequences) ids.push_back(s.user_id);
                          return ids;
                        }(),
                        policy);

  // Seed user states by replaying the offline part against the frozen
  // parameters (no updates).
  for (const auto& seq : sequences) {
    UserRecurrentState st = UserRecurrentState::cold(params.dims().hidden,
                                                     policy.history_cap);
    forward_sequence(params, st, seq.train_in, seq.train_targets, tau);
    double last_time = seq.train_in.empty() ? 0.0 : seq.train_in.back().timestamp;
    if (part == StreamIterator::Part::Test) {
      forward_sequence(params, st, seq.val_in, seq.val_targets, tau);
      if (!seq.val_in.empty()) last_time = seq.val_in.back().timestamp;
    }
    if (!seq.train_in.empty())
      session.set_user_state(seq.user_id, std::move(st),
                             static_cast<std::int64_t>(last_time));
  }

  StreamOutcome outcome;
  StreamIterator stream(split, part);
  while (const InteractionEvent* ev = stream.next()) {
    auto result = session.process_event(*ev);
    if (result) outcome.events.push_back(std::move(*result));
  }
  outcome.warnings = session.warnings();
  if (session_out) *session_out = std::move(session);
  return outcome;
}

EvalScore timepop_baseline(const DatasetSplit& split, StreamIterator::Part part,
                           int top_k_size) {
  TimePop pop(static_cast<int>(split.item_catalog.size()));
  for (const auto& [uid, evs] : split.train)
    for (const auto& ev : evs)
      if (!ev.is_source())
        pop.observe(ev.timestamp, split.item_index.at(ev.item_id));
  if (part == StreamIterator::Part::Test)
    for (const auto& [uid, evs] : split.validation)
      for (const auto& ev : evs)
        if (!ev.is_source())
          pop.observe(ev.timestamp, split.item_index.at(ev.item_id));

  MetricAccumulator acc;
  StreamIterator stream(split, part);
  while (const InteractionEvent* ev = stream.next()) {
    if (ev->is_source()) continue;
    auto iit = split.item_index.find(ev->item_id);
    if (iit == split.item_index.end()) continue;
    const std::vector<int> ranked = pop.recommend(ev->timestamp, top_k_size);
    int rank = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i)
      if (ranked[i] == iit->second) {
        rank = static_cast<int>(i) + 1;
        break;
      }
    acc.add_event(ev->user_id, rank > 0 ? 1.0 : 0.0,
                  rank > 0 ? 1.0 / std::log2(rank + 1.0) : 0.0, 0.0, 0.0);
    pop.observe(ev->timestamp, iit->second);
  }
  const MetricReport r = acc.report("TimePop", 0);
  return {r.hr, r.ndcg, r.users};
}

StreamSummary summarize(const std::vector<EventResult>& events,
                        const std::vector<Eigen::VectorXd>& item_features,
                        const std::vector<std::int64_t>& popularity,
                        const std::string& variant, std::uint64_t seed,
                        int num_windows, int min_eval_targets) {
  std::map<std::string, int> per_user;
  for (const auto& ev : events) per_user[ev.user_id] += 1;

  MetricAccumulator total;
  std::vector<MetricAccumulator> windows(std::max(num_windows, 1));
  const std::size_t n = events.size();
  for (std::size_t i = 0; i < n; ++i) {
    const EventResult& ev = events[i];
    if (per_user[ev.user_id] < min_eval_targets) continue;
    const double div = ev.ranked.size() >= 2
                           ? diversity(ev.ranked, item_features)
                           : 0.0;
    const double nov = novelty(ev.ranked, popularity);
    total.add_event(ev.user_id, ev.hr, ev.ndcg, div, nov);
    const std::size_t w =
        std::min<std::size_t>(i * windows.size() / std::max<std::size_t>(n, 1),
                              windows.size() - 1);
    windows[w].add_event(ev.user_id, ev.hr, ev.ndcg, div, nov);
  }

  StreamSummary summary;
  summary.cumulative = total.report(variant, seed);
  for (const auto& w : windows) summary.windows.push_back(w.report(variant, seed));
  return summary;
}

void write_metric_csv(const std::string& path,
                      const std::vector<MetricReport>& windows,
                      const MetricReport& cumulative) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metric csv: " + path);
  out.precision(17);
  out << "variant,window,hr,ndcg,diversity,novelty,n_events\n";
  for (std::size_t i = 0; i < windows.size(); ++i)
    out << windows[i].variant << ',' << i << ',' << windows[i].hr << ','
        << windows[i].ndcg << ',' << windows[i].diversity << ','
        << windows[i].novelty << ',' << windows[i].events << '\n';
  out << cumulative.variant << ",all," << cumulative.hr << ','
      << cumulative.ndcg << ',' << cumulative.diversity << ','
      << cumulative.novelty << ',' << cumulative.events << '\n';
}

void write_trail_csv(const std::string& path, const std::string& variant,
                     const std::vector<EventResult>& events) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trail csv: " + path);
  out.precision(17);
  out << "variant,index,hr_cum,ndcg_cum\n";
  double hr = 0, nd = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    hr += events[i].hr;
    nd += events[i].ndcg;
    out << variant << ',' << i << ',' << hr / (i + 1) << ',' << nd / (i + 1)
        << '\n';
  }
}

}  // namespace crossrec
