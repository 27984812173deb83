#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crossrec/events.hpp"
#include "crossrec/model.hpp"
#include "crossrec/topics.hpp"
#include "crossrec/train.hpp"

namespace crossrec {

struct OnlinePolicy {
  int max_iters = 2;        // 0 disables updates (pure evaluation)
  int top_k_size = 100;
  std::size_t history_cap = 0;
};

struct EventResult {
  std::int64_t timestamp = 0;
  std::string user_id;
  std::vector<int> ranked;
  int observed = -1;
  int rank_of_observed = -1;  // -1 = miss
  double hr = 0.0;
  double ndcg = 0.0;
  double prob_before = 0.0;  // y hat of the observed item before the update
  double prob_after = 0.0;   // and after (equal when updates are disabled)
};

// Streaming predict-then-update loop. Single-writer: the event loop owns all
// mutable state. Source events are buffered per user; each target event is
// scored before its item is revealed, then parameters are refreshed with a
// bounded number of optimization iterations.
class OnlineSession {
 public:
  OnlineSession(ParameterSet params, AdamState opt, double tau,
                TopicModel topics, std::vector<std::string> item_catalog,
                std::vector<std::string> user_catalog, OnlinePolicy policy);

  // Seeds a user's recurrent state (normally the state reached at the end of
  // the offline forward pass) and the time of their last target event.
  void set_user_state(const std::string& user_id, UserRecurrentState state,
                      std::int64_t last_target_time);

  // Source event: buffered, returns nothing. Target event: prediction,
  // metrics, incremental update. Unknown items/users are skipped with a
  // warning record; an event older than the clock throws.
  std::optional<EventResult> process_event(const InteractionEvent& event);

  void snapshot(const std::string& path) const;
  static OnlineSession restore(const std::string& path);

  const ParameterSet& parameters() const { return params_; }
  const AdamState& optimizer() const { return opt_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::vector<std::string>& item_catalog() const { return items_; }
  double tau() const { return tau_; }
  const OnlinePolicy& policy() const { return policy_; }
  void set_max_iters(int n) { policy_.max_iters = n; }

 private:
  // Up to max_iters single-step descent iterations on the observed item's
  // loss; recurrent state and attention history are treated as constants.
  // Guarantees prob_after >= prob_before - 1e-9 (rolls back and line-searches
  // a plain gradient step if the Adam step overshoots).
  double incremental_update(const std::string& user_id, UserRecurrentState& state,
                            const StepInput& in, int observed);

  ParameterSet params_;
  AdamState opt_;
  double tau_ = 1.0;
  TopicModel topics_;
  std::vector<std::string> items_;
  std::map<std::string, int> item_index_;
  std::vector<std::string> users_;
  std::map<std::string, int> user_index_;
  OnlinePolicy policy_;

  std::map<std::string, UserRecurrentState> states_;
  std::map<std::string, std::vector<InteractionEvent>> buffers_;
  std::map<std::string, std::int64_t> last_target_;
  std::int64_t clock_ = std::numeric_limits<std::int64_t>::min();
  std::vector<std::string> warnings_;
};

void write_event_csv(const std::string& path, const std::vector<EventResult>& results);

}  // namespace crossrec
