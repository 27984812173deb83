#pragma once

#include <cstdint>
#include <vector>

#include "crossrec/events.hpp"

namespace crossrec {

// Planted-preference stream generator. Each user holds a latent topic with a
// small set of preferred items inside that topic's pool; source documents
// are drawn from planted per-topic word lists. With drift enabled the
// preference (topic and items) switches once at drift_fraction of the time
// span. Fully deterministic per seed.
struct SynthConfig {
  int users = 200;
  int items = 50;
  int topics = 5;
  int events_per_user = 20;   // target events
  int support_size = 3;       // preferred items per user
  bool drift = false;
  double drift_fraction = 0.5;
  int docs_per_window_min = 1;
  int docs_per_window_max = 3;
  int tokens_per_doc = 8;
  int words_per_topic = 20;
  double token_noise = 0.05;
  std::int64_t start_time = 1'500'000'000;
  std::int64_t mean_gap = 86'400;  // seconds between a user's target events
  std::uint64_t seed = 1;
};

std::vector<InteractionEvent> generate_synthetic(const SynthConfig& config);

// Time at which drifting users switch preference.
std::int64_t synth_drift_time(const SynthConfig& config);

// Topic of an item under the planted assignment (item index mod topics).
int synth_item_topic(const SynthConfig& config, int item_index);

}  // namespace crossrec
