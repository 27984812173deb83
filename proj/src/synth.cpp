#include "crossrec/synth.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace crossrec {

namespace {

std::string item_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "item%03d", i);
  return buf;
}

std::string user_name(int u) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "u%03d", u);
  return buf;
}

std::string word_name(int topic, int w) {
  return "t" + std::to_string(topic) + "w" + std::to_string(w);
}

struct Preference {
  int topic = 0;
  std::vector<int> support;       // item indices
  std::vector<double> weights;    // cumulative
};

Preference make_preference(const SynthConfig& cfg, int topic,
                           std::mt19937_64& rng) {
  Preference p;
  p.topic = topic;
  std::vector<int> pool;
  for (int i = 0; i < cfg.items; ++i)
    if (i % cfg.topics == topic) pool.push_back(i);
  std::shuffle(pool.begin(), pool.end(), rng);
  const int n = std::min<int>(cfg.support_size, static_cast<int>(pool.size()));
  p.support.assign(pool.begin(), pool.begin() + n);
  // geometric-ish weights, cumulative for sampling
  double total = 0, w = 1.0;
  std::vector<double> raw;
  for (int i = 0; i < n; ++i, w *= 0.45) {
    raw.push_back(w);
    total += w;
  }
  double cum = 0;
  for (double r : raw) {
    cum += r / total;
    p.weights.push_back(cum);
  }
  return p;
}

int sample_item(const Preference& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  for (std::size_t i = 0; i < p.weights.size(); ++i)
    if (u <= p.weights[i]) return p.support[i];
  return p.support.back();
}

}  // namespace

std::int64_t synth_drift_time(const SynthConfig& cfg) {
  return cfg.start_time + static_cast<std::int64_t>(
                              cfg.drift_fraction * cfg.events_per_user *
                              cfg.mean_gap);
}

int synth_item_topic(const SynthConfig& cfg, int item_index) {
  return item_index % cfg.topics;
}

std::vector<InteractionEvent> generate_synthetic(const SynthConfig& cfg) {
  if (cfg.users < 1 || cfg.items < 1 || cfg.topics < 1 ||
      cfg.events_per_user < 1 || cfg.topics > cfg.items)
    throw std::invalid_argument("invalid synthetic config");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> any_topic(0, cfg.topics - 1);
  std::uniform_int_distribution<int> any_word(0, cfg.words_per_topic - 1);
  std::uniform_int_distribution<int> docs_dist(cfg.docs_per_window_min,
                                               cfg.docs_per_window_max);
  const std::int64_t drift_at = synth_drift_time(cfg);

  std::vector<InteractionEvent> events;

  for (int u = 0; u < cfg.users; ++u) {
    const std::string uid = user_name(u);
    const int base_topic = any_topic(rng);
    Preference pref = make_preference(cfg, base_topic, rng);
    // Post-drift preference decided up front so the rng stream stays aligned.
    int drift_topic = (base_topic + 1 + any_topic(rng)) % cfg.topics;
    if (drift_topic == base_topic) drift_topic = (base_topic + 1) % cfg.topics;
    Preference drifted = make_preference(cfg, drift_topic, rng);
    bool has_drifted = false;

    std::int64_t t = cfg.start_time +
                     static_cast<std::int64_t>(unit(rng) * cfg.mean_gap);
    std::int64_t prev = t;
    for (int e = 0; e < cfg.events_per_user; ++e) {
      if (cfg.drift && !has_drifted && t >= drift_at) {
        pref = drifted;
        has_drifted = true;
      }

      // source documents in the window before this target event
      const int n_docs = docs_dist(rng);
      for (int dnum = 0; dnum < n_docs; ++dnum) {
        InteractionEvent doc;
        doc.user_id = uid;
        doc.network = unit(rng) < 0.5 ? Network::SourceA : Network::SourceB;
        const std::int64_t span = std::max<std::int64_t>(t - prev, 1);
        doc.timestamp = t - static_cast<std::int64_t>(unit(rng) * span);
        if (doc.timestamp <= prev) doc.timestamp = prev + 1;
        if (doc.timestamp > t) doc.timestamp = t;
        for (int w = 0; w < cfg.tokens_per_doc; ++w) {
          const int topic =
              unit(rng) < cfg.token_noise ? any_topic(rng) : pref.topic;
          doc.tokens.push_back(word_name(topic, any_word(rng)));
        }
        events.push_back(std::move(doc));
      }

      InteractionEvent target;
      target.user_id = uid;
      target.network = Network::Target;
      target.timestamp = t;
      target.item_id = item_name(sample_item(pref, rng));
      events.push_back(std::move(target));

      prev = t;
      t += static_cast<std::int64_t>(cfg.mean_gap * (0.5 + unit(rng)));
    }
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const InteractionEvent& a, const InteractionEvent& b) {
                     if (a.timestamp != b.timestamp)
                       return a.timestamp < b.timestamp;
                     return a.user_id < b.user_id;
                   });
  return events;
}

}  // namespace crossrec
