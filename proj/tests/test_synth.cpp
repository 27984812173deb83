#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "crossrec/synth.hpp"

using namespace crossrec;

namespace {

// Tokens look like "t<k>w<j>"; the planted topic is <k>.
int token_topic(const std::string& token) {
  return std::stoi(token.substr(1, token.find('w') - 1));
}

// (source topic, item topic) label pairs for target events at or after
// from_time: the source topic is the majority topic of the user's source
// documents since their previous target event.
std::vector<std::pair<int, int>> topic_pairs(
    const std::vector<InteractionEvent>& events, std::int64_t from_time) {
  std::map<std::string, std::map<int, int>> window;
  std::vector<std::pair<int, int>> pairs;
  for (const auto& ev : events) {
    if (ev.is_source()) {
      for (const auto& tok : ev.tokens) window[ev.user_id][token_topic(tok)]++;
      continue;
    }
    auto& counts = window[ev.user_id];
    if (!counts.empty() && ev.timestamp >= from_time) {
      int best = -1, best_n = -1;
      for (const auto& [topic, n] : counts)
        if (n > best_n) {
          best = topic;
          best_n = n;
        }
      pairs.push_back({best, std::stoi(ev.item_id.substr(4))});
    }
    counts.clear();
  }
  return pairs;
}

double label_mi(const std::vector<std::pair<int, int>>& pairs) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> px, py;
  for (const auto& p : pairs) {
    joint[p] += 1;
    px[p.first] += 1;
    py[p.second] += 1;
  }
  const double n = static_cast<double>(pairs.size());
  double mi = 0;
  for (const auto& [key, c] : joint)
    mi += (c / n) * std::log2((c / n) / ((px[key.first] / n) * (py[key.second] / n)));
  return mi;
}

}  // namespace

TEST_CASE("deterministic per seed") {
  SynthConfig cfg;
  cfg.users = 20;
  cfg.items = 15;
  cfg.events_per_user = 10;
  cfg.seed = 9;
  auto a = generate_synthetic(cfg);
  auto b = generate_synthetic(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].timestamp == b[i].timestamp);
    CHECK(a[i].user_id == b[i].user_id);
    CHECK(a[i].item_id == b[i].item_id);
    CHECK(a[i].tokens == b[i].tokens);
  }
  cfg.seed = 10;
  auto c = generate_synthetic(cfg);
  bool differs = a.size() != c.size();
  for (std::size_t i = 0; !differs && i < a.size(); ++i)
    differs = a[i].item_id != c[i].item_id || a[i].timestamp != c[i].timestamp;
  CHECK(differs);
}

TEST_CASE("events are sorted and well formed") {
  SynthConfig cfg;
  cfg.users = 10;
  cfg.seed = 4;
  auto evs = generate_synthetic(cfg);
  REQUIRE(!evs.empty());
  for (std::size_t i = 1; i < evs.size(); ++i)
    CHECK(evs[i - 1].timestamp <= evs[i].timestamp);
  int targets = 0;
  for (const auto& ev : evs) {
    if (ev.is_source()) {
      CHECK(!ev.tokens.empty());
    } else {
      CHECK(!ev.item_id.empty());
      ++targets;
    }
  }
  CHECK(targets == cfg.users * cfg.events_per_user);
}

TEST_CASE("single topic confines items to one pool") {
  SynthConfig cfg;
  cfg.users = 10;
  cfg.items = 12;
  cfg.topics = 1;
  cfg.seed = 2;
  auto evs = generate_synthetic(cfg);
  for (const auto& ev : evs)
    if (!ev.is_source())
      CHECK(synth_item_topic(cfg, std::stoi(ev.item_id.substr(4))) == 0);
}

TEST_CASE("per-user items stay within a small planted support") {
  SynthConfig cfg;
  cfg.users = 15;
  cfg.items = 30;
  cfg.support_size = 3;
  cfg.seed = 6;
  auto evs = generate_synthetic(cfg);
  std::map<std::string, std::set<std::string>> per_user;
  for (const auto& ev : evs)
    if (!ev.is_source()) per_user[ev.user_id].insert(ev.item_id);
  for (const auto& [uid, items] : per_user)
    CHECK(items.size() <= 3);
}

TEST_CASE("drift: post-drift target items track post-drift source topics") {
  SynthConfig cfg;
  cfg.users = 40;
  cfg.items = 20;
  cfg.topics = 4;
  cfg.events_per_user = 20;
  cfg.drift = true;
  cfg.seed = 11;
  auto evs = generate_synthetic(cfg);
  auto pairs = topic_pairs(evs, synth_drift_time(cfg));
  REQUIRE(pairs.size() > 100);
  const double mi = label_mi(pairs);

  // Control: break the pairing by shuffling the item labels.
  std::vector<std::pair<int, int>> shuffled = pairs;
  std::mt19937_64 rng(1);
  for (std::size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1].second, shuffled[rng() % i].second);
  const double mi_control = label_mi(shuffled);

  CHECK(mi > mi_control + 0.2);
}
