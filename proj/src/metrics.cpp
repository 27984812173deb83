#include "crossrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace crossrec {

double hit_ratio(const std::vector<int>& ranked, const std::set<int>& ground_truth) {
  if (ground_truth.empty()) throw std::invalid_argument("empty ground truth");
  long hits = 0;
  for (int item : ranked)
    if (ground_truth.count(item)) ++hits;
  return static_cast<double>(hits) / ground_truth.size();
}

double ndcg(const std::vector<int>& ranked, const std::set<int>& ground_truth) {
  if (ground_truth.empty()) throw std::invalid_argument("empty ground truth");
  const std::size_t k = ranked.size();
  double dcg = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    if (ground_truth.count(ranked[i]))
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);  // (2^1-1)=1
  const std::size_t relevant = std::min(ground_truth.size(), k);
  double idcg = 0.0;
  for (std::size_t i = 0; i < relevant; ++i)
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

double diversity(const std::vector<int>& ranked,
                 const std::vector<Eigen::VectorXd>& item_features) {
  if (ranked.size() < 2)
    throw std::invalid_argument("diversity needs at least two items");
  double total = 0.0;
  long pairs = 0;
  for (std::size_t a = 0; a < ranked.size(); ++a) {
    for (std::size_t b = a + 1; b < ranked.size(); ++b) {
      const Eigen::VectorXd& fa = item_features.at(ranked[a]);
      const Eigen::VectorXd& fb = item_features.at(ranked[b]);
      const double na = fa.norm(), nb = fb.norm();
      const double cos = (na > 0 && nb > 0) ? fa.dot(fb) / (na * nb) : 0.0;
      total += 1.0 - cos;
      ++pairs;
    }
  }
  return total / pairs;
}

double novelty(const std::vector<int>& ranked,
               const std::vector<std::int64_t>& popularity) {
  const double total = std::max<std::int64_t>(
      std::accumulate(popularity.begin(), popularity.end(), std::int64_t{0}), 1);
  double sum = 0.0;
  for (int item : ranked) {
    const std::int64_t count = std::max<std::int64_t>(popularity.at(item), 1);
    sum += -std::log2(count / total);
  }
  return ranked.empty() ? 0.0 : sum / ranked.size();
}

namespace {
constexpr std::int64_t kSecondsPerDay = 86400;
}

void TimePop::observe(std::int64_t timestamp, int item) {
  const std::int64_t day = timestamp / kSecondsPerDay;
  auto& counts = daily_[day];
  if (counts.empty()) counts.assign(alltime_.size(), 0);
  counts[item] += 1;
  alltime_[item] += 1;
}

std::vector<int> TimePop::recommend(std::int64_t now, int k) const {
  const std::int64_t yesterday = now / kSecondsPerDay - 1;
  const int n = static_cast<int>(alltime_.size());
  k = std::min(k, n);

  auto ranked_by = [n](const std::vector<std::int64_t>& counts) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      if (counts[a] != counts[b]) return counts[a] > counts[b];
      return a < b;
    });
    return idx;
  };

  std::vector<int> out;
  std::vector<bool> used(n, false);
  auto day_it = daily_.find(yesterday);
  if (day_it != daily_.end()) {
    for (int item : ranked_by(day_it->second)) {
      if (day_it->second[item] <= 0) break;
      out.push_back(item);
      used[item] = true;
      if (static_cast<int>(out.size()) == k) return out;
    }
  }
  for (int item : ranked_by(alltime_)) {
    if (used[item]) continue;
    out.push_back(item);
    if (static_cast<int>(out.size()) == k) break;
  }
  return out;
}

void MetricAccumulator::add_event(const std::string& user, double hr,
                                  double ndcg_value, double diversity_value,
                                  double novelty_value) {
  UserAcc& acc = users_[user];
  acc.hr += hr;
  acc.ndcg += ndcg_value;
  acc.div += diversity_value;
  acc.nov += novelty_value;
  acc.n += 1;
  events_ += 1;
}

MetricReport MetricAccumulator::report(const std::string& variant,
                                       std::uint64_t seed) const {
  MetricReport r;
  r.variant = variant;
  r.seed = seed;
  r.events = events_;
  for (const auto& [_, acc] : users_) {
    if (acc.n == 0) continue;
    r.hr += acc.hr / acc.n;
    r.ndcg += acc.ndcg / acc.n;
    r.diversity += acc.div / acc.n;
    r.novelty += acc.nov / acc.n;
    r.users += 1;
  }
  if (r.users > 0) {
    r.hr /= r.users;
    r.ndcg /= r.users;
    r.diversity /= r.users;
    r.novelty /= r.users;
  }
  return r;
}

}  // namespace crossrec
