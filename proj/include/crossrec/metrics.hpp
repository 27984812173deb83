#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace crossrec {

// HR@K = |list intersect gt| / |gt|. Streaming mode uses a singleton gt, so
// the value is 0 or 1. Throws on empty ground truth.
double hit_ratio(const std::vector<int>& ranked, const std::set<int>& ground_truth);

// Binary-relevance NDCG: DCG = sum (2^{r_i} - 1) / log2(i + 1) over ranks
// i = 1..K, normalized by the ideal ranking of min(|gt|, K) relevant items.
double ndcg(const std::vector<int>& ranked, const std::set<int>& ground_truth);

// Mean pairwise topical dissimilarity 1 - cos(f_i, f_j); zero-norm pairs
// contribute 1. Requires at least two list entries.
double diversity(const std::vector<int>& ranked,
                 const std::vector<Eigen::VectorXd>& item_features);

// Mean self-information -log2(count_i / N) under training popularity;
// unseen items are smoothed to count 1.
double novelty(const std::vector<int>& ranked,
               const std::vector<std::int64_t>& popularity);

// Daily-popularity baseline: top-K items of the completed previous UTC day,
// padded from all-time popularity; ties by ascending item index.
class TimePop {
 public:
  explicit TimePop(int num_items) : daily_(), alltime_(num_items, 0) {}

  void observe(std::int64_t timestamp, int item);
  std::vector<int> recommend(std::int64_t now, int k) const;

 private:
  std::map<std::int64_t, std::vector<std::int64_t>> daily_;  // day -> counts
  std::vector<std::int64_t> alltime_;
};

// Aggregated per-run metrics; accuracy metrics are averaged per user first,
// then across users.
struct MetricReport {
  std::string variant;
  std::uint64_t seed = 0;
  double hr = 0.0;
  double ndcg = 0.0;
  double diversity = 0.0;
  double novelty = 0.0;
  long events = 0;
  int users = 0;
};

class MetricAccumulator {
 public:
  void add_event(const std::string& user, double hr, double ndcg,
                 double diversity_value, double novelty_value);
  MetricReport report(const std::string& variant, std::uint64_t seed) const;
  long events() const { return events_; }

 private:
  struct UserAcc {
    double hr = 0, ndcg = 0, div = 0, nov = 0;
    long n = 0;
  };
  std::map<std::string, UserAcc> users_;
  long events_ = 0;
};

}  // namespace crossrec
