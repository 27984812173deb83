#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "crossrec/model.hpp"

namespace crossrec {

// Cross entropy over the full item vector: both the log(y hat)
// term for the observed item and the log(1 - y hat) terms for the rest.
// Probabilities are clamped to [1e-12, 1 - 1e-12].
double cross_entropy_loss(const Eigen::VectorXd& probs, int target);

// Inverted dropout: keep scale 1/(1-p), dropped units 0. p = 0 gives an
// all-ones mask.
Eigen::VectorXd make_dropout_mask(int size, double p, std::mt19937_64& rng);

struct AdamState {
  Eigen::VectorXd m, v;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState fresh(std::ptrdiff_t size, double lr = 1e-3);
};

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               AdamState& state);

// Adam restricted to half-open index ranges; untouched coordinates keep
// their moments. The step counter advances once per call.
using IndexRanges = std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>>;
void adam_step_ranges(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                      AdamState& state, const IndexRanges& ranges);

// Scales grads so the global L2 norm is at most max_norm (<= 0 disables).
void clip_global_norm(Eigen::VectorXd& grads, double max_norm);

// A completed forward pass over consecutive steps of one user.
// history_offset counts pre-existing history entries that are treated as
// constants by the backward pass (0 for a cold-start sequence; nonzero for
// truncated BPTT chunks and single-step online updates).
struct SequenceTape {
  std::vector<StepTrace> steps;
  std::vector<int> targets;
  int history_offset = 0;
};

// Forward over the inputs, advancing state in place. Per-step dropout masks
// are optional (train mode); eval mode passes nullptr.
SequenceTape forward_sequence(const ParameterSet& params,
                              UserRecurrentState& state,
                              const std::vector<StepInput>& inputs,
                              const std::vector<int>& targets, double tau,
                              const std::vector<Eigen::VectorXd>* dropout_masks
                              = nullptr);

double sequence_loss(const SequenceTape& tape);

// Exact reverse-mode gradients of the summed sequence loss, including the
// attention path into earlier steps' outputs and the pooled interaction
// layer into embeddings. Accumulates into grads (caller zeroes).
void backward(const ParameterSet& params, const SequenceTape& tape,
              ParameterSet& grads);

struct FdReport {
  double max_rel_err = 0.0;
  int checked = 0;
};

// Central finite differences on a random subset of parameters against the
// analytic gradient. corrupt_one doubles one nonzero analytic gradient
// entry first (the check must then fail loudly).
FdReport finite_difference_check(const ParameterSet& params,
                                 const std::vector<StepInput>& inputs,
                                 const std::vector<int>& targets, double tau,
                                 double eps = 3e-4, int max_params = 200,
                                 std::uint64_t seed = 0,
                                 bool corrupt_one = false);

// Index ranges covered by one user's update: every dense tensor plus that
// user's embedding column plus the given topic columns. For CLSTM (no
// embeddings) this is simply the whole parameter vector.
IndexRanges update_ranges(const ParameterSet& params, int user,
                          const std::vector<int>& topics_a,
                          const std::vector<int>& topics_b,
                          bool all_topics);

// Per-user step sequences assembled from a dataset split (see pipeline.hpp
// for construction).
struct UserSequence {
  std::string user_id;
  int user_index = -1;
  std::vector<StepInput> train_in, val_in, test_in;
  std::vector<int> train_targets, val_targets, test_targets;
};

struct TrainConfig {
  int epochs = 10;
  double lr = 1e-3;
  double dropout = 0.35;
  double tau = 0.0;        // <= 0: mean training inter-event gap
  double clip_norm = 5.0;  // <= 0 disables
  int val_top_k = 10;
  int truncate = 0;        // 0 = full backpropagation through time
  std::uint64_t seed = 1;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_hr = 0.0;
  double val_ndcg = 0.0;
};

struct TrainResult {
  ParameterSet params;  // best-validation snapshot
  AdamState opt;        // optimizer state after the last epoch
  std::vector<EpochLog> log;
  double tau = 0.0;
};

double mean_train_gap(const std::vector<UserSequence>& sequences);

// Epochs over users; one clipped Adam update per user sequence. Validation
// HR/NDCG per epoch; returns the best-validation parameters. Throws on a
// non-finite loss.
TrainResult train_offline(const ModelDims& dims, Variant variant,
                          const std::vector<UserSequence>& sequences,
                          const TrainConfig& config);

// HR@K / NDCG@K of the given split part, forwarding each user from a cold
// state through its train (and, for Part::Test, validation) steps first.
// Averaged per user, then across users.
struct EvalScore {
  double hr = 0.0;
  double ndcg = 0.0;
  int users = 0;
};
EvalScore evaluate_sequences(const ParameterSet& params,
                             const std::vector<UserSequence>& sequences,
                             double tau, int top_k_size, bool test_part);

}  // namespace crossrec
