#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace crossrec {

// Model variants used throughout training and evaluation.
//   Full  - complete model
//   NoHO  - no second-order interaction columns (first-order pooling only)
//   NoAt  - attention contribution forced to zero, no history bookkeeping
//   NoTIF - both time scalings forced to 1
//   CLSTM - plain LSTM fed with the raw context vector x^t
enum class Variant { Full, NoHO, NoAt, NoTIF, CLSTM };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct ModelDims {
  int topics = 60;   // K^t, per source network
  int embed = 100;   // k
  int hidden = 400;  // h
  int items = 0;     // I
  int users = 0;

  int context() const { return 2 * topics; }
  int input(Variant v) const { return v == Variant::CLSTM ? context() : embed; }
};

// Gate index order is part of the checkpoint layout.
enum GateId {
  kGateInput = 0,
  kGateForget,
  kGateOutput,
  kGateModulation,
  kGateAttnInput,
  kGateAttnModulation,
  kGateCount,
};

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::ptrdiff_t offset = 0;
  std::ptrdiff_t count() const { return std::ptrdiff_t{rows} * cols; }
};

// All learnable tensors in one flat buffer with named matrix views. The flat
// view gives every scalar a stable global index (used by Adam, checkpoints
// and the finite-difference check).
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ModelDims& dims, Variant variant);

  const ModelDims& dims() const { return dims_; }
  Variant variant() const { return variant_; }

  Eigen::VectorXd& flat() { return flat_; }
  const Eigen::VectorXd& flat() const { return flat_; }
  std::ptrdiff_t size() const { return flat_.size(); }

  Eigen::Map<Eigen::MatrixXd> gate_w(int gate);        // h x input
  Eigen::Map<Eigen::MatrixXd> gate_u(int gate);        // h x h
  Eigen::Map<Eigen::VectorXd> gate_b(int gate);        // h
  Eigen::Map<Eigen::MatrixXd> head_w();                // I x h
  Eigen::Map<Eigen::VectorXd> head_b();                // I
  Eigen::Map<Eigen::MatrixXd> topic_embed_a();         // k x K^t (column per topic)
  Eigen::Map<Eigen::MatrixXd> topic_embed_b();         // k x K^t
  Eigen::Map<Eigen::MatrixXd> user_embed();            // k x users

  Eigen::Map<const Eigen::MatrixXd> gate_w(int gate) const;
  Eigen::Map<const Eigen::MatrixXd> gate_u(int gate) const;
  Eigen::Map<const Eigen::VectorXd> gate_b(int gate) const;
  Eigen::Map<const Eigen::MatrixXd> head_w() const;
  Eigen::Map<const Eigen::VectorXd> head_b() const;
  Eigen::Map<const Eigen::MatrixXd> topic_embed_a() const;
  Eigen::Map<const Eigen::MatrixXd> topic_embed_b() const;
  Eigen::Map<const Eigen::MatrixXd> user_embed() const;

  bool has_embeddings() const { return variant_ != Variant::CLSTM; }

  const std::vector<TensorInfo>& tensors() const { return registry_; }
  const TensorInfo& tensor(const std::string& name) const;

  // W, U uniform in [-1/sqrt(h), +1/sqrt(h)], embeddings in
  // [-1/sqrt(k), +1/sqrt(k)], biases 0 except forget bias +1.
  void init_random(std::uint64_t seed);

  void set_zero() { flat_.setZero(); }

 private:
  ModelDims dims_;
  Variant variant_ = Variant::Full;
  Eigen::VectorXd flat_;
  std::vector<TensorInfo> registry_;
  std::map<std::string, int> by_name_;

  Eigen::Map<Eigen::MatrixXd> view(int idx);
  Eigen::Map<const Eigen::MatrixXd> view(int idx) const;
};

// Recurrent state owned by one stream consumer. History holds the
// (context, output) pairs of all completed steps, oldest first.
struct UserRecurrentState {
  Eigen::VectorXd cell;     // C
  Eigen::VectorXd out;      // h
  std::vector<Eigen::VectorXd> history_x;
  std::vector<Eigen::VectorXd> history_h;
  std::size_t history_cap = 0;  // 0 = unbounded

  static UserRecurrentState cold(int hidden, std::size_t cap = 0);
  void append_history(const Eigen::VectorXd& x, const Eigen::VectorXd& h);
};

// One forward step's retained activations; enough to replay the backward
// pass exactly.
struct StepTrace {
  Eigen::VectorXd x;             // raw context, 2K^t
  double delta_norm = 1.0;       // Delta t / tau after clamping
  double scale_in = 1.0;         // 1 - e^{-d}
  double scale_fg = 1.0;         // e^{-d}
  int user = -1;
  std::vector<std::pair<int, double>> active_a;  // nonzero SourceA topics
  std::vector<std::pair<int, double>> active_b;
  Eigen::VectorXd input;         // i^{Delta t} fed to the gates
  Eigen::VectorXd col_sum;       // first-order column sum S (for backward)
  Eigen::VectorXd alpha;         // attention weights over history
  Eigen::VectorXd h_attn;        // h_A
  Eigen::VectorXd h_prev, c_prev;
  Eigen::VectorXd sig_i, sig_f;  // sigmoid parts of the time-aware gates
  Eigen::VectorXd gate_o, cand;  // output gate, modulation tanh
  Eigen::VectorXd gate_ai, cand_a;
  Eigen::VectorXd c_new, h_new;
  Eigen::VectorXd dropout;       // per-unit keep scale; size 0 = eval mode
  Eigen::VectorXd logits;        // r
  Eigen::VectorXd probs;         // y hat
};

struct StepInput {
  Eigen::VectorXd x;      // context, 2K^t
  double delta_t = -1.0;  // seconds; < 0 = first step (neutral d = 1)
  int user = -1;
  double timestamp = 0.0;
};

// Softmax over cosine similarities between the current context and the
// history contexts. A zero-norm vector on either side contributes sim 0.
Eigen::VectorXd attention_scores(const Eigen::VectorXd& x_t,
                                 const std::vector<Eigen::VectorXd>& history_x);

Eigen::VectorXd attention_vector(const Eigen::VectorXd& alpha,
                                 const std::vector<Eigen::VectorXd>& history_h);

// Time scalings for normalized gap d: input (1 - e^{-d}), forget e^{-d}.
std::pair<double, double> time_scalings(double delta_t, double tau,
                                        double clamp_floor = 1.0);

// Full forward step against frozen parameters. Does not modify the state;
// call advance_state afterwards to commit. dropout (may be empty) is the
// per-unit keep-scale mask applied to h before the prediction head.
StepTrace step_forward(const ParameterSet& params, const UserRecurrentState& state,
                       const StepInput& in, double tau,
                       const Eigen::VectorXd& dropout = Eigen::VectorXd());

void advance_state(UserRecurrentState& state, const StepTrace& trace);

// Indices of the K largest probabilities, descending, ties by ascending index.
std::vector<int> top_k(const Eigen::VectorXd& probs, int k);

}  // namespace crossrec
