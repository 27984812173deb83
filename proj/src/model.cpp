#include "crossrec/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "crossrec/interaction.hpp"

namespace crossrec {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "Full";
    case Variant::NoHO: return "NoHO";
    case Variant::NoAt: return "NoAt";
    case Variant::NoTIF: return "NoTIF";
    case Variant::CLSTM: return "CLSTM";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::Full, Variant::NoHO, Variant::NoAt, Variant::NoTIF,
                    Variant::CLSTM})
    if (name == variant_name(v)) return v;
  throw std::invalid_argument("unknown variant: " + name);
}

namespace {
const char* kGateNames[kGateCount] = {"i", "f", "o", "c", "iA", "cA"};
}

ParameterSet::ParameterSet(const ModelDims& dims, Variant variant)
    : dims_(dims), variant_(variant) {
  if (dims.hidden < 1 || dims.items < 1 || dims.topics < 1)
    throw std::invalid_argument("invalid model dimensions");
  const int in = dims.input(variant);
  const int h = dims.hidden;

  std::ptrdiff_t offset = 0;
  auto add = [&](const std::string& name, int rows, int cols) {
    registry_.push_back({name, rows, cols, offset});
    by_name_[name] = static_cast<int>(registry_.size()) - 1;
    offset += std::ptrdiff_t{rows} * cols;
  };

  for (int g = 0; g < kGateCount; ++g) {
    add(std::string("W_") + kGateNames[g], h, in);
    add(std::string("U_") + kGateNames[g], h, h);
    add(std::string("b_") + kGateNames[g], h, 1);
  }
  add("W_r", dims.items, h);
  add("b_r", dims.items, 1);
  if (variant != Variant::CLSTM) {
    add("topics_a", dims.embed, dims.topics);
    add("topics_b", dims.embed, dims.topics);
    add("users", dims.embed, std::max(dims.users, 1));
  }

  flat_ = Eigen::VectorXd::Zero(offset);
}

const TensorInfo& ParameterSet::tensor(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::out_of_range("no tensor: " + name);
  return registry_[it->second];
}

Eigen::Map<Eigen::MatrixXd> ParameterSet::view(int idx) {
  const TensorInfo& t = registry_[idx];
  return {flat_.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<const Eigen::MatrixXd> ParameterSet::view(int idx) const {
  const TensorInfo& t = registry_[idx];
  return {flat_.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<Eigen::MatrixXd> ParameterSet::gate_w(int g) { return view(3 * g); }
Eigen::Map<Eigen::MatrixXd> ParameterSet::gate_u(int g) { return view(3 * g + 1); }
Eigen::Map<Eigen::VectorXd> ParameterSet::gate_b(int g) {
  const TensorInfo& t = registry_[3 * g + 2];
  return {flat_.data() + t.offset, t.rows};
}
Eigen::Map<Eigen::MatrixXd> ParameterSet::head_w() { return view(3 * kGateCount); }
Eigen::Map<Eigen::VectorXd> ParameterSet::head_b() {
  const TensorInfo& t = registry_[3 * kGateCount + 1];
  return {flat_.data() + t.offset, t.rows};
}
Eigen::Map<Eigen::MatrixXd> ParameterSet::topic_embed_a() {
  return view(by_name_.at("topics_a"));
}
Eigen::Map<Eigen::MatrixXd> ParameterSet::topic_embed_b() {
  return view(by_name_.at("topics_b"));
}
Eigen::Map<Eigen::MatrixXd> ParameterSet::user_embed() {
  return view(by_name_.at("users"));
}

Eigen::Map<const Eigen::MatrixXd> ParameterSet::gate_w(int g) const { return view(3 * g); }
Eigen::Map<const Eigen::MatrixXd> ParameterSet::gate_u(int g) const { return view(3 * g + 1); }
Eigen::Map<const Eigen::VectorXd> ParameterSet::gate_b(int g) const {
  const TensorInfo& t = registry_[3 * g + 2];
  return {flat_.data() + t.offset, t.rows};
}
Eigen::Map<const Eigen::MatrixXd> ParameterSet::head_w() const { return view(3 * kGateCount); }
Eigen::Map<const Eigen::VectorXd> ParameterSet::head_b() const {
  const TensorInfo& t = registry_[3 * kGateCount + 1];
  return {flat_.data() + t.offset, t.rows};
}
Eigen::Map<const Eigen::MatrixXd> ParameterSet::topic_embed_a() const {
  return view(by_name_.at("topics_a"));
}
Eigen::Map<const Eigen::MatrixXd> ParameterSet::topic_embed_b() const {
  return view(by_name_.at("topics_b"));
}
Eigen::Map<const Eigen::MatrixXd> ParameterSet::user_embed() const {
  return view(by_name_.at("users"));
}

void ParameterSet::init_random(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double gate_scale = 1.0 / std::sqrt(static_cast<double>(dims_.hidden));
  const double embed_scale =
      1.0 / std::sqrt(static_cast<double>(std::max(dims_.embed, 1)));
  std::uniform_real_distribution<double> gate_dist(-gate_scale, gate_scale);
  std::uniform_real_distribution<double> embed_dist(-embed_scale, embed_scale);

  for (const TensorInfo& t : registry_) {
    double* data = flat_.data() + t.offset;
    if (t.name.rfind("b_", 0) == 0) {
      std::fill(data, data + t.count(), 0.0);
      if (t.name == "b_f") std::fill(data, data + t.count(), 1.0);
    } else if (t.name == "topics_a" || t.name == "topics_b" || t.name == "users") {
      for (std::ptrdiff_t i = 0; i < t.count(); ++i) data[i] = embed_dist(rng);
    } else {
      for (std::ptrdiff_t i = 0; i < t.count(); ++i) data[i] = gate_dist(rng);
    }
  }
}

UserRecurrentState UserRecurrentState::cold(int hidden, std::size_t cap) {
  UserRecurrentState st;
  st.cell = Eigen::VectorXd::Zero(hidden);
  st.out = Eigen::VectorXd::Zero(hidden);
  st.history_cap = cap;
  return st;
}

void UserRecurrentState::append_history(const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& h) {
  history_x.push_back(x);
  history_h.push_back(h);
  if (history_cap > 0 && history_x.size() > history_cap) {
    history_x.erase(history_x.begin());
    history_h.erase(history_h.begin());
  }
}

Eigen::VectorXd attention_scores(const Eigen::VectorXd& x_t,
                                 const std::vector<Eigen::VectorXd>& history_x) {
  const std::size_t n = history_x.size();
  Eigen::VectorXd sims(n);
  const double norm_t = x_t.norm();
  for (std::size_t i = 0; i < n; ++i) {
    const double norm_h = history_x[i].norm();
    sims[i] = (norm_t > 0 && norm_h > 0)
                  ? x_t.dot(history_x[i]) / (norm_t * norm_h)
                  : 0.0;
  }
  if (n == 0) return sims;
  const double m = sims.maxCoeff();
  Eigen::VectorXd alpha = (sims.array() - m).exp();
  alpha /= alpha.sum();
  return alpha;
}

Eigen::VectorXd attention_vector(const Eigen::VectorXd& alpha,
                                 const std::vector<Eigen::VectorXd>& history_h) {
  if (static_cast<std::size_t>(alpha.size()) != history_h.size())
    throw std::invalid_argument("attention weight / history length mismatch");
  if (history_h.empty()) return Eigen::VectorXd();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(history_h.front().size());
  for (std::size_t i = 0; i < history_h.size(); ++i)
    out += alpha[i] * history_h[i];
  return out;
}

std::pair<double, double> time_scalings(double delta_t, double tau,
                                        double clamp_floor) {
  if (tau <= 0) throw std::invalid_argument("tau must be positive");
  const double d =
      delta_t < 0 ? 1.0 : std::max(delta_t, clamp_floor) / tau;
  const double decay = std::exp(-d);
  return {1.0 - decay, decay};
}

namespace {

inline Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return (1.0 + (-z.array()).exp()).inverse();
}

}  // namespace

StepTrace step_forward(const ParameterSet& params, const UserRecurrentState& state,
                       const StepInput& in, double tau,
                       const Eigen::VectorXd& dropout) {
  const ModelDims& dims = params.dims();
  const Variant variant = params.variant();
  const int h = dims.hidden;

  StepTrace t;
  t.x = in.x;
  t.user = in.user;
  t.h_prev = state.out;
  t.c_prev = state.cell;

  if (variant == Variant::CLSTM) {
    t.input = in.x;
  } else {
    t.input = pooled_input(params, in.x, in.user, variant != Variant::NoHO,
                           t.col_sum, t.active_a, t.active_b);
  }

  const bool use_attention =
      variant != Variant::NoAt && variant != Variant::CLSTM;
  if (use_attention && !state.history_x.empty()) {
    t.alpha = attention_scores(in.x, state.history_x);
    t.h_attn = attention_vector(t.alpha, state.history_h);
  } else {
    t.h_attn = Eigen::VectorXd::Zero(h);
  }

  const bool use_time = variant != Variant::NoTIF && variant != Variant::CLSTM;
  if (use_time) {
    auto [si, sf] = time_scalings(in.delta_t, tau);
    t.delta_norm = in.delta_t < 0 ? 1.0 : std::max(in.delta_t, 1.0) / tau;
    t.scale_in = si;
    t.scale_fg = sf;
  }

  auto pre = [&](int gate, const Eigen::VectorXd& recur) -> Eigen::VectorXd {
    return params.gate_w(gate) * t.input + params.gate_u(gate) * recur +
           params.gate_b(gate);
  };

  t.sig_i = sigmoid(pre(kGateInput, t.h_prev));
  t.sig_f = sigmoid(pre(kGateForget, t.h_prev));
  t.gate_o = sigmoid(pre(kGateOutput, t.h_prev));
  t.cand = pre(kGateModulation, t.h_prev).array().tanh();

  // Empty history means no attention term at all (the empty sum), not
  // attention gates driven by a zero h_A; the first step must match NoAt.
  if (use_attention && !state.history_x.empty()) {
    t.gate_ai = sigmoid(pre(kGateAttnInput, t.h_attn));
    t.cand_a = pre(kGateAttnModulation, t.h_attn).array().tanh();
    t.c_new = t.scale_fg * t.sig_f.cwiseProduct(t.c_prev) +
              t.scale_in * t.sig_i.cwiseProduct(t.cand) +
              t.gate_ai.cwiseProduct(t.cand_a);
  } else {
    t.c_new = t.scale_fg * t.sig_f.cwiseProduct(t.c_prev) +
              t.scale_in * t.sig_i.cwiseProduct(t.cand);
  }
  t.h_new = t.gate_o.cwiseProduct(t.c_new.array().tanh().matrix());

  Eigen::VectorXd head_in = t.h_new;
  if (dropout.size() > 0) {
    if (dropout.size() != h)
      throw std::invalid_argument("dropout mask size mismatch");
    t.dropout = dropout;
    head_in = head_in.cwiseProduct(dropout);
  }
  t.logits = (params.head_w() * head_in + params.head_b()).array().tanh();
  const double m = t.logits.maxCoeff();
  t.probs = (t.logits.array() - m).exp();
  t.probs /= t.probs.sum();
  return t;
}

void advance_state(UserRecurrentState& state, const StepTrace& trace) {
  state.cell = trace.c_new;
  state.out = trace.h_new;
  state.append_history(trace.x, trace.h_new);
}

std::vector<int> top_k(const Eigen::VectorXd& probs, int k) {
  const int n = static_cast<int>(probs.size());
  if (k > n) throw std::invalid_argument("top_k: K exceeds item count");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return a < b;
  });
  idx.resize(k);
  return idx;
}

}  // namespace crossrec
