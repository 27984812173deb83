#include "crossrec/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "crossrec/metrics.hpp"

namespace crossrec {

namespace {
constexpr double kProbClamp = 1e-12;
}

double cross_entropy_loss(const Eigen::VectorXd& probs, int target) {
  if (target < 0 || target >= probs.size())
    throw std::out_of_range("loss target out of range");
  double loss = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
    loss -= (i == target) ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

Eigen::VectorXd make_dropout_mask(int size, double p, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout ratio must be in [0,1)");
  Eigen::VectorXd mask(size);
  if (p == 0.0) {
    mask.setOnes();
    return mask;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  for (int i = 0; i < size; ++i) mask[i] = unit(rng) < p ? 0.0 : keep_scale;
  return mask;
}

AdamState AdamState::fresh(std::ptrdiff_t size, double lr) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(size);
  s.v = Eigen::VectorXd::Zero(size);
  s.lr = lr;
  return s;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               AdamState& state) {
  adam_step_ranges(params, grads, state, {{0, params.size()}});
}

void adam_step_ranges(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                      AdamState& state, const IndexRanges& ranges) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam: size mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  for (const auto& [begin, end] : ranges) {
    for (std::ptrdiff_t i = begin; i < end; ++i) {
      state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
      state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
      const double m_hat = state.m[i] / bc1;
      const double v_hat = state.v[i] / bc2;
      params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

void clip_global_norm(Eigen::VectorXd& grads, double max_norm) {
  if (max_norm <= 0) return;
  const double norm = grads.norm();
  if (norm > max_norm) grads *= max_norm / norm;
}

SequenceTape forward_sequence(const ParameterSet& params,
                              UserRecurrentState& state,
                              const std::vector<StepInput>& inputs,
                              const std::vector<int>& targets, double tau,
                              const std::vector<Eigen::VectorXd>* dropout_masks) {
  if (!targets.empty() && targets.size() != inputs.size())
    throw std::invalid_argument("inputs/targets length mismatch");
  SequenceTape tape;
  tape.history_offset = static_cast<int>(state.history_x.size());
  tape.targets = targets;
  tape.steps.reserve(inputs.size());
  static const Eigen::VectorXd kNoMask;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    StepTrace t = step_forward(params, state, inputs[i], tau,
                               dropout_masks ? (*dropout_masks)[i] : kNoMask);
    advance_state(state, t);
    tape.steps.push_back(std::move(t));
  }
  return tape;
}

double sequence_loss(const SequenceTape& tape) {
  double total = 0.0;
  for (std::size_t i = 0; i < tape.steps.size(); ++i)
    total += cross_entropy_loss(tape.steps[i].probs, tape.targets[i]);
  return total;
}

namespace {

inline Eigen::VectorXd d_sigmoid(const Eigen::VectorXd& s) {
  return s.cwiseProduct(Eigen::VectorXd::Ones(s.size()) - s);
}

inline Eigen::VectorXd d_tanh_from_value(const Eigen::VectorXd& t) {
  return (1.0 - t.array().square()).matrix();
}

// Gradient of the per-step loss w.r.t. the new hidden output h^t, through
// dropout, the tanh prediction layer and the softmax + cross entropy.
// Accumulates head gradients.
Eigen::VectorXd prediction_backward(const ParameterSet& params,
                                    const StepTrace& t, int target,
                                    ParameterSet& grads) {
  const Eigen::VectorXd& y = t.probs;
  Eigen::VectorXd dL_dy(y.size());
  for (int i = 0; i < y.size(); ++i) {
    const double p = std::clamp(y[i], kProbClamp, 1.0 - kProbClamp);
    dL_dy[i] = (i == target) ? -1.0 / p : 1.0 / (1.0 - p);
  }
  // softmax backward
  const double inner = dL_dy.dot(y);
  Eigen::VectorXd d_r = y.cwiseProduct(dL_dy - Eigen::VectorXd::Constant(y.size(), inner));
  // tanh backward
  Eigen::VectorXd d_z = d_r.cwiseProduct(d_tanh_from_value(t.logits));

  Eigen::VectorXd head_in = t.h_new;
  if (t.dropout.size() > 0) head_in = head_in.cwiseProduct(t.dropout);

  grads.head_w() += d_z * head_in.transpose();
  grads.head_b() += d_z;
  Eigen::VectorXd d_h = params.head_w().transpose() * d_z;
  if (t.dropout.size() > 0) d_h = d_h.cwiseProduct(t.dropout);
  return d_h;
}

// Distributes the gradient of the pooled input over the embedding columns
// via d pool / d e_j = I + diag(S - e_j) (second order enabled) or I.
void input_backward(const ParameterSet& params, const StepTrace& t,
                    const Eigen::VectorXd& d_input, ParameterSet& grads) {
  const bool higher_order = params.variant() != Variant::NoHO;
  auto column_grad = [&](const Eigen::VectorXd& col) -> Eigen::VectorXd {
    if (!higher_order) return d_input;
    return d_input + d_input.cwiseProduct(t.col_sum - col);
  };
  for (const auto& [c, w] : t.active_a) {
    const Eigen::VectorXd col = w * params.topic_embed_a().col(c);
    grads.topic_embed_a().col(c) += w * column_grad(col);
  }
  for (const auto& [c, w] : t.active_b) {
    const Eigen::VectorXd col = w * params.topic_embed_b().col(c);
    grads.topic_embed_b().col(c) += w * column_grad(col);
  }
  const Eigen::VectorXd user_col = params.user_embed().col(t.user);
  grads.user_embed().col(t.user) += column_grad(user_col);
}

struct StepGrads {
  Eigen::VectorXd d_h_prev;
  Eigen::VectorXd d_c_prev;
  Eigen::VectorXd d_h_attn;  // empty when attention unused
};

// One step of the cell backward: d_h is the full gradient w.r.t. h^t,
// d_c_next the gradient flowing back through C^{t+1}.
StepGrads cell_backward(const ParameterSet& params, const StepTrace& t,
                        const Eigen::VectorXd& d_h,
                        const Eigen::VectorXd& d_c_next, ParameterSet& grads) {
  const Variant variant = params.variant();
  const bool use_attention =
      variant != Variant::NoAt && variant != Variant::CLSTM;

  const Eigen::VectorXd tanh_c = t.c_new.array().tanh();
  Eigen::VectorXd d_o = d_h.cwiseProduct(tanh_c).cwiseProduct(d_sigmoid(t.gate_o));
  Eigen::VectorXd d_c = d_c_next +
      d_h.cwiseProduct(t.gate_o).cwiseProduct(d_tanh_from_value(tanh_c));

  Eigen::VectorXd d_f = (t.scale_fg * d_c.cwiseProduct(t.c_prev))
                            .cwiseProduct(d_sigmoid(t.sig_f));
  Eigen::VectorXd d_i = (t.scale_in * d_c.cwiseProduct(t.cand))
                            .cwiseProduct(d_sigmoid(t.sig_i));
  Eigen::VectorXd d_cand = (t.scale_in * d_c.cwiseProduct(t.sig_i))
                               .cwiseProduct(d_tanh_from_value(t.cand));

  StepGrads out;
  out.d_c_prev = t.scale_fg * d_c.cwiseProduct(t.sig_f);
  out.d_h_prev = Eigen::VectorXd::Zero(d_h.size());
  Eigen::VectorXd d_input = Eigen::VectorXd::Zero(t.input.size());

  auto apply_gate = [&](int gate, const Eigen::VectorXd& delta,
                        const Eigen::VectorXd& recur,
                        Eigen::VectorXd& d_recur) {
    grads.gate_w(gate) += delta * t.input.transpose();
    grads.gate_u(gate) += delta * recur.transpose();
    grads.gate_b(gate) += delta;
    d_input += params.gate_w(gate).transpose() * delta;
    d_recur += params.gate_u(gate).transpose() * delta;
  };

  apply_gate(kGateInput, d_i, t.h_prev, out.d_h_prev);
  apply_gate(kGateForget, d_f, t.h_prev, out.d_h_prev);
  apply_gate(kGateOutput, d_o, t.h_prev, out.d_h_prev);
  apply_gate(kGateModulation, d_cand, t.h_prev, out.d_h_prev);

  if (use_attention && t.gate_ai.size() > 0) {  // empty on a cold first step
    Eigen::VectorXd d_ai = d_c.cwiseProduct(t.cand_a).cwiseProduct(d_sigmoid(t.gate_ai));
    Eigen::VectorXd d_ca = d_c.cwiseProduct(t.gate_ai).cwiseProduct(d_tanh_from_value(t.cand_a));
    out.d_h_attn = Eigen::VectorXd::Zero(d_h.size());
    apply_gate(kGateAttnInput, d_ai, t.h_attn, out.d_h_attn);
    apply_gate(kGateAttnModulation, d_ca, t.h_attn, out.d_h_attn);
  }

  if (variant != Variant::CLSTM) input_backward(params, t, d_input, grads);
  return out;
}

}  // namespace

void backward(const ParameterSet& params, const SequenceTape& tape,
              ParameterSet& grads) {
  if (tape.targets.size() != tape.steps.size())
    throw std::invalid_argument("tape/target length mismatch");
  const int T = static_cast<int>(tape.steps.size());
  if (T == 0) return;
  const int h = params.dims().hidden;

  // Gradients flowing into each in-tape step's output from later steps
  // (recurrent path and attention path).
  std::vector<Eigen::VectorXd> d_h_future(T, Eigen::VectorXd::Zero(h));
  Eigen::VectorXd d_c_next = Eigen::VectorXd::Zero(h);

  for (int t = T - 1; t >= 0; --t) {
    const StepTrace& trace = tape.steps[t];
    Eigen::VectorXd d_h =
        prediction_backward(params, trace, tape.targets[t], grads) +
        d_h_future[t];

    StepGrads sg = cell_backward(params, trace, d_h, d_c_next, grads);
    d_c_next = sg.d_c_prev;
    if (t > 0) d_h_future[t - 1] += sg.d_h_prev;

    // Attention reaches every earlier step whose output is in this step's
    // history; entries before history_offset are constants.
    if (sg.d_h_attn.size() > 0 && trace.alpha.size() > 0) {
      for (int j = 0; j < trace.alpha.size(); ++j) {
        const int step_idx = j - tape.history_offset;
        if (step_idx >= 0 && step_idx < t)
          d_h_future[step_idx] += trace.alpha[j] * sg.d_h_attn;
      }
    }
  }
}

FdReport finite_difference_check(const ParameterSet& params,
                                 const std::vector<StepInput>& inputs,
                                 const std::vector<int>& targets, double tau,
                                 double eps, int max_params,
                                 std::uint64_t seed, bool corrupt_one) {
  ParameterSet work = params;
  ParameterSet grads(params.dims(), params.variant());
  {
    UserRecurrentState st = UserRecurrentState::cold(params.dims().hidden);
    SequenceTape tape = forward_sequence(work, st, inputs, targets, tau);
    if (!std::isfinite(sequence_loss(tape)))
      throw std::runtime_error("non-finite loss in gradient check");
    backward(work, tape, grads);
  }

  std::mt19937_64 rng(seed);
  std::vector<std::ptrdiff_t> indices(work.size());
  std::iota(indices.begin(), indices.end(), 0);
  std::shuffle(indices.begin(), indices.end(), rng);
  const int n_check = std::min<std::ptrdiff_t>(max_params, work.size());
  indices.resize(n_check);

  if (corrupt_one) {
    for (std::ptrdiff_t idx : indices) {
      if (std::abs(grads.flat()[idx]) > 1e-6) {
        grads.flat()[idx] *= 2.0;
        break;
      }
    }
  }

  auto loss_at = [&](std::ptrdiff_t idx, double delta) {
    const double saved = work.flat()[idx];
    work.flat()[idx] = saved + delta;
    UserRecurrentState st = UserRecurrentState::cold(params.dims().hidden);
    SequenceTape tape = forward_sequence(work, st, inputs, targets, tau);
    const double loss = sequence_loss(tape);
    work.flat()[idx] = saved;
    return loss;
  };

  FdReport report;
  report.checked = static_cast<int>(indices.size());
  for (std::ptrdiff_t idx : indices) {
    const double analytic = grads.flat()[idx];
    // Round-off and truncation error pull in opposite directions with the
    // step size, so take the better of two steps per entry.
    double best = std::numeric_limits<double>::infinity();
    for (double h : {eps, 4 * eps}) {
      const double numeric = (loss_at(idx, h) - loss_at(idx, -h)) / (2 * h);
      const double denom =
          std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      best = std::min(best, std::abs(numeric - analytic) / denom);
    }
    report.max_rel_err = std::max(report.max_rel_err, best);
  }
  return report;
}

IndexRanges update_ranges(const ParameterSet& params, int user,
                          const std::vector<int>& topics_a,
                          const std::vector<int>& topics_b,
                          bool all_topics) {
  IndexRanges ranges;
  if (!params.has_embeddings()) {
    ranges.push_back({0, params.size()});
    return ranges;
  }
  const int k = params.dims().embed;
  for (const TensorInfo& t : params.tensors()) {
    if (t.name == "users") {
      if (user >= 0)
        ranges.push_back({t.offset + std::ptrdiff_t{user} * k,
                          t.offset + std::ptrdiff_t{user + 1} * k});
    } else if (t.name == "topics_a" || t.name == "topics_b") {
      if (all_topics) {
        ranges.push_back({t.offset, t.offset + t.count()});
      } else {
        const auto& cols = t.name == "topics_a" ? topics_a : topics_b;
        for (int c : cols)
          ranges.push_back({t.offset + std::ptrdiff_t{c} * k,
                            t.offset + std::ptrdiff_t{c + 1} * k});
      }
    } else {
      ranges.push_back({t.offset, t.offset + t.count()});
    }
  }
  return ranges;
}

double mean_train_gap(const std::vector<UserSequence>& sequences) {
  double total = 0.0;
  long count = 0;
  for (const auto& seq : sequences)
    for (const auto& in : seq.train_in)
      if (in.delta_t >= 0) {
        total += std::max(in.delta_t, 1.0);
        ++count;
      }
  return count > 0 ? total / count : 1.0;
}

EvalScore evaluate_sequences(const ParameterSet& params,
                             const std::vector<UserSequence>& sequences,
                             double tau, int top_k_size, bool test_part) {
  EvalScore score;
  for (const auto& seq : sequences) {
    const auto& eval_in = test_part ? seq.test_in : seq.val_in;
    const auto& eval_targets = test_part ? seq.test_targets : seq.val_targets;
    if (eval_in.empty()) continue;

    UserRecurrentState st = UserRecurrentState::cold(params.dims().hidden);
    forward_sequence(params, st, seq.train_in, seq.train_targets, tau);
    if (test_part)
      forward_sequence(params, st, seq.val_in, seq.val_targets, tau);

    double hr_sum = 0.0, ndcg_sum = 0.0;
    for (std::size_t i = 0; i < eval_in.size(); ++i) {
      StepTrace t = step_forward(params, st, eval_in[i], tau);
      advance_state(st, t);
      const std::vector<int> ranked =
          top_k(t.probs, std::min<int>(top_k_size, t.probs.size()));
      hr_sum += hit_ratio(ranked, {eval_targets[i]});
      ndcg_sum += ndcg(ranked, {eval_targets[i]});
    }
    score.hr += hr_sum / eval_in.size();
    score.ndcg += ndcg_sum / eval_in.size();
    score.users += 1;
  }
  if (score.users > 0) {
    score.hr /= score.users;
    score.ndcg /= score.users;
  }
  return score;
}

TrainResult train_offline(const ModelDims& dims, Variant variant,
                          const std::vector<UserSequence>& sequences,
                          const TrainConfig& config) {
  if (sequences.empty()) throw std::invalid_argument("no training sequences");

  TrainResult result;
  result.params = ParameterSet(dims, variant);
  result.params.init_random(config.seed);
  result.tau = config.tau > 0 ? config.tau : mean_train_gap(sequences);
  result.opt = AdamState::fresh(result.params.size(), config.lr);

  ParameterSet best = result.params;
  double best_hr = -1.0;
  ParameterSet grads(dims, variant);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    long epoch_steps = 0;
    for (std::size_t ui = 0; ui < sequences.size(); ++ui) {
      const UserSequence& seq = sequences[ui];
      if (seq.train_in.empty()) continue;

      std::mt19937_64 mask_rng(config.seed * 0x9e3779b97f4a7c15ULL +
                               epoch * 1000003ULL + ui);
      const int chunk =
          config.truncate > 0 ? config.truncate
                              : static_cast<int>(seq.train_in.size());

      UserRecurrentState st = UserRecurrentState::cold(dims.hidden);
      for (std::size_t begin = 0; begin < seq.train_in.size();
           begin += chunk) {
        const std::size_t end =
            std::min(begin + chunk, seq.train_in.size());
        std::vector<StepInput> inputs(seq.train_in.begin() + begin,
                                      seq.train_in.begin() + end);
        std::vector<int> targets(seq.train_targets.begin() + begin,
                                 seq.train_targets.begin() + end);
        std::vector<Eigen::VectorXd> masks;
        masks.reserve(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i)
          masks.push_back(
              make_dropout_mask(dims.hidden, config.dropout, mask_rng));

        SequenceTape tape = forward_sequence(result.params, st, inputs,
                                             targets, result.tau, &masks);
        const double loss = sequence_loss(tape);
        if (!std::isfinite(loss))
          throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", user " + seq.user_id);
        epoch_loss += loss;
        epoch_steps += static_cast<long>(inputs.size());

        grads.set_zero();
        backward(result.params, tape, grads);
        clip_global_norm(grads.flat(), config.clip_norm);
        adam_step_ranges(result.params.flat(), grads.flat(), result.opt,
                         update_ranges(result.params, seq.user_index, {}, {},
                                       /*all_topics=*/true));
      }
    }

    const EvalScore val = evaluate_sequences(result.params, sequences,
                                             result.tau, config.val_top_k,
                                             /*test_part=*/false);
    result.log.push_back({epoch, epoch_steps ? epoch_loss / epoch_steps : 0.0,
                          val.hr, val.ndcg});
    if (val.hr > best_hr) {
      best_hr = val.hr;
      best = result.params;
    }
  }

  result.params = best;
  return result;
}

}  // namespace crossrec
