#include "crossrec/online.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "crossrec/checkpoint.hpp"

namespace crossrec {

namespace {
constexpr double kMonotoneTol = 1e-9;

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(s);
  while (std::getline(in, field, sep)) out.push_back(field);
  return out;
}

}  // namespace

OnlineSession::OnlineSession(ParameterSet params, AdamState opt, double tau,
                             TopicModel topics,
                             std::vector<std::string> item_catalog,
                             std::vector<std::string> user_catalog,
                             OnlinePolicy policy)
    : params_(std::move(params)),
      opt_(std::move(opt)),
      tau_(tau),
      topics_(std::move(topics)),
      items_(std::move(item_catalog)),
      users_(std::move(user_catalog)),
      policy_(policy) {
  if (static_cast<int>(items_.size()) != params_.dims().items)
    throw std::invalid_argument("item catalog size does not match model");
  for (std::size_t i = 0; i < items_.size(); ++i)
    item_index_[items_[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < users_.size(); ++i)
    user_index_[users_[i]] = static_cast<int>(i);
}

void OnlineSession::set_user_state(const std::string& user_id,
                                   UserRecurrentState state,
                                   std::int64_t last_target_time) {
  state.history_cap = policy_.history_cap;
  states_[user_id] = std::move(state);
  last_target_[user_id] = last_target_time;
}

std::optional<EventResult> OnlineSession::process_event(
    const InteractionEvent& event) {
  if (clock_ != std::numeric_limits<std::int64_t>::min() &&
      event.timestamp < clock_)
    throw std::runtime_error("out-of-order event at timestamp " +
                             std::to_string(event.timestamp));
  clock_ = event.timestamp;

  if (event.is_source()) {
    buffers_[event.user_id].push_back(event);
    return std::nullopt;
  }

  auto uit = user_index_.find(event.user_id);
  if (uit == user_index_.end()) {
    warnings_.push_back("unknown user skipped: " + event.user_id);
    return std::nullopt;
  }
  auto iit = item_index_.find(event.item_id);
  if (iit == item_index_.end()) {
    warnings_.push_back("unknown item skipped: " + event.item_id);
    return std::nullopt;
  }
  const int user = uit->second;
  const int observed = iit->second;

  auto sit = states_.find(event.user_id);
  if (sit == states_.end()) {
    sit = states_
              .emplace(event.user_id, UserRecurrentState::cold(
                                          params_.dims().hidden,
                                          policy_.history_cap))
              .first;
  }
  UserRecurrentState& state = sit->second;

  auto lit = last_target_.find(event.user_id);
  const std::int64_t window_start =
      lit != last_target_.end() ? lit->second
                                : std::numeric_limits<std::int64_t>::min();
  const double delta_t =
      lit != last_target_.end()
          ? static_cast<double>(event.timestamp - lit->second)
          : -1.0;

  auto& buffer = buffers_[event.user_id];
  const TopicContext ctx =
      window_aggregate(buffer, topics_, event.user_id, window_start,
                       event.timestamp, delta_t);

  StepInput in;
  in.x = ctx.x;
  in.delta_t = delta_t;
  in.user = user;
  in.timestamp = static_cast<double>(event.timestamp);

  // Prediction strictly precedes label revelation.
  const StepTrace trace = step_forward(params_, state, in, tau_);
  EventResult result;
  result.timestamp = event.timestamp;
  result.user_id = event.user_id;
  result.observed = observed;
  result.ranked = top_k(
      trace.probs, std::min<int>(policy_.top_k_size, trace.probs.size()));
  for (std::size_t i = 0; i < result.ranked.size(); ++i)
    if (result.ranked[i] == observed) {
      result.rank_of_observed = static_cast<int>(i) + 1;
      break;
    }
  result.hr = result.rank_of_observed > 0 ? 1.0 : 0.0;
  result.ndcg = result.rank_of_observed > 0
                    ? 1.0 / std::log2(result.rank_of_observed + 1.0)
                    : 0.0;
  result.prob_before = trace.probs[observed];

  if (policy_.max_iters > 0) {
    result.prob_after = incremental_update(event.user_id, state, in, observed);
  } else {
    result.prob_after = result.prob_before;
  }

  // History stores the step as computed at prediction time.
  advance_state(state, trace);
  buffer.clear();
  last_target_[event.user_id] = event.timestamp;
  return result;
}

double OnlineSession::incremental_update(const std::string& user_id,
                                         UserRecurrentState& state,
                                         const StepInput& in, int observed) {
  const double before = step_forward(params_, state, in, tau_).probs[observed];

  const Eigen::VectorXd saved_params = params_.flat();
  const Eigen::VectorXd saved_m = opt_.m;
  const Eigen::VectorXd saved_v = opt_.v;
  const long saved_step = opt_.step;

  ParameterSet grads(params_.dims(), params_.variant());
  IndexRanges ranges;

  auto local_grads = [&](const StepTrace& trace) {
    SequenceTape tape;
    tape.history_offset = static_cast<int>(state.history_x.size());
    tape.steps.push_back(trace);
    tape.targets.push_back(observed);
    grads.set_zero();
    backward(params_, tape, grads);
    clip_global_norm(grads.flat(), 5.0);
    if (ranges.empty()) {
      std::vector<int> ta, tb;
      for (const auto& [c, _] : trace.active_a) ta.push_back(c);
      for (const auto& [c, _] : trace.active_b) tb.push_back(c);
      ranges = update_ranges(params_, trace.user, ta, tb, /*all_topics=*/false);
    }
  };

  bool finite = true;
  for (int iter = 0; iter < policy_.max_iters; ++iter) {
    const StepTrace trace = step_forward(params_, state, in, tau_);
    if (!trace.probs.allFinite()) {
      finite = false;
      break;
    }
    local_grads(trace);
    if (!grads.flat().allFinite()) {
      finite = false;
      break;
    }
    adam_step_ranges(params_.flat(), grads.flat(), opt_, ranges);
  }

  double after = finite ? step_forward(params_, state, in, tau_).probs[observed]
                        : before - 1.0;
  if (after >= before - kMonotoneTol) return after;

  // Adam's stale moments can overshoot on a single observation. Roll back
  // and fall back to a plain gradient step with a halving line search; the
  // zero-step limit satisfies the non-decrease contract.
  params_.flat() = saved_params;
  opt_.m = saved_m;
  opt_.v = saved_v;
  opt_.step = saved_step;
  warnings_.push_back("adam overshoot rolled back for user " + user_id);

  const StepTrace trace = step_forward(params_, state, in, tau_);
  local_grads(trace);
  double lr = opt_.lr;
  for (int attempt = 0; attempt < 60; ++attempt) {
    for (const auto& [begin, end] : ranges)
      params_.flat().segment(begin, end - begin) -=
          lr * grads.flat().segment(begin, end - begin);
    after = step_forward(params_, state, in, tau_).probs[observed];
    if (after >= before - kMonotoneTol && std::isfinite(after)) return after;
    params_.flat() = saved_params;
    lr *= 0.5;
  }
  return before;
}

void OnlineSession::snapshot(const std::string& path) const {
  CheckpointWriter w;
  const ModelDims& d = params_.dims();
  w.add_meta("kind", "session");
  w.add_meta("variant", variant_name(params_.variant()));
  w.add_meta("topics", std::to_string(d.topics));
  w.add_meta("embed", std::to_string(d.embed));
  w.add_meta("hidden", std::to_string(d.hidden));
  w.add_meta("items", std::to_string(d.items));
  w.add_meta("num_users", std::to_string(d.users));
  {
    std::ostringstream os;
    os.precision(17);
    os << tau_;
    w.add_meta("tau", os.str());
  }
  w.add_meta("max_iters", std::to_string(policy_.max_iters));
  w.add_meta("top_k", std::to_string(policy_.top_k_size));
  w.add_meta("history_cap", std::to_string(policy_.history_cap));
  w.add_meta("adam_step", std::to_string(opt_.step));
  {
    std::ostringstream os;
    os.precision(17);
    os << opt_.lr;
    w.add_meta("adam_lr", os.str());
  }
  w.add_meta("clock", std::to_string(clock_));
  w.add_meta("item_catalog", join(items_, ','));
  w.add_meta("user_catalog", join(users_, ','));

  // topic model
  std::vector<std::string> vocab(topics_.vocabulary.size());
  for (const auto& [tok, idx] : topics_.vocabulary) vocab[idx] = tok;
  w.add_meta("vocab", join(vocab, ','));
  {
    std::ostringstream os;
    os.precision(17);
    os << topics_.alpha_doc << ' ' << topics_.beta_word;
    w.add_meta("lda_hyper", os.str());
  }
  w.add_tensor("topic_word", topics_.topic_word);

  w.add_tensor("params", params_.flat());
  w.add_tensor("adam_m", opt_.m);
  w.add_tensor("adam_v", opt_.v);

  std::vector<std::string> state_users;
  for (const auto& [uid, st] : states_) {
    state_users.push_back(uid);
    w.add_tensor("state." + uid + ".cell", st.cell);
    w.add_tensor("state." + uid + ".out", st.out);
    const int L = static_cast<int>(st.history_x.size());
    Eigen::MatrixXd hx(d.context(), L), hh(d.hidden, L);
    for (int i = 0; i < L; ++i) {
      hx.col(i) = st.history_x[i];
      hh.col(i) = st.history_h[i];
    }
    w.add_tensor("state." + uid + ".hist_x", hx);
    w.add_tensor("state." + uid + ".hist_h", hh);
  }
  w.add_meta("state_users", join(state_users, ','));

  std::vector<std::string> last;
  for (const auto& [uid, t] : last_target_)
    last.push_back(uid + ":" + std::to_string(t));
  w.add_meta("last_target", join(last, ','));

  int buffer_count = 0;
  for (const auto& [uid, events] : buffers_) {
    for (const auto& ev : events) {
      std::ostringstream os;
      os << ev.timestamp << '|' << uid << '|' << network_tag(ev.network) << '|';
      for (std::size_t i = 0; i < ev.tokens.size(); ++i) {
        if (i) os << ' ';
        os << ev.tokens[i];
      }
      w.add_meta("buffer." + std::to_string(buffer_count++), os.str());
    }
  }
  w.add_meta("buffer_count", std::to_string(buffer_count));

  w.write(path);
}

OnlineSession OnlineSession::restore(const std::string& path) {
  const Checkpoint c = read_checkpoint(path);
  if (!c.meta.count("kind") || c.meta.at("kind") != "session")
    throw std::runtime_error("not a session snapshot: " + path);

  ModelDims dims;
  dims.topics = std::stoi(c.meta.at("topics"));
  dims.embed = std::stoi(c.meta.at("embed"));
  dims.hidden = std::stoi(c.meta.at("hidden"));
  dims.items = std::stoi(c.meta.at("items"));
  dims.users = std::stoi(c.meta.at("num_users"));
  const Variant variant = parse_variant(c.meta.at("variant"));

  ParameterSet params(dims, variant);
  if (params.size() != c.vector("params").size())
    throw std::runtime_error("parameter count mismatch in " + path);
  params.flat() = c.vector("params");

  AdamState opt = AdamState::fresh(params.size(), std::stod(c.meta.at("adam_lr")));
  opt.m = c.vector("adam_m");
  opt.v = c.vector("adam_v");
  opt.step = std::stol(c.meta.at("adam_step"));

  TopicModel topics;
  topics.num_topics = dims.topics;
  topics.topic_word = c.tensor("topic_word");
  {
    const auto hyper = split(c.meta.at("lda_hyper"), ' ');
    topics.alpha_doc = std::stod(hyper.at(0));
    topics.beta_word = std::stod(hyper.at(1));
  }
  int vidx = 0;
  for (const auto& tok : split(c.meta.at("vocab"), ','))
    topics.vocabulary[tok] = vidx++;

  OnlinePolicy policy;
  policy.max_iters = std::stoi(c.meta.at("max_iters"));
  policy.top_k_size = std::stoi(c.meta.at("top_k"));
  policy.history_cap = std::stoul(c.meta.at("history_cap"));

  OnlineSession s(std::move(params), std::move(opt),
                  std::stod(c.meta.at("tau")), std::move(topics),
                  split(c.meta.at("item_catalog"), ','),
                  split(c.meta.at("user_catalog"), ','), policy);
  s.clock_ = std::stoll(c.meta.at("clock"));

  for (const auto& uid : split(c.meta.at("state_users"), ',')) {
    if (uid.empty()) continue;
    UserRecurrentState st = UserRecurrentState::cold(dims.hidden, policy.history_cap);
    st.cell = c.vector("state." + uid + ".cell");
    st.out = c.vector("state." + uid + ".out");
    const Eigen::MatrixXd& hx = c.tensor("state." + uid + ".hist_x");
    const Eigen::MatrixXd& hh = c.tensor("state." + uid + ".hist_h");
    for (int i = 0; i < hx.cols(); ++i) {
      st.history_x.push_back(hx.col(i));
      st.history_h.push_back(hh.col(i));
    }
    s.states_[uid] = std::move(st);
  }
  for (const auto& entry : split(c.meta.at("last_target"), ',')) {
    if (entry.empty()) continue;
    const std::size_t colon = entry.rfind(':');
    s.last_target_[entry.substr(0, colon)] = std::stoll(entry.substr(colon + 1));
  }
  const int buffer_count = std::stoi(c.meta.at("buffer_count"));
  for (int i = 0; i < buffer_count; ++i) {
    const auto fields = split(c.meta.at("buffer." + std::to_string(i)), '|');
    InteractionEvent ev;
    ev.timestamp = std::stoll(fields.at(0));
    ev.user_id = fields.at(1);
    ev.network = parse_network_tag(fields.at(2));
    std::istringstream toks(fields.at(3));
    std::string tok;
    while (toks >> tok) ev.tokens.push_back(tok);
    s.buffers_[ev.user_id].push_back(std::move(ev));
  }
  return s;
}

void write_event_csv(const std::string& path,
                     const std::vector<EventResult>& results) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write event csv: " + path);
  out << "timestamp,user_id,hit,rank_of_observed,hr_at_k,ndcg_at_k\n";
  out.precision(17);
  for (const auto& r : results)
    out << r.timestamp << ',' << r.user_id << ','
        << (r.rank_of_observed > 0 ? 1 : 0) << ',' << r.rank_of_observed << ','
        << r.hr << ',' << r.ndcg << '\n';
}

}  // namespace crossrec
