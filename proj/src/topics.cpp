#include "crossrec/topics.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace crossrec {

TopicModel fit_lda(const std::vector<std::vector<std::string>>& corpus,
                   int num_topics, double alpha_doc, double beta_word,
                   int iterations, std::uint64_t seed) {
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  if (num_topics < 1) throw std::invalid_argument("num_topics must be >= 1");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");

  TopicModel model;
  model.num_topics = num_topics;
  model.alpha_doc = alpha_doc > 0 ? alpha_doc : 50.0 / num_topics;
  model.beta_word = beta_word > 0 ? beta_word : 0.01;

  for (const auto& doc : corpus)
    for (const auto& tok : doc)
      model.vocabulary.emplace(tok, 0);
  if (model.vocabulary.empty()) throw std::invalid_argument("empty vocabulary");
  int next = 0;
  for (auto& [tok, idx] : model.vocabulary) idx = next++;
  const int vocab = next;

  // Documents as word-index multisets.
  std::vector<std::vector<int>> docs(corpus.size());
  for (std::size_t d = 0; d < corpus.size(); ++d)
    for (const auto& tok : corpus[d])
      docs[d].push_back(model.vocabulary.at(tok));

  const int K = num_topics;
  const double alpha = model.alpha_doc;
  const double beta = model.beta_word;

  Eigen::MatrixXd topic_word_count = Eigen::MatrixXd::Zero(K, vocab);
  Eigen::VectorXd topic_token_count = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd topic_doc_count = Eigen::VectorXd::Zero(K);
  std::vector<int> assignment(docs.size());

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> init_topic(0, K - 1);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const int z = init_topic(rng);
    assignment[d] = z;
    topic_doc_count[z] += 1;
    for (int w : docs[d]) {
      topic_word_count(z, w) += 1;
      topic_token_count[z] += 1;
    }
  }

  // One latent topic per document: the collapsed conditional multiplies the
  // per-token word probabilities sequentially, so repeated tokens use
  // incremented counts.
  std::vector<double> logp(K);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const int old = assignment[d];
      topic_doc_count[old] -= 1;
      for (int w : docs[d]) {
        topic_word_count(old, w) -= 1;
        topic_token_count[old] -= 1;
      }

      for (int k = 0; k < K; ++k) {
        double lp = std::log(topic_doc_count[k] + alpha);
        std::map<int, int> seen;
        int pos = 0;
        for (int w : docs[d]) {
          lp += std::log(beta + topic_word_count(k, w) + seen[w]);
          lp -= std::log(vocab * beta + topic_token_count[k] + pos);
          seen[w] += 1;
          ++pos;
        }
        logp[k] = lp;
      }
      double maxlp = *std::max_element(logp.begin(), logp.end());
      double total = 0;
      for (int k = 0; k < K; ++k) {
        logp[k] = std::exp(logp[k] - maxlp);
        total += logp[k];
      }
      double u = unit(rng) * total;
      int z = K - 1;
      for (int k = 0; k < K; ++k) {
        u -= logp[k];
        if (u <= 0) { z = k; break; }
      }

      assignment[d] = z;
      topic_doc_count[z] += 1;
      for (int w : docs[d]) {
        topic_word_count(z, w) += 1;
        topic_token_count[z] += 1;
      }
    }
  }

  model.topic_word.resize(K, vocab);
  for (int k = 0; k < K; ++k)
    for (int w = 0; w < vocab; ++w)
      model.topic_word(k, w) = (topic_word_count(k, w) + beta) /
                               (topic_token_count[k] + vocab * beta);
  // Exact row normalization; the counts already make rows sum to 1 up to
  // rounding.
  for (int k = 0; k < K; ++k) model.topic_word.row(k) /= model.topic_word.row(k).sum();
  return model;
}

Eigen::VectorXd infer_topics(const TopicModel& model,
                             const std::vector<std::string>& document) {
  const int K = model.num_topics;
  std::vector<int> words;
  for (const auto& tok : document) {
    auto it = model.vocabulary.find(tok);
    if (it != model.vocabulary.end()) words.push_back(it->second);
  }
  if (words.empty())
    return Eigen::VectorXd::Constant(K, 1.0 / K);

  Eigen::VectorXd logp(K);
  for (int k = 0; k < K; ++k) {
    double lp = 0;
    for (int w : words) lp += std::log(model.topic_word(k, w));
    logp[k] = lp;
  }
  const double maxlp = logp.maxCoeff();
  Eigen::VectorXd p = (logp.array() - maxlp).exp();
  p /= p.sum();
  return p;
}

TopicContext window_aggregate(const std::vector<InteractionEvent>& user_events,
                              const TopicModel& model,
                              const std::string& user_id,
                              std::int64_t window_start, std::int64_t step_time,
                              double delta_t) {
  const int K = model.num_topics;
  TopicContext ctx;
  ctx.user_id = user_id;
  ctx.step_time = step_time;
  ctx.window_start = window_start;
  ctx.delta_t = delta_t;
  ctx.x = Eigen::VectorXd::Zero(2 * K);
  for (const auto& ev : user_events) {
    if (!ev.is_source()) continue;
    if (ev.timestamp <= window_start || ev.timestamp > step_time) continue;
    const Eigen::VectorXd dist = infer_topics(model, ev.tokens);
    if (ev.network == Network::SourceA)
      ctx.x.head(K) += dist;
    else
      ctx.x.tail(K) += dist;
  }
  return ctx;
}

PrecomputedContexts load_precomputed(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open context file: " + path);
  PrecomputedContexts out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    TopicContext ctx;
    std::string values;
    if (!(std::getline(ls, ctx.user_id, '\t')) || ctx.user_id.empty())
      throw ParseError(lineno, "missing user id");
    std::string field;
    if (!std::getline(ls, field, '\t')) throw ParseError(lineno, "missing step time");
    ctx.step_time = std::stoll(field);
    if (!std::getline(ls, field, '\t')) throw ParseError(lineno, "missing delta_t");
    ctx.delta_t = std::stod(field);
    if (!std::getline(ls, values)) throw ParseError(lineno, "missing vector");

    std::vector<double> v;
    std::istringstream vs(values);
    while (std::getline(vs, field, ',')) v.push_back(std::stod(field));
    if (v.empty() || v.size() % 2 != 0)
      throw ParseError(lineno, "context vector must have even positive length");
    if (out.context_dim == 0) out.context_dim = static_cast<int>(v.size());
    if (static_cast<int>(v.size()) != out.context_dim)
      throw ParseError(lineno, "inconsistent context dimension");
    ctx.x = Eigen::Map<Eigen::VectorXd>(v.data(), v.size());
    if ((ctx.x.array() < 0).any())
      throw ParseError(lineno, "negative context entry");
    out.by_step[{ctx.user_id, ctx.step_time}] = std::move(ctx);
  }
  return out;
}

void write_precomputed(const std::string& path, const PrecomputedContexts& ctxs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write context file: " + path);
  out.precision(17);
  for (const auto& [key, ctx] : ctxs.by_step) {
    out << ctx.user_id << '\t' << ctx.step_time << '\t' << ctx.delta_t << '\t';
    for (int i = 0; i < ctx.x.size(); ++i) {
      if (i) out << ',';
      out << ctx.x[i];
    }
    out << '\n';
  }
}

}  // namespace crossrec
