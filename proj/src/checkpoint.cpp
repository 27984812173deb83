#include "crossrec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace crossrec {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

namespace {
constexpr const char* kMagic = "CROSSREC-CKPT v1";
}

void CheckpointWriter::add_meta(const std::string& key, const std::string& value) {
  if (key.find_first_of(" \n") != std::string::npos)
    throw std::invalid_argument("meta key must not contain spaces");
  meta_.emplace_back(key, value);
}

void CheckpointWriter::add_tensor(const std::string& name,
                                  const Eigen::MatrixXd& values) {
  if (name.find_first_of(" \n") != std::string::npos)
    throw std::invalid_argument("tensor name must not contain spaces");
  tensors_.push_back({name, values});
}

void CheckpointWriter::add_tensor(const std::string& name,
                                  const Eigen::VectorXd& values) {
  add_tensor(name, Eigen::MatrixXd(values));
}

void CheckpointWriter::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << kMagic << '\n';
  for (const auto& [key, value] : meta_) out << "meta " << key << '=' << value << '\n';
  for (const auto& entry : tensors_)
    out << "tensor " << entry.name << ' ' << entry.values.rows() << ' '
        << entry.values.cols() << ' ' << entry.values.size() << '\n';
  out << "end\n";
  for (const auto& entry : tensors_) {
    // row-major payload
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
        row_major = entry.values;
    out.write(reinterpret_cast<const char*>(row_major.data()),
              static_cast<std::streamsize>(row_major.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

  std::string line;
  if (!std::getline(in, line) || line != kMagic)
    throw std::runtime_error("checkpoint version mismatch or bad magic: " + path);

  Checkpoint ckpt;
  struct Pending {
    std::string name;
    long rows, cols;
  };
  std::vector<Pending> pending;
  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string rest;
      std::getline(ls >> std::ws, rest);
      const std::size_t eq = rest.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("malformed meta line in " + path);
      ckpt.meta[rest.substr(0, eq)] = rest.substr(eq + 1);
    } else if (kind == "tensor") {
      Pending p;
      long count = 0;
      if (!(ls >> p.name >> p.rows >> p.cols >> count) ||
          count != p.rows * p.cols)
        throw std::runtime_error("malformed tensor line in " + path);
      pending.push_back(p);
    } else {
      throw std::runtime_error("unexpected header line in " + path);
    }
  }
  if (line != "end") throw std::runtime_error("truncated checkpoint header: " + path);

  for (const Pending& p : pending) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
        row_major(p.rows, p.cols);
    in.read(reinterpret_cast<char*>(row_major.data()),
            static_cast<std::streamsize>(row_major.size() * sizeof(double)));
    if (in.gcount() !=
        static_cast<std::streamsize>(row_major.size() * sizeof(double)))
      throw std::runtime_error("truncated checkpoint payload: " + path);
    ckpt.order.push_back(p.name);
    ckpt.tensors[p.name] = row_major;
  }
  return ckpt;
}

const Eigen::MatrixXd& Checkpoint::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end())
    throw std::out_of_range("checkpoint has no tensor: " + name);
  return it->second;
}

Eigen::VectorXd Checkpoint::vector(const std::string& name) const {
  const Eigen::MatrixXd& m = tensor(name);
  if (m.cols() != 1) throw std::runtime_error("tensor is not a vector: " + name);
  return m.col(0);
}

namespace {

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(s);
  while (std::getline(in, field, sep)) out.push_back(field);
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void save_model(const std::string& path, const ParameterSet& params,
                const AdamState& opt, double tau,
                const std::vector<std::string>& item_catalog,
                const std::vector<std::string>& user_catalog) {
  CheckpointWriter w;
  const ModelDims& d = params.dims();
  w.add_meta("kind", "model");
  w.add_meta("variant", variant_name(params.variant()));
  w.add_meta("topics", std::to_string(d.topics));
  w.add_meta("embed", std::to_string(d.embed));
  w.add_meta("hidden", std::to_string(d.hidden));
  w.add_meta("items", std::to_string(d.items));
  w.add_meta("num_users", std::to_string(d.users));
  w.add_meta("tau", fmt(tau));
  w.add_meta("adam_step", std::to_string(opt.step));
  w.add_meta("adam_lr", fmt(opt.lr));
  w.add_meta("item_catalog", join(item_catalog, ','));
  w.add_meta("user_catalog", join(user_catalog, ','));
  // One entry per named tensor so the header documents the layout.
  for (const TensorInfo& t : params.tensors())
    w.add_tensor(t.name, Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(
                             params.flat().data() + t.offset, t.rows, t.cols)));
  w.add_tensor("adam_m", opt.m);
  w.add_tensor("adam_v", opt.v);
  w.write(path);
}

ModelFile load_model(const std::string& path) {
  const Checkpoint c = read_checkpoint(path);
  if (!c.meta.count("kind") || c.meta.at("kind") != "model")
    throw std::runtime_error("not a model checkpoint: " + path);
  ModelDims dims;
  dims.topics = std::stoi(c.meta.at("topics"));
  dims.embed = std::stoi(c.meta.at("embed"));
  dims.hidden = std::stoi(c.meta.at("hidden"));
  dims.items = std::stoi(c.meta.at("items"));
  dims.users = std::stoi(c.meta.at("num_users"));

  ModelFile f{ParameterSet(dims, parse_variant(c.meta.at("variant"))),
              AdamState{}, std::stod(c.meta.at("tau")),
              split_on(c.meta.at("item_catalog"), ','),
              split_on(c.meta.at("user_catalog"), ',')};
  for (const TensorInfo& t : f.params.tensors()) {
    const Eigen::MatrixXd& m = c.tensor(t.name);
    if (m.rows() != t.rows || m.cols() != t.cols)
      throw std::runtime_error("tensor shape mismatch for " + t.name);
    Eigen::Map<Eigen::MatrixXd>(f.params.flat().data() + t.offset, t.rows,
                                t.cols) = m;
  }
  f.opt = AdamState::fresh(f.params.size(), std::stod(c.meta.at("adam_lr")));
  f.opt.m = c.vector("adam_m");
  f.opt.v = c.vector("adam_v");
  f.opt.step = std::stol(c.meta.at("adam_step"));
  return f;
}

void save_topic_model(const std::string& path, const TopicModel& model) {
  CheckpointWriter w;
  w.add_meta("kind", "topic-model");
  w.add_meta("num_topics", std::to_string(model.num_topics));
  w.add_meta("lda_hyper", fmt(model.alpha_doc) + " " + fmt(model.beta_word));
  std::vector<std::string> vocab(model.vocabulary.size());
  for (const auto& [tok, idx] : model.vocabulary) vocab[idx] = tok;
  w.add_meta("vocab", join(vocab, ','));
  w.add_tensor("topic_word", model.topic_word);
  w.write(path);
}

TopicModel load_topic_model(const std::string& path) {
  const Checkpoint c = read_checkpoint(path);
  if (!c.meta.count("kind") || c.meta.at("kind") != "topic-model")
    throw std::runtime_error("not a topic model checkpoint: " + path);
  TopicModel m;
  m.num_topics = std::stoi(c.meta.at("num_topics"));
  const auto hyper = split_on(c.meta.at("lda_hyper"), ' ');
  m.alpha_doc = std::stod(hyper.at(0));
  m.beta_word = std::stod(hyper.at(1));
  int idx = 0;
  for (const auto& tok : split_on(c.meta.at("vocab"), ','))
    m.vocabulary[tok] = idx++;
  m.topic_word = c.tensor("topic_word");
  return m;
}

}  // namespace crossrec
