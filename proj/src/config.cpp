#include "crossrec/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "crossrec/model.hpp"

namespace crossrec {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

void require(bool ok, const std::string& key, const std::string& value) {
  if (!ok) throw std::invalid_argument("invalid value for " + key + ": " + value);
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  try {
    if (key == "topics") {
      topics = std::stoi(value);
      require(topics >= 1, key, value);
    } else if (key == "embed_dim") {
      embed_dim = std::stoi(value);
      require(embed_dim >= 1, key, value);
    } else if (key == "hidden") {
      hidden = std::stoi(value);
      require(hidden >= 1, key, value);
    } else if (key == "dropout") {
      dropout = std::stod(value);
      require(dropout >= 0 && dropout < 1, key, value);
    } else if (key == "lr") {
      lr = std::stod(value);
      require(lr > 0, key, value);
    } else if (key == "top_k") {
      top_k = std::stoi(value);
      require(top_k >= 1, key, value);
    } else if (key == "tau") {
      tau = std::stod(value);
    } else if (key == "max_iters") {
      max_iters = std::stoi(value);
      require(max_iters >= 0, key, value);
    } else if (key == "history_cap") {
      history_cap = std::stoul(value);
    } else if (key == "epochs") {
      epochs = std::stoi(value);
      require(epochs >= 1, key, value);
    } else if (key == "lda_iterations") {
      lda_iterations = std::stoi(value);
      require(lda_iterations >= 1, key, value);
    } else if (key == "clip_norm") {
      clip_norm = std::stod(value);
    } else if (key == "truncate") {
      truncate = std::stoi(value);
      require(truncate >= 0, key, value);
    } else if (key == "val_top_k") {
      val_top_k = std::stoi(value);
      require(val_top_k >= 1, key, value);
    } else if (key == "num_windows") {
      num_windows = std::stoi(value);
      require(num_windows >= 1, key, value);
    } else if (key == "seed") {
      seed = std::stoull(value);
    } else if (key == "variant") {
      parse_variant(value);  // validates
      variant = value;
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid value for " + key + ": " + value);
  }
}

std::string RunConfig::echo() const {
  std::ostringstream out;
  out.precision(17);
  out << "topics = " << topics << '\n'
      << "embed_dim = " << embed_dim << '\n'
      << "hidden = " << hidden << '\n'
      << "dropout = " << dropout << '\n'
      << "lr = " << lr << '\n'
      << "top_k = " << top_k << '\n'
      << "tau = " << tau << '\n'
      << "max_iters = " << max_iters << '\n'
      << "history_cap = " << history_cap << '\n'
      << "epochs = " << epochs << '\n'
      << "lda_iterations = " << lda_iterations << '\n'
      << "clip_norm = " << clip_norm << '\n'
      << "truncate = " << truncate << '\n'
      << "val_top_k = " << val_top_k << '\n'
      << "num_windows = " << num_windows << '\n'
      << "seed = " << seed << '\n'
      << "variant = " << variant << '\n';
  return out.str();
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  RunConfig config;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected key = value");
    config.apply(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return config;
}

void write_config_echo(const std::string& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config echo: " + path);
  out << config.echo();
}

}  // namespace crossrec
