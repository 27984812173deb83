#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace crossrec {

// All hyperparameters with their defaults. Loaded from a flat `key = value`
// file, then overridden by CLI flags; every run writes an echo copy.
struct RunConfig {
  int topics = 60;          // K^t
  int embed_dim = 100;      // k
  int hidden = 400;         // h
  double dropout = 0.35;
  double lr = 0.001;
  int top_k = 100;
  double tau = 0.0;         // <= 0: mean training inter-event gap
  int max_iters = 2;
  std::size_t history_cap = 0;  // 0 = unbounded
  int epochs = 10;
  int lda_iterations = 200;
  double clip_norm = 5.0;
  int truncate = 0;
  int val_top_k = 10;
  int num_windows = 5;
  std::uint64_t seed = 1;
  std::string variant = "Full";

  void apply(const std::string& key, const std::string& value);  // throws on unknown key
  std::string echo() const;
};

RunConfig load_config(const std::string& path);
void write_config_echo(const std::string& path, const RunConfig& config);

}  // namespace crossrec
