#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace crossrec {

// Container with a text header listing (name, rows, cols, count) per tensor
// plus key=value metadata, followed by row-major little-endian float64
// payloads in header order.
class CheckpointWriter {
 public:
  void add_meta(const std::string& key, const std::string& value);
  void add_tensor(const std::string& name, const Eigen::MatrixXd& values);
  void add_tensor(const std::string& name, const Eigen::VectorXd& values);
  void write(const std::string& path) const;

 private:
  struct Entry {
    std::string name;
    Eigen::MatrixXd values;
  };
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<Entry> tensors_;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::string> order;  // tensor names in header order
  std::map<std::string, Eigen::MatrixXd> tensors;

  const Eigen::MatrixXd& tensor(const std::string& name) const;
  Eigen::VectorXd vector(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) > 0; }
};

// Throws on a malformed or truncated file; never returns partial state.
Checkpoint read_checkpoint(const std::string& path);

}  // namespace crossrec

#include "crossrec/model.hpp"
#include "crossrec/topics.hpp"
#include "crossrec/train.hpp"

namespace crossrec {

struct ModelFile {
  ParameterSet params;
  AdamState opt;
  double tau = 1.0;
  std::vector<std::string> items;
  std::vector<std::string> users;
};

void save_model(const std::string& path, const ParameterSet& params,
                const AdamState& opt, double tau,
                const std::vector<std::string>& item_catalog,
                const std::vector<std::string>& user_catalog);
ModelFile load_model(const std::string& path);

void save_topic_model(const std::string& path, const TopicModel& model);
TopicModel load_topic_model(const std::string& path);

}  // namespace crossrec
