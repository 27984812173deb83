#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace crossrec {

enum class Network { SourceA, SourceB, Target };

const char* network_tag(Network n);
Network parse_network_tag(const std::string& tag);  // throws ParseError

// One timestamped user action. Source events carry pre-tokenized text,
// target events carry a single item id.
struct InteractionEvent {
  std::int64_t timestamp = 0;
  std::string user_id;
  Network network = Network::Target;
  std::vector<std::string> tokens;  // source networks only
  std::string item_id;              // target network only

  bool is_source() const { return network != Network::Target; }
};

struct ParseError : std::runtime_error {
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_number(line) {}
  std::size_t line_number;
};

// Chronological per-user split plus the frozen item catalog (index space I).
struct DatasetSplit {
  std::map<std::string, std::vector<InteractionEvent>> train;
  std::map<std::string, std::vector<InteractionEvent>> validation;
  std::map<std::string, std::vector<InteractionEvent>> test;
  std::vector<std::string> item_catalog;        // index = position
  std::map<std::string, int> item_index;        // inverse of item_catalog
  std::vector<std::string> skipped_users;       // users with no target events

  std::vector<std::string> user_ids() const;
};

// Parses the TAB-separated event log; returns events sorted by
// (timestamp, user_id, input order). Lines starting with '#' are skipped.
std::vector<InteractionEvent> parse_event_log(const std::string& path);
std::vector<InteractionEvent> parse_event_lines(const std::vector<std::string>& lines);

void write_event_log(const std::string& path, const std::vector<InteractionEvent>& events);

// Iterates to a fixpoint: users below a per-network threshold are dropped,
// then target items with fewer than min_target interactions, repeated until
// stable.
std::vector<InteractionEvent> filter_sparse(std::vector<InteractionEvent> events,
                                            int min_src_a, int min_src_b,
                                            int min_target);

// Per user: floor(r0*n) target events to train, floor(r1*n) to validation,
// remainder to test. Source events follow the target-time ranges; boundary
// timestamps go to the earlier split.
DatasetSplit chronological_split(const std::vector<InteractionEvent>& events,
                                 double train_ratio = 0.70,
                                 double validation_ratio = 0.10);

// Split manifests: three event-log files (train.log, validation.log,
// test.log) plus catalog.txt (one item id per line, order = index).
void save_split(const std::string& dir, const DatasetSplit& split);
DatasetSplit load_split(const std::string& dir);

// Globally interleaves one split part in timestamp order, ties broken by
// (user_id, network). Single-consumer.
class StreamIterator {
 public:
  enum class Part { Validation, Test };
  StreamIterator(const DatasetSplit& split, Part part);

  const InteractionEvent* next();  // nullptr when exhausted
  std::size_t remaining() const { return events_.size() - pos_; }

 private:
  std::vector<InteractionEvent> events_;
  std::size_t pos_ = 0;
};

}  // namespace crossrec
