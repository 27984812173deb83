#include "crossrec/events.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace crossrec {

const char* network_tag(Network n) {
  switch (n) {
    case Network::SourceA: return "src_a";
    case Network::SourceB: return "src_b";
    case Network::Target: return "target";
  }
  return "?";
}

Network parse_network_tag(const std::string& tag) {
  if (tag == "src_a") return Network::SourceA;
  if (tag == "src_b") return Network::SourceB;
  if (tag == "target") return Network::Target;
  throw std::invalid_argument("unknown network tag: " + tag);
}

std::vector<std::string> DatasetSplit::user_ids() const {
  std::vector<std::string> ids;
  ids.reserve(train.size());
  for (const auto& [uid, _] : train) ids.push_back(uid);
  return ids;
}

namespace {

InteractionEvent parse_line(const std::string& line, std::size_t lineno) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos
                                            ? std::string::npos
                                            : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  if (fields.size() != 4)
    throw ParseError(lineno, "expected 4 TAB-separated fields, got " +
                                 std::to_string(fields.size()));

  InteractionEvent ev;
  try {
    std::size_t used = 0;
    ev.timestamp = std::stoll(fields[0], &used);
    if (used != fields[0].size()) throw std::invalid_argument(fields[0]);
  } catch (const std::exception&) {
    throw ParseError(lineno, "bad timestamp: " + fields[0]);
  }
  if (ev.timestamp < 0) throw ParseError(lineno, "negative timestamp");
  ev.user_id = fields[1];
  if (ev.user_id.empty()) throw ParseError(lineno, "empty user id");
  try {
    ev.network = parse_network_tag(fields[2]);
  } catch (const std::invalid_argument& e) {
    throw ParseError(lineno, e.what());
  }

  if (ev.network == Network::Target) {
    ev.item_id = fields[3];
    if (ev.item_id.empty() || ev.item_id.find(' ') != std::string::npos)
      throw ParseError(lineno, "target payload must be a single item id");
  } else {
    std::istringstream toks(fields[3]);
    std::string tok;
    while (toks >> tok) ev.tokens.push_back(tok);
    if (ev.tokens.empty())
      throw ParseError(lineno, "source event has no tokens");
  }
  return ev;
}

void stable_time_sort(std::vector<InteractionEvent>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const InteractionEvent& a, const InteractionEvent& b) {
                     if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                     return a.user_id < b.user_id;
                   });
}

}  // namespace

std::vector<InteractionEvent> parse_event_lines(const std::vector<std::string>& lines) {
  std::vector<InteractionEvent> events;
  std::size_t lineno = 0;
  for (const auto& line : lines) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    events.push_back(parse_line(line, lineno));
  }
  stable_time_sort(events);
  return events;
}

std::vector<InteractionEvent> parse_event_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open event log: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return parse_event_lines(lines);
}

void write_event_log(const std::string& path,
                     const std::vector<InteractionEvent>& events) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write event log: " + path);
  for (const auto& ev : events) {
    out << ev.timestamp << '\t' << ev.user_id << '\t' << network_tag(ev.network)
        << '\t';
    if (ev.network == Network::Target) {
      out << ev.item_id;
    } else {
      for (std::size_t i = 0; i < ev.tokens.size(); ++i) {
        if (i) out << ' ';
        out << ev.tokens[i];
      }
    }
    out << '\n';
  }
}

std::vector<InteractionEvent> filter_sparse(std::vector<InteractionEvent> events,
                                            int min_src_a, int min_src_b,
                                            int min_target) {
  if (min_src_a < 0 || min_src_b < 0 || min_target < 0)
    throw std::invalid_argument("thresholds must be >= 0");

  bool changed = true;
  while (changed) {
    changed = false;

    std::map<std::string, std::array<int, 3>> per_user;
    for (const auto& ev : events)
      per_user[ev.user_id][static_cast<int>(ev.network)]++;

    std::set<std::string> bad_users;
    for (const auto& [uid, counts] : per_user) {
      if (counts[0] < min_src_a || counts[1] < min_src_b ||
          counts[2] < min_target)
        bad_users.insert(uid);
    }
    if (!bad_users.empty()) {
      std::erase_if(events, [&](const InteractionEvent& ev) {
        return bad_users.count(ev.user_id) > 0;
      });
      changed = true;
      continue;  // recount before touching items
    }

    std::map<std::string, int> item_counts;
    for (const auto& ev : events)
      if (ev.network == Network::Target) item_counts[ev.item_id]++;
    std::set<std::string> bad_items;
    for (const auto& [item, n] : item_counts)
      if (n < min_target) bad_items.insert(item);
    if (!bad_items.empty()) {
      std::erase_if(events, [&](const InteractionEvent& ev) {
        return ev.network == Network::Target && bad_items.count(ev.item_id) > 0;
      });
      changed = true;
    }
  }
  return events;
}

DatasetSplit chronological_split(const std::vector<InteractionEvent>& events,
                                 double train_ratio, double validation_ratio) {
  if (train_ratio < 0 || validation_ratio < 0 ||
      train_ratio + validation_ratio > 1.0 + 1e-12)
    throw std::invalid_argument("invalid split ratios");

  std::map<std::string, std::vector<InteractionEvent>> targets, sources;
  for (const auto& ev : events) {
    if (ev.network == Network::Target)
      targets[ev.user_id].push_back(ev);
    else
      sources[ev.user_id].push_back(ev);
  }

  DatasetSplit split;
  std::set<std::string> items;

  for (auto& [uid, evs] : targets) {
    stable_time_sort(evs);
    const std::size_t n = evs.size();
    // At least one train event per user so every user can be modeled.
    const std::size_t n_train =
        std::max<std::size_t>(1, static_cast<std::size_t>(train_ratio * n));
    const std::size_t n_val = static_cast<std::size_t>(validation_ratio * n);

    auto& tr = split.train[uid];
    auto& va = split.validation[uid];
    auto& te = split.test[uid];
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_train)
        tr.push_back(evs[i]);
      else if (i < n_train + n_val)
        va.push_back(evs[i]);
      else
        te.push_back(evs[i]);
      items.insert(evs[i].item_id);
    }

    // Source events follow the target-time ranges; boundary timestamps go
    // to the earlier split.
    const std::int64_t train_end =
        tr.empty() ? std::numeric_limits<std::int64_t>::min()
                   : tr.back().timestamp;
    const std::int64_t val_end =
        va.empty() ? train_end : va.back().timestamp;
    auto src_it = sources.find(uid);
    if (src_it != sources.end()) {
      stable_time_sort(src_it->second);
      for (const auto& sev : src_it->second) {
        if (sev.timestamp <= train_end)
          tr.push_back(sev);
        else if (sev.timestamp <= val_end)
          va.push_back(sev);
        else
          te.push_back(sev);
      }
      stable_time_sort(tr);
      stable_time_sort(va);
      stable_time_sort(te);
    }
  }

  for (const auto& [uid, _] : sources)
    if (!targets.count(uid)) split.skipped_users.push_back(uid);

  split.item_catalog.assign(items.begin(), items.end());  // lexicographic
  for (std::size_t i = 0; i < split.item_catalog.size(); ++i)
    split.item_index[split.item_catalog[i]] = static_cast<int>(i);
  return split;
}

namespace {

std::vector<InteractionEvent> flatten(
    const std::map<std::string, std::vector<InteractionEvent>>& per_user) {
  std::vector<InteractionEvent> all;
  for (const auto& [uid, evs] : per_user)
    all.insert(all.end(), evs.begin(), evs.end());
  stable_time_sort(all);
  return all;
}

std::map<std::string, std::vector<InteractionEvent>> group(
    const std::vector<InteractionEvent>& events) {
  std::map<std::string, std::vector<InteractionEvent>> per_user;
  for (const auto& ev : events) per_user[ev.user_id].push_back(ev);
  return per_user;
}

}  // namespace

void save_split(const std::string& dir, const DatasetSplit& split) {
  write_event_log(dir + "/train.log", flatten(split.train));
  write_event_log(dir + "/validation.log", flatten(split.validation));
  write_event_log(dir + "/test.log", flatten(split.test));
  std::ofstream cat(dir + "/catalog.txt");
  if (!cat) throw std::runtime_error("cannot write catalog in " + dir);
  for (const auto& item : split.item_catalog) cat << item << '\n';
}

DatasetSplit load_split(const std::string& dir) {
  DatasetSplit split;
  split.train = group(parse_event_log(dir + "/train.log"));
  split.validation = group(parse_event_log(dir + "/validation.log"));
  split.test = group(parse_event_log(dir + "/test.log"));
  std::ifstream cat(dir + "/catalog.txt");
  if (!cat) throw std::runtime_error("cannot open catalog in " + dir);
  std::string item;
  while (std::getline(cat, item))
    if (!item.empty()) {
      split.item_index[item] = static_cast<int>(split.item_catalog.size());
      split.item_catalog.push_back(item);
    }
  return split;
}

StreamIterator::StreamIterator(const DatasetSplit& split, Part part) {
  const auto& src = part == Part::Validation ? split.validation : split.test;
  for (const auto& [uid, evs] : src)
    events_.insert(events_.end(), evs.begin(), evs.end());
  std::sort(events_.begin(), events_.end(),
            [](const InteractionEvent& a, const InteractionEvent& b) {
              if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
              if (a.user_id != b.user_id) return a.user_id < b.user_id;
              return static_cast<int>(a.network) < static_cast<int>(b.network);
            });
}

const InteractionEvent* StreamIterator::next() {
  if (pos_ >= events_.size()) return nullptr;
  return &events_[pos_++];
}

}  // namespace crossrec
