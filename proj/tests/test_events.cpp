#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "crossrec/events.hpp"

using namespace crossrec;

namespace {

std::string src(const char* uid, std::int64_t t, const char* net,
                const char* toks) {
  return std::to_string(t) + "\t" + uid + "\t" + net + "\t" + toks;
}

std::string tgt(const char* uid, std::int64_t t, const char* item) {
  return std::to_string(t) + "\t" + uid + "\t" + "target" + "\t" + item;
}

}  // namespace

TEST_CASE("parse: empty input") {
  CHECK(parse_event_lines({}).empty());
  CHECK(parse_event_lines({"# only a comment", ""}).empty());
}

TEST_CASE("parse: sorts by timestamp") {
  auto evs = parse_event_lines(
      {tgt("u", 5, "a"), tgt("u", 2, "b"), tgt("u", 9, "c")});
  REQUIRE(evs.size() == 3);
  CHECK(evs[0].timestamp == 2);
  CHECK(evs[1].timestamp == 5);
  CHECK(evs[2].timestamp == 9);
}

TEST_CASE("parse: ties sorted by user then input order") {
  auto evs = parse_event_lines({src("b", 7, "src_a", "x y"),
                                src("a", 7, "src_a", "z"),
                                src("a", 7, "src_b", "w")});
  REQUIRE(evs.size() == 3);
  CHECK(evs[0].user_id == "a");
  CHECK(evs[0].network == Network::SourceA);
  CHECK(evs[1].network == Network::SourceB);  // stable: input order kept
  CHECK(evs[2].user_id == "b");
}

TEST_CASE("parse: malformed lines carry the line number") {
  CHECK_THROWS_AS(parse_event_lines({tgt("u", 1, "a"), "5\tu\txyz\tfoo"}),
                  ParseError);
  try {
    parse_event_lines({"# c", "5\tu\txyz\tfoo"});
    FAIL("expected throw");
  } catch (const ParseError& e) {
    CHECK(e.line_number == 2);
  }
  CHECK_THROWS_AS(parse_event_lines({"notanumber\tu\ttarget\ti"}), ParseError);
  CHECK_THROWS_AS(parse_event_lines({"5\tu\ttarget"}), ParseError);
  CHECK_THROWS_AS(parse_event_lines({"5\tu\tsrc_a\t"}), ParseError);
  CHECK_THROWS_AS(parse_event_lines({"-3\tu\ttarget\ti"}), ParseError);
}

TEST_CASE("parse: payload splitting") {
  auto evs = parse_event_lines({src("u", 1, "src_a", "alpha beta  gamma")});
  REQUIRE(evs.size() == 1);
  CHECK(evs[0].tokens == std::vector<std::string>{"alpha", "beta", "gamma"});
  auto t = parse_event_lines({tgt("u", 1, "item42")});
  CHECK(t[0].item_id == "item42");
}

TEST_CASE("filter_sparse: users exactly at thresholds survive") {
  std::vector<std::string> lines;
  for (int u = 0; u < 2; ++u) {
    std::string uid = "u" + std::to_string(u);
    for (int i = 0; i < 10; ++i) lines.push_back(src(uid.c_str(), i, "src_a", "t"));
    for (int i = 0; i < 5; ++i) lines.push_back(src(uid.c_str(), 100 + i, "src_b", "t"));
    for (int i = 0; i < 10; ++i) lines.push_back(tgt(uid.c_str(), 200 + i, "shared"));
  }
  auto evs = parse_event_lines(lines);
  auto kept = filter_sparse(evs, 10, 5, 10);
  CHECK(kept.size() == evs.size());
}

TEST_CASE("filter_sparse: user below a source threshold is removed entirely") {
  std::vector<std::string> lines;
  for (int i = 0; i < 9; ++i) lines.push_back(src("poor", i, "src_a", "t"));
  for (int i = 0; i < 5; ++i) lines.push_back(src("poor", 50 + i, "src_b", "t"));
  for (int i = 0; i < 10; ++i) lines.push_back(tgt("poor", 100 + i, "x"));
  auto kept = filter_sparse(parse_event_lines(lines), 10, 5, 10);
  CHECK(kept.empty());
}

TEST_CASE("filter_sparse: fixpoint cascade") {
  // Three users. Item "i1" has 3 interactions, one of them from a user who
  // is dropped for lacking source events; i1's count falls to 2 and it is
  // dropped on the next pass, which then pushes u2 under the target
  // threshold as well.
  std::vector<std::string> lines;
  auto add_user = [&](const char* uid, int n_src, std::vector<std::string> items) {
    for (int i = 0; i < n_src; ++i) lines.push_back(src(uid, i, "src_a", "t"));
    for (std::size_t i = 0; i < items.size(); ++i)
      lines.push_back(tgt(uid, 100 + static_cast<int>(i), items[i].c_str()));
  };
  add_user("u1", 0, {"i1", "i2", "i2"});              // no sources: dropped
  add_user("u2", 2, {"i1", "i2", "i2"});              // loses i1 later
  add_user("u3", 2, {"i1", "i2", "i2", "i2", "i2"});  // survives
  auto kept = filter_sparse(parse_event_lines(lines), 1, 0, 3);

  std::map<std::string, int> per_user_targets;
  bool saw_i1 = false;
  for (const auto& ev : kept) {
    CHECK(ev.user_id != "u1");
    if (ev.network == Network::Target) {
      per_user_targets[ev.user_id]++;
      if (ev.item_id == "i1") saw_i1 = true;
    }
  }
  CHECK_FALSE(saw_i1);
  CHECK(per_user_targets.count("u2") == 0);  // only 2 targets left after i1 went
  CHECK(per_user_targets["u3"] == 4);
}

TEST_CASE("filter_sparse: output satisfies all thresholds on a re-scan") {
  std::vector<std::string> lines;
  for (int u = 0; u < 8; ++u) {
    std::string uid = "v" + std::to_string(u);
    for (int i = 0; i < u; ++i) lines.push_back(src(uid.c_str(), i, "src_a", "t"));
    for (int i = 0; i <= u; ++i)
      lines.push_back(tgt(uid.c_str(), 50 + i, ("it" + std::to_string(i % 3)).c_str()));
  }
  auto kept = filter_sparse(parse_event_lines(lines), 3, 0, 2);
  std::map<std::string, std::array<int, 3>> per_user;
  std::map<std::string, int> items;
  for (const auto& ev : kept) {
    per_user[ev.user_id][static_cast<int>(ev.network)]++;
    if (ev.network == Network::Target) items[ev.item_id]++;
  }
  for (const auto& [uid, c] : per_user) {
    CHECK(c[0] >= 3);
    CHECK(c[2] >= 2);
  }
  for (const auto& [item, n] : items) CHECK(n >= 2);
}

TEST_CASE("chronological_split: 10 targets split 7/1/2") {
  std::vector<std::string> lines;
  for (int i = 0; i < 10; ++i)
    lines.push_back(tgt("u", 1000 + 10 * i, ("i" + std::to_string(i)).c_str()));
  auto split = chronological_split(parse_event_lines(lines));
  CHECK(split.train.at("u").size() == 7);
  CHECK(split.validation.at("u").size() == 1);
  CHECK(split.test.at("u").size() == 2);
  CHECK(split.train.at("u").back().timestamp == 1060);
  CHECK(split.test.at("u").front().timestamp == 1080);
}

TEST_CASE("chronological_split: single target goes to train") {
  auto split = chronological_split(parse_event_lines({tgt("u", 5, "a")}));
  CHECK(split.train.at("u").size() == 1);
  CHECK(split.validation.at("u").empty());
  CHECK(split.test.at("u").empty());
}

TEST_CASE("chronological_split: source events follow target time ranges") {
  std::vector<std::string> lines;
  for (int i = 0; i < 10; ++i) lines.push_back(tgt("u", 100 * (i + 1), "x"));
  // train range ends at 700, validation at 800, test afterwards
  lines.push_back(src("u", 700, "src_a", "boundary"));  // ties go earlier
  lines.push_back(src("u", 750, "src_a", "val"));
  lines.push_back(src("u", 810, "src_b", "test"));
  auto split = chronological_split(parse_event_lines(lines));
  auto count_src = [](const std::vector<InteractionEvent>& evs) {
    int n = 0;
    for (const auto& e : evs) n += e.is_source();
    return n;
  };
  CHECK(count_src(split.train.at("u")) == 1);
  CHECK(count_src(split.validation.at("u")) == 1);
  CHECK(count_src(split.test.at("u")) == 1);
}

TEST_CASE("chronological_split: user with only source events is skipped") {
  auto split = chronological_split(
      parse_event_lines({src("ghost", 1, "src_a", "t"), tgt("u", 2, "a")}));
  REQUIRE(split.skipped_users.size() == 1);
  CHECK(split.skipped_users[0] == "ghost");
  CHECK(split.train.count("ghost") == 0);
}

TEST_CASE("chronological_split: catalog is lexicographic over all parts") {
  std::vector<std::string> lines;
  for (int i = 0; i < 10; ++i)
    lines.push_back(tgt("u", 10 * i, (i == 9 ? "aaa" : "zz" + std::to_string(i)).c_str()));
  auto split = chronological_split(parse_event_lines(lines));
  REQUIRE(split.item_catalog.size() == 10);
  CHECK(split.item_catalog[0] == "aaa");  // appears only in test, still indexed
  CHECK(split.item_index.at("aaa") == 0);
  for (std::size_t i = 1; i < split.item_catalog.size(); ++i)
    CHECK(split.item_catalog[i - 1] < split.item_catalog[i]);
}

TEST_CASE("split then concat reproduces per-user target order") {
  std::vector<std::string> lines;
  for (int i = 0; i < 13; ++i)
    lines.push_back(tgt("u", 7 * i, ("i" + std::to_string(i)).c_str()));
  auto evs = parse_event_lines(lines);
  auto split = chronological_split(evs);
  std::vector<std::string> concat;
  for (const auto* part : {&split.train, &split.validation, &split.test})
    for (const auto& ev : part->at("u"))
      if (!ev.is_source()) concat.push_back(ev.item_id);
  std::vector<std::string> original;
  for (const auto& ev : evs) original.push_back(ev.item_id);
  CHECK(concat == original);
}

TEST_CASE("stream iterator: global order and tie-breaks") {
  std::vector<std::string> lines;
  for (int i = 0; i < 10; ++i) lines.push_back(tgt("a", i, "x"));
  for (int i = 0; i < 10; ++i) lines.push_back(tgt("b", i, "y"));
  lines.push_back(src("b", 9, "src_a", "t"));  // same ts as targets at 9
  auto split = chronological_split(parse_event_lines(lines));

  StreamIterator it(split, StreamIterator::Part::Test);
  std::vector<InteractionEvent> streamed;
  while (const auto* ev = it.next()) streamed.push_back(*ev);

  std::size_t expected = split.test.at("a").size() + split.test.at("b").size();
  CHECK(streamed.size() == expected);
  for (std::size_t i = 1; i < streamed.size(); ++i) {
    CHECK(streamed[i - 1].timestamp <= streamed[i].timestamp);
    if (streamed[i - 1].timestamp == streamed[i].timestamp)
      CHECK(streamed[i - 1].user_id <= streamed[i].user_id);
  }
  // user a sorts before b on the shared timestamps
  CHECK(streamed[0].user_id == "a");
}

TEST_CASE("save/load split round-trip") {
  std::vector<std::string> lines;
  for (int i = 0; i < 10; ++i)
    lines.push_back(tgt("u", 10 * i, ("i" + std::to_string(i % 4)).c_str()));
  lines.push_back(src("u", 15, "src_a", "hello world"));
  auto split = chronological_split(parse_event_lines(lines));

  auto dir = std::filesystem::temp_directory_path() / "crossrec_split_rt";
  std::filesystem::create_directories(dir);
  save_split(dir.string(), split);
  auto loaded = load_split(dir.string());

  CHECK(loaded.item_catalog == split.item_catalog);
  CHECK(loaded.train.at("u").size() == split.train.at("u").size());
  CHECK(loaded.validation.at("u").size() == split.validation.at("u").size());
  CHECK(loaded.test.at("u").size() == split.test.at("u").size());
  CHECK(loaded.train.at("u")[1].tokens == split.train.at("u")[1].tokens);
  std::filesystem::remove_all(dir);
}
