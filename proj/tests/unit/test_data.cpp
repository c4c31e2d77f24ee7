#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "keyformer/core/error.hpp"
#include "keyformer/data/feature_io.hpp"
#include "keyformer/data/manifest.hpp"
#include "keyformer/data/raw_log.hpp"
#include "keyformer/data/split.hpp"
#include "keyformer/data/synthetic.hpp"

using namespace keyformer;
using data::KeystrokeEvent;

namespace {

data::Session session_of(std::vector<KeystrokeEvent> events) {
  return data::Session{"u1", "1", std::move(events)};
}

void check_row(const core::Tensor& m, std::size_t row, std::array<double, 5> expected) {
  for (std::size_t c = 0; c < 5; ++c) CHECK(m.at(row, c) == doctest::Approx(expected[c]).epsilon(1e-6));
}

}  // namespace

TEST_CASE("feature rows from timestamp differences") {
  // Hand arithmetic: HL 100 ms, IL 150-100, PL 150-0, RL 260-100.
  const auto fs = data::extract_features(session_of({{97, 0, 100}, {98, 150, 260}}));
  CHECK(fs.true_length == 2);
  CHECK(fs.values.shape() == core::Shape{50, 5});
  check_row(fs.values, 0, {0.100, 0.050, 0.150, 0.160, 97.0 / 255});
  check_row(fs.values, 1, {0.110, 0, 0, 0, 98.0 / 255});
  for (std::size_t r = 2; r < 50; ++r) check_row(fs.values, r, {0, 0, 0, 0, 0});
}

TEST_CASE("single event and rollover") {
  const auto single = data::extract_features(session_of({{32, 0, 80}}));
  CHECK(single.true_length == 1);
  check_row(single.values, 0, {0.080, 0, 0, 0, 32.0 / 255});
  // Second key pressed before the first is released: IL negative, kept.
  const auto roll = data::extract_features(session_of({{65, 0, 120}, {66, 90, 200}}));
  CHECK(roll.values.at(0, 1) == doctest::Approx(-0.030));
  CHECK_THROWS_AS(data::extract_features(session_of({})), ContractError);
}

TEST_CASE("key codes are clamped into [0, 1]") {
  const auto fs = data::extract_features(session_of({{400, 0, 10}, {-3, 20, 30}}));
  CHECK(fs.values.at(0, 4) == 1);
  CHECK(fs.values.at(1, 4) == 0);
}

TEST_CASE("pad_or_slice") {
  core::Rng rng(1);
  const auto rows60 = test_support::random_tensor({60, 5}, rng);
  const auto sliced = data::pad_or_slice(rows60, 50);
  CHECK(sliced.true_length == 50);
  for (std::size_t i = 0; i < 50 * 5; ++i) CHECK(sliced.values[i] == rows60[i]);

  const auto rows3 = test_support::random_tensor({3, 5}, rng);
  const auto padded = data::pad_or_slice(rows3, 50);
  CHECK(padded.true_length == 3);
  for (std::size_t i = 3 * 5; i < 50 * 5; ++i) CHECK(padded.values[i] == 0);

  const auto rows50 = test_support::random_tensor({50, 5}, rng);
  CHECK(data::pad_or_slice(rows50, 50).values == rows50);
  CHECK_THROWS_AS(data::pad_or_slice(core::Tensor::zeros({0, 5}), 50), ContractError);
  CHECK_THROWS_AS(data::pad_or_slice(rows3, 0), ContractError);
}

TEST_CASE("property: extraction always yields L rows with true_length in [1, L]") {
  core::Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(120);
    const std::size_t length = 1 + rng.uniform_index(64);
    std::vector<KeystrokeEvent> events;
    double t = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double hold = rng.uniform(0, 300);
      events.push_back({static_cast<int>(rng.uniform_index(256)), t, t + hold});
      t += rng.uniform(-50, 400);
    }
    const auto fs = data::extract_features(session_of(events), length);
    REQUIRE(fs.values.shape() == core::Shape{length, 5});
    CHECK(fs.true_length == std::min(n, length));
    for (std::size_t r = 0; r < length; ++r) {
      CHECK(fs.values.at(r, 0) >= 0);
      CHECK(fs.values.at(r, 4) >= 0);
      CHECK(fs.values.at(r, 4) <= 1);
    }
  }
}

TEST_CASE("raw log parsing") {
  SUBCASE("two rows, one session") {
    const auto report = data::parse_raw_log_text(
        "PARTICIPANT_ID\tTEST_SECTION_ID\tPRESS_TIME\tRELEASE_TIME\tKEYCODE\n"
        "7\t1\t100\t180\t72\n"
        "7\t1\t250\t330\t73\n");
    REQUIRE(report.sessions.size() == 1);
    CHECK(report.sessions[0].events.size() == 2);
    CHECK(report.skipped_rows == 0);
  }
  SUBCASE("out-of-order rows are sorted by press time") {
    const auto report = data::parse_raw_log_text(
        "PARTICIPANT_ID,TEST_SECTION_ID,PRESS_TIME,RELEASE_TIME,KEYCODE\n"
        "7,1,500,600,66\n"
        "7,1,100,200,65\n"
        "7,2,50,90,67\n");
    REQUIRE(report.sessions.size() == 2);
    CHECK(report.sessions[0].events[0].key_code == 65);
    CHECK(report.sessions[0].events[1].key_code == 66);
  }
  SUBCASE("one corrupt row in 100 is skipped") {
    std::string text = "PARTICIPANT_ID\tTEST_SECTION_ID\tPRESS_TIME\tRELEASE_TIME\tKEYCODE\n";
    for (int i = 0; i < 99; ++i) text += "1\t1\t" + std::to_string(i * 100) + "\t" + std::to_string(i * 100 + 50) + "\t65\n";
    text += "1\t1\tgarbage\t10\t65\n";
    const auto report = data::parse_raw_log_text(text);
    CHECK(report.rows == 100);
    CHECK(report.skipped_rows == 1);
    CHECK(report.sessions[0].events.size() == 99);
  }
  SUBCASE("more than 10% malformed is fatal") {
    std::string text = "PARTICIPANT_ID,TEST_SECTION_ID,PRESS_TIME,RELEASE_TIME,KEYCODE\n";
    for (int i = 0; i < 8; ++i) text += "1,1,0,10,65\n";
    text += "1,1,x,10,65\n1,1,20,10,65\n";  // bad number; release before press
    CHECK_THROWS_AS(data::parse_raw_log_text(text), SchemaError);
  }
  SUBCASE("missing column") {
    CHECK_THROWS_AS(data::parse_raw_log_text("PARTICIPANT_ID,PRESS_TIME\n1,2\n"), SchemaError);
  }
  SUBCASE("schema mapping") {
    data::LogSchema schema;
    schema.subject = "user";
    schema.session = "sess";
    schema.press = "down";
    schema.release = "up";
    schema.key_code = "key";
    const auto report = data::parse_raw_log_text("key,up,down,sess,user\n65,90,10,s1,alice\n", schema);
    REQUIRE(report.sessions.size() == 1);
    CHECK(report.sessions[0].subject_id == "alice");
    CHECK(report.sessions[0].events[0].press_ms == 10);
    CHECK(report.sessions[0].events[0].release_ms == 90);
  }
}

TEST_CASE("raw log files: idempotent parse and write round trip") {
  test_support::TempDir dir("rawlog");
  const auto dataset = data::generate_synthetic(3, 4, 20, 5);
  data::write_raw_log(dir / "log.tsv", dataset.sessions);
  const auto first = data::parse_raw_log(dir / "log.tsv");
  const auto second = data::parse_raw_log(dir / "log.tsv");
  CHECK(first.sessions == second.sessions);
  CHECK(first.sessions == dataset.sessions);
  CHECK_THROWS_AS(data::parse_raw_log(dir / "missing.tsv"), IoError);

  std::ofstream(dir / "schema.json") << R"({"subject": "who"})";
  CHECK(data::load_schema(dir / "schema.json").subject == "who");
  CHECK(data::load_schema(dir / "schema.json").press == "PRESS_TIME");
}

TEST_CASE("feature file round trip is value-identical") {
  test_support::TempDir dir("features");
  const auto dataset = data::generate_synthetic(4, 3, 60, 9);
  std::vector<data::FeatureSequence> features;
  for (const auto& s : dataset.sessions) features.push_back(data::extract_features(s));
  data::write_features(dir / "f.jsonl", features);
  const auto back = data::read_features(dir / "f.jsonl");
  REQUIRE(back.size() == features.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].subject_id == features[i].subject_id);
    CHECK(back[i].session_id == features[i].session_id);
    CHECK(back[i].true_length == features[i].true_length);
    CHECK(back[i].values == features[i].values);
  }
  CHECK_THROWS_AS(data::parse_feature_line("{\"subject_id\": 3}"), SchemaError);
}

TEST_CASE("split_subjects") {
  std::vector<std::string> ids;
  for (int i = 0; i < 60; ++i) ids.push_back("s" + std::to_string(i));
  core::Rng a(4), b(4);
  const auto split = data::split_subjects(ids, {40, 10, 10}, a);
  CHECK(split.train.size() == 40);
  CHECK(split.validation.size() == 10);
  CHECK(split.test.size() == 10);
  std::set<std::string> all(split.train.begin(), split.train.end());
  all.insert(split.validation.begin(), split.validation.end());
  all.insert(split.test.begin(), split.test.end());
  CHECK(all.size() == 60);
  const auto again = data::split_subjects(ids, {40, 10, 10}, b);
  CHECK(again.train == split.train);
  CHECK(again.test == split.test);
  core::Rng c(4);
  CHECK_THROWS_AS(data::split_subjects(ids, {50, 10, 10}, c), ContractError);
}

TEST_CASE("split from explicit lists") {
  test_support::TempDir dir("lists");
  std::ofstream(dir / "train.txt") << "b\na\n";
  std::ofstream(dir / "val.txt") << "c\n";
  std::ofstream(dir / "test.txt") << "d\ne\n";
  const auto split = data::split_from_lists(dir / "train.txt", dir / "val.txt", dir / "test.txt");
  CHECK(split.train == std::vector<std::string>{"b", "a"});
  CHECK(split.validation == std::vector<std::string>{"c"});
  CHECK(split.test == std::vector<std::string>{"d", "e"});
  std::ofstream(dir / "overlap.txt") << "a\n";
  CHECK_THROWS_AS(data::split_from_lists(dir / "train.txt", dir / "overlap.txt", dir / "test.txt"),
                  ContractError);
}

TEST_CASE("synthetic generation") {
  const auto dataset = data::generate_synthetic(2, 15, 70, 3);
  REQUIRE(dataset.sessions.size() == 30);
  for (const auto& s : dataset.sessions) {
    REQUIRE(s.events.size() == 70);
    for (std::size_t i = 0; i < s.events.size(); ++i) {
      CHECK(s.events[i].release_ms > s.events[i].press_ms);
      if (i > 0) CHECK(s.events[i].press_ms >= s.events[i - 1].press_ms);
    }
  }
  for (const auto& p : dataset.profiles) {
    CHECK(p.hold_mean_ms >= 60);
    CHECK(p.hold_mean_ms <= 180);
    CHECK(p.interkey_mean_ms >= 40);
    CHECK(p.interkey_mean_ms <= 400);
    CHECK(p.hold_std_ms > 0);
    CHECK(p.interkey_std_ms > 0);
    CHECK(std::accumulate(p.key_preferences.begin(), p.key_preferences.end(), 0.0) ==
          doctest::Approx(1.0));
  }
  // Same seed, same data; subject streams independent of subject count.
  CHECK(data::generate_synthetic(2, 15, 70, 3).sessions == dataset.sessions);
  const auto bigger = data::generate_synthetic(3, 15, 70, 3);
  CHECK(std::equal(dataset.sessions.begin(), dataset.sessions.end(), bigger.sessions.begin()));
}

TEST_CASE("mean hold latency separates subjects with distinct hold means") {
  data::SyntheticProfile slow, fast;
  core::Rng rng(12);
  fast = data::random_profile("fast", rng);
  slow = data::random_profile("slow", rng);
  fast.hold_mean_ms = 80;
  fast.hold_std_ms = 16;
  slow.hold_mean_ms = 160;
  slow.hold_std_ms = 32;
  auto mean_hold = [](const data::Session& s) {
    double total = 0;
    for (const auto& e : s.events) total += e.release_ms - e.press_ms;
    return total / static_cast<double>(s.events.size());
  };
  const double midpoint = 120;
  for (const auto& s : data::generate_sessions(fast, 15, 70, rng)) CHECK(mean_hold(s) < midpoint);
  for (const auto& s : data::generate_sessions(slow, 15, 70, rng)) CHECK(mean_hold(s) > midpoint);
}

TEST_CASE("manifest round trip") {
  test_support::TempDir dir("manifest");
  CHECK_FALSE(data::read_manifest(dir / "none.json").split.has_value());
  data::Manifest m;
  m.split = data::DatasetSplit{{"a", "b"}, {"c"}, {"d"}};
  m.split_seed = 11;
  m.profiles = data::generate_synthetic(2, 1, 1, 1).profiles;
  m.synthetic_seed = 1;
  data::write_manifest(dir / "m.json", m);
  const auto back = data::read_manifest(dir / "m.json");
  REQUIRE(back.split);
  CHECK(back.split->train == m.split->train);
  CHECK(back.split_seed == m.split_seed);
  REQUIRE(back.profiles.size() == 2);
  CHECK(back.profiles[1].hold_mean_ms == m.profiles[1].hold_mean_ms);
  CHECK(back.profiles[1].key_preferences == m.profiles[1].key_preferences);
}

TEST_CASE("group_by_subject keeps first-seen order") {
  std::vector<data::FeatureSequence> seqs(5);
  const char* ids[] = {"b", "a", "b", "c", "a"};
  for (int i = 0; i < 5; ++i) seqs[i].subject_id = ids[i];
  const auto groups = data::group_by_subject(seqs);
  REQUIRE(groups.size() == 3);
  CHECK(groups[0].subject_id == "b");
  CHECK(groups[0].indices == std::vector<std::size_t>{0, 2});
  CHECK(groups[1].indices == std::vector<std::size_t>{1, 4});
}
