#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "keyformer/core/error.hpp"
#include "keyformer/data/synthetic.hpp"
#include "keyformer/evaluation/eer.hpp"
#include "keyformer/evaluation/embeddings.hpp"
#include "keyformer/evaluation/scores.hpp"

using namespace keyformer;
using evaluation::ScoreSet;

namespace {

// Independent sweep: every midpoint between sorted distinct scores plus one
// point below and above the range, each evaluated by direct counting.
double brute_force_eer(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  std::vector<double> all(genuine);
  all.insert(all.end(), impostor.begin(), impostor.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> candidates{all.front() - 1, all.back() + 1};
  for (std::size_t i = 0; i + 1 < all.size(); ++i) candidates.push_back((all[i] + all[i + 1]) / 2);
  std::sort(candidates.begin(), candidates.end());
  double best_gap = 2, eer = 0;
  for (double t : candidates) {
    double frr = 0, far = 0;
    for (double g : genuine) frr += g > t;
    for (double s : impostor) far += s <= t;
    frr /= genuine.size();
    far /= impostor.size();
    if (std::abs(far - frr) < best_gap) {
      best_gap = std::abs(far - frr);
      eer = (far + frr) / 2;
    }
  }
  return eer;
}

evaluation::SubjectEmbeddings subject(const std::string& id, std::vector<model::Embedding> sessions) {
  evaluation::SubjectEmbeddings s{id, {}, std::move(sessions)};
  for (std::size_t i = 0; i < s.sessions.size(); ++i) s.session_ids.push_back(std::to_string(i + 1));
  return s;
}

model::Embedding random_simplex(core::Rng& rng, std::size_t size) {
  model::Embedding e{std::vector<Real>(size)};
  double total = 0;
  for (auto& v : e.values) total += (v = static_cast<Real>(-std::log(1 - rng.uniform())));
  for (auto& v : e.values) v = static_cast<Real>(v / total);
  return e;
}

}  // namespace

TEST_CASE("compute_eer examples") {
  const std::vector<double> low(5, 0.1), high(7, 0.9);
  auto perfect = evaluation::compute_eer(low, high);
  CHECK(perfect.eer == 0);
  CHECK(perfect.threshold >= 0.1);
  CHECK(perfect.threshold < 0.9);
  CHECK_FALSE(perfect.inverted_polarity);

  const std::vector<double> g{0.1, 0.4}, i{0.2, 0.3};
  CHECK(evaluation::compute_eer(g, i).eer == doctest::Approx(0.5));

  const auto inverted = evaluation::compute_eer(high, low);
  CHECK(inverted.eer > 0.5);
  CHECK(inverted.inverted_polarity);

  CHECK_THROWS_AS(evaluation::compute_eer({}, i), ContractError);
  CHECK_THROWS_AS(evaluation::compute_eer(g, {}), ContractError);
}

TEST_CASE("compute_eer agrees with a brute-force sweep") {
  core::Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> genuine(5), impostor(999);
    const double shift = rng.uniform(0, 2);
    for (auto& g : genuine) g = std::abs(rng.normal(0, 1));
    for (auto& s : impostor) s = std::abs(rng.normal(shift, 1));
    // Some coarse quantisation so ties between lists occur.
    if (trial % 3 == 0) {
      for (auto& g : genuine) g = std::round(g * 10) / 10;
      for (auto& s : impostor) s = std::round(s * 10) / 10;
    }
    CHECK(std::abs(evaluation::compute_eer(genuine, impostor).eer - brute_force_eer(genuine, impostor)) <= 1e-9);
  }
}

TEST_CASE("property: EER is invariant under strictly increasing transforms") {
  core::Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> genuine(5 + rng.uniform_index(20)), impostor(10 + rng.uniform_index(200));
    for (auto& g : genuine) g = rng.uniform(0, 1);
    for (auto& s : impostor) s = rng.uniform(0.3, 1.3);
    auto transform = [](std::vector<double> v) {
      for (auto& x : v) x = std::exp(3 * x) + x * x * x;
      return v;
    };
    CHECK(evaluation::compute_eer(genuine, impostor).eer ==
          evaluation::compute_eer(transform(genuine), transform(impostor)).eer);
  }
}

TEST_CASE("average and global EER") {
  const ScoreSet separated_low{"a", {0.1, 0.15, 0.2, 0.12, 0.18}, {0.3, 0.35, 0.4}};
  const ScoreSet separated_high{"b", {0.5, 0.55, 0.6, 0.52, 0.58}, {0.7, 0.75, 0.8}};
  const ScoreSet sets[] = {separated_low, separated_high};
  CHECK(evaluation::average_eer(sets).eer == 0);
  CHECK(evaluation::global_eer(sets).eer > 0);
  CHECK(evaluation::global_eer(sets).policy == evaluation::ThresholdPolicy::kGlobal);
  CHECK(evaluation::average_eer(sets).policy == evaluation::ThresholdPolicy::kAverage);

  const ScoreSet coin{"c", {0.1, 0.4}, {0.2, 0.3}};
  const ScoreSet mixed[] = {separated_low, coin};
  CHECK(evaluation::average_eer(mixed).eer == doctest::Approx(0.25));
  const ScoreSet single[] = {coin};
  CHECK(evaluation::global_eer(single).eer == evaluation::compute_eer(coin.genuine, coin.impostor).eer);
}

TEST_CASE("policy names") {
  CHECK(evaluation::parse_policy("average") == evaluation::ThresholdPolicy::kAverage);
  CHECK(evaluation::parse_policy("global") == evaluation::ThresholdPolicy::kGlobal);
  CHECK(evaluation::parse_policy("both") == evaluation::ThresholdPolicy::kBoth);
  CHECK(evaluation::to_string(evaluation::ThresholdPolicy::kBoth) == "both");
  CHECK_THROWS_AS(evaluation::parse_policy("median"), ConfigError);
}

TEST_CASE("build_scores protocol counts") {
  core::Rng rng(3);
  std::vector<evaluation::SubjectEmbeddings> subjects;
  for (int s = 0; s < 12; ++s) {
    std::vector<model::Embedding> sessions;
    for (int k = 0; k < 15; ++k) sessions.push_back(random_simplex(rng, 8));
    subjects.push_back(subject("u" + std::to_string(s), sessions));
  }
  for (std::size_t e : {1, 5, 10}) {
    const auto scores = evaluation::build_scores(subjects, e);
    REQUIRE(scores.size() == 12);
    for (const auto& set : scores) {
      CHECK(set.genuine.size() == 5);
      CHECK(set.impostor.size() == 11);
      for (double v : set.genuine) CHECK(v >= 0);
    }
  }
  // E=1: genuine score is the raw distance to session 1; impostor probe is
  // the other subject's first test session (index 10 of 15).
  const auto e1 = evaluation::build_scores(subjects, 1);
  CHECK(e1[0].genuine[0] == doctest::Approx(model::distance(subjects[0].sessions[10], subjects[0].sessions[0])));
  CHECK(e1[0].impostor[0] == doctest::Approx(model::distance(subjects[1].sessions[10], subjects[0].sessions[0])));
  // E=2: mean of two distances.
  const auto e2 = evaluation::build_scores(subjects, 2);
  CHECK(e2[3].genuine[4] ==
        doctest::Approx((model::distance(subjects[3].sessions[14], subjects[3].sessions[0]) +
                         model::distance(subjects[3].sessions[14], subjects[3].sessions[1])) / 2));

  CHECK_THROWS_AS(evaluation::build_scores(subjects, 0), ContractError);
  subjects[4].sessions.resize(9);
  CHECK_THROWS_WITH_AS(evaluation::build_scores(subjects, 5), doctest::Contains("u4"), ProtocolError);
  CHECK_NOTHROW(evaluation::build_scores(subjects, 4));
}

TEST_CASE("identical sessions per subject separate perfectly") {
  std::vector<evaluation::SubjectEmbeddings> subjects;
  for (int s = 0; s < 6; ++s) {
    model::Embedding point{std::vector<Real>(6, 0)};
    point.values[s] = 1;
    subjects.push_back(subject("p" + std::to_string(s), std::vector<model::Embedding>(15, point)));
  }
  const auto scores = evaluation::build_scores(subjects, 5);
  for (const auto& set : scores) {
    for (double g : set.genuine) CHECK(g == 0);
    for (double i : set.impostor) CHECK(i > 0);
  }
  CHECK(evaluation::global_eer(scores).eer == 0);
}

TEST_CASE("random embeddings sit at chance") {
  core::Rng rng(4);
  std::vector<evaluation::SubjectEmbeddings> subjects;
  for (int s = 0; s < 50; ++s) {
    std::vector<model::Embedding> sessions;
    for (int k = 0; k < 15; ++k) sessions.push_back(random_simplex(rng, 64));
    subjects.push_back(subject("r" + std::to_string(s), sessions));
  }
  const auto scores = evaluation::build_scores(subjects, 5);
  CHECK(std::abs(evaluation::average_eer(scores).eer - 0.5) <= 0.05);
  CHECK(std::abs(evaluation::global_eer(scores).eer - 0.5) <= 0.05);
}

TEST_CASE("det curve") {
  core::Rng rng(5);
  std::vector<double> genuine(300), impostor(700);
  for (auto& g : genuine) g = rng.uniform(0, 1);
  for (auto& s : impostor) s = rng.uniform(0, 1);
  const auto curve = evaluation::det_curve(genuine, impostor, 200);
  REQUIRE(curve.size() == 200);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].threshold < curve[i - 1].threshold);
    CHECK(curve[i].far <= curve[i - 1].far);
    CHECK(curve[i].frr >= curve[i - 1].frr);
  }
  const double top = std::max(*std::max_element(impostor.begin(), impostor.end()),
                              *std::max_element(genuine.begin(), genuine.end()));
  CHECK(curve.front().threshold == top);
  CHECK(curve.front().far == 1);
  CHECK(curve.front().frr == 0);
  // Chance: some point near the diagonal at one half.
  double nearest = 1;
  for (const auto& p : curve) nearest = std::min(nearest, std::abs(p.far - 0.5) + std::abs(p.frr - 0.5));
  CHECK(nearest < 0.1);

  const std::vector<double> low(5, 0.1), high(5, 0.9);
  const auto perfect = evaluation::det_curve(low, high);
  CHECK(std::any_of(perfect.begin(), perfect.end(), [](const auto& p) { return p.far == 0 && p.frr == 0; }));

  test_support::TempDir dir("det");
  evaluation::write_det_curve(dir / "det.csv", perfect);
  std::ifstream in(dir / "det.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "threshold,far,frr");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == perfect.size());
}

TEST_CASE("score files round trip") {
  test_support::TempDir dir("scores");
  const ScoreSet sets[] = {{"a", {0.1, 0.2, 0.3, 0.4, 0.5}, {0.25, 0.75}},
                           {"b", {0.125, 1.0 / 3, 0.5, 0.6, 0.7}, {0.9, 1e-12}}};
  evaluation::write_scores(dir / "s.jsonl", sets, 5);
  const auto back = evaluation::read_scores(dir / "s.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[1].subject_id == "b");
  CHECK(back[1].genuine == sets[1].genuine);
  CHECK(back[1].impostor == sets[1].impostor);
  std::ifstream in(dir / "s.jsonl");
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::json::parse(line);
  CHECK(j.at("E") == 5);
  CHECK(j.at("type") == "genuine");
}

TEST_CASE("embedding export") {
  test_support::TempDir dir("export");
  const model::ModelConfig config;
  core::Rng init(6);
  const auto weights = model::init_weights(config, init);
  const auto dataset = data::generate_synthetic(10, 15, 60, 6);
  std::vector<data::FeatureSequence> seqs;
  for (const auto& s : dataset.sessions) seqs.push_back(data::extract_features(s));
  const auto subjects = evaluation::embed_subjects(weights, config, seqs);
  REQUIRE(subjects.size() == 10);
  CHECK(subjects[0].sessions.size() == 15);
  evaluation::export_embeddings(dir / "a.csv", subjects);
  evaluation::export_embeddings(dir / "b.csv", evaluation::embed_subjects(weights, config, seqs, 1));

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

  std::ifstream in(dir / "a.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  CHECK(std::count(line.begin(), line.end(), ',') == 65);
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 65);
    std::stringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');
    std::getline(cells, cell, ',');
    double total = 0;
    while (std::getline(cells, cell, ',')) total += std::stod(cell);
    CHECK(std::abs(total - 1) <= 1e-5);
  }
  CHECK(rows == 150);
}
