#include "keyformer/evaluation/scores.hpp"

#include <fstream>
#include <unordered_map>

#include "json.hpp"
#include "keyformer/core/error.hpp"
#include "keyformer/core/parallel.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace evaluation {

namespace {

double mean_distance(const model::Embedding& probe,
                     std::span<const model::Embedding> enrolment) {
  double total = 0;
  for (const model::Embedding& e : enrolment) total += model::distance(probe, e);
  return total / static_cast<double>(enrolment.size());
}

}  // namespace

std::vector<ScoreSet> build_scores(std::span<const SubjectEmbeddings> subjects,
                                   std::size_t enrolment, std::size_t threads) {
  if (enrolment == 0) throw ContractError("enrolment session count must be >= 1");
  for (const SubjectEmbeddings& s : subjects) {
    if (s.sessions.size() < enrolment + kTestSessions) {
      throw ProtocolError("subject " + s.subject_id + " has " +
                          std::to_string(s.sessions.size()) + " sessions; E=" +
                          std::to_string(enrolment) + " needs at least " +
                          std::to_string(enrolment + kTestSessions));
    }
  }
  std::vector<ScoreSet> out(subjects.size());
  core::parallel_for(
      subjects.size(),
      [&](std::size_t i) {
        const SubjectEmbeddings& target = subjects[i];
        const std::span<const model::Embedding> enrol(target.sessions.data(), enrolment);
        ScoreSet& set = out[i];
        set.subject_id = target.subject_id;
        const std::size_t first_test = target.sessions.size() - kTestSessions;
        for (std::size_t t = first_test; t < target.sessions.size(); ++t) {
          set.genuine.push_back(mean_distance(target.sessions[t], enrol));
        }
        set.impostor.reserve(subjects.size() - 1);
        for (std::size_t j = 0; j < subjects.size(); ++j) {
          if (j == i) continue;
          const SubjectEmbeddings& other = subjects[j];
          const model::Embedding& probe = other.sessions[other.sessions.size() - kTestSessions];
          set.impostor.push_back(mean_distance(probe, enrol));
        }
      },
      threads);
  return out;
}

void write_scores(const std::filesystem::path& path, std::span<const ScoreSet> scores,
                  std::size_t enrolment) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scores file " + path.string());
  auto emit = [&](const std::string& subject, const char* type, double score) {
    nlohmann::json j = {{"subject_id", subject}, {"type", type}, {"E", enrolment}, {"score", score}};
    out << j.dump() << '\n';
  };
  for (const ScoreSet& s : scores) {
    for (double g : s.genuine) emit(s.subject_id, "genuine", g);
    for (double m : s.impostor) emit(s.subject_id, "impostor", m);
  }
  if (!out) throw IoError("error writing scores file " + path.string());
}

std::vector<ScoreSet> read_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scores file " + path.string());
  std::vector<ScoreSet> out;
  std::unordered_map<std::string, std::size_t> slot;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto subject = j.at("subject_id").get<std::string>();
      const auto type = j.at("type").get<std::string>();
      const double score = j.at("score").get<double>();
      auto [it, inserted] = slot.try_emplace(subject, out.size());
      if (inserted) out.push_back({subject, {}, {}});
      if (type == "genuine") out[it->second].genuine.push_back(score);
      else if (type == "impostor") out[it->second].impostor.push_back(score);
      else throw SchemaError("unknown score type '" + type + "'");
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace evaluation
KEYFORMER_END_NAMESPACE
