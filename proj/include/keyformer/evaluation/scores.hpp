#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "keyformer/model/transformer.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace evaluation {

/// Test sessions per subject: always the last five.
inline constexpr std::size_t kTestSessions = 5;

/// Embeddings of one subject's sessions in canonical (chronological) order.
struct SubjectEmbeddings {
  std::string subject_id;
  std::vector<std::string> session_ids;
  std::vector<model::Embedding> sessions;
};

/// Distance scores for one enrolled subject.
struct ScoreSet {
  std::string subject_id;
  std::vector<double> genuine;   // kTestSessions entries
  std::vector<double> impostor;  // one per other subject
};

/// Enrolment is the first `enrolment` sessions of each subject, testing the
/// last kTestSessions. Genuine score t is the mean distance of test session t
/// to the enrolment sessions. Each other subject contributes one impostor
/// probe, its first test session, scored the same way against this subject's
/// enrolment. Throws ProtocolError naming the first subject with fewer than
/// enrolment + kTestSessions sessions.
std::vector<ScoreSet> build_scores(std::span<const SubjectEmbeddings> subjects,
                                   std::size_t enrolment, std::size_t threads = 0);

/// Line-delimited JSON: {"subject_id", "type": "genuine"|"impostor", "E", "score"}.
void write_scores(const std::filesystem::path& path, std::span<const ScoreSet> scores,
                  std::size_t enrolment);
std::vector<ScoreSet> read_scores(const std::filesystem::path& path);

}  // namespace evaluation
KEYFORMER_END_NAMESPACE
