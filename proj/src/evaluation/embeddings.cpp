#include "keyformer/evaluation/embeddings.hpp"

#include <cstdio>
#include <fstream>

#include "keyformer/core/error.hpp"
#include "keyformer/core/parallel.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace evaluation {

std::vector<SubjectEmbeddings> embed_subjects(const model::ModelWeights& weights,
                                              const model::ModelConfig& config,
                                              std::span<const data::FeatureSequence> sequences,
                                              std::size_t threads) {
  std::vector<model::Embedding> embeddings(sequences.size());
  core::parallel_for(
      sequences.size(),
      [&](std::size_t i) { embeddings[i] = model::embed(weights, config, sequences[i]); },
      threads);
  std::vector<SubjectEmbeddings> out;
  for (const data::SubjectGroup& group : data::group_by_subject(sequences)) {
    SubjectEmbeddings s;
    s.subject_id = group.subject_id;
    for (std::size_t idx : group.indices) {
      s.session_ids.push_back(sequences[idx].session_id);
      s.sessions.push_back(std::move(embeddings[idx]));
    }
    out.push_back(std::move(s));
  }
  return out;
}

void export_embeddings(const std::filesystem::path& path,
                       std::span<const SubjectEmbeddings> subjects) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings file " + path.string());
  const std::size_t width =
      subjects.empty() || subjects.front().sessions.empty() ? 0
                                                            : subjects.front().sessions.front().size();
  out << "subject_id,session_id";
  for (std::size_t i = 0; i < width; ++i) out << ",e" << i;
  out << '\n';
  char buffer[32];
  for (const SubjectEmbeddings& s : subjects) {
    for (std::size_t k = 0; k < s.sessions.size(); ++k) {
      out << s.subject_id << ',' << s.session_ids[k];
      for (Real v : s.sessions[k].values) {
        std::snprintf(buffer, sizeof(buffer), ",%.9g", static_cast<double>(v));
        out << buffer;
      }
      out << '\n';
    }
  }
  if (!out) throw IoError("error writing embeddings file " + path.string());
}

}  // namespace evaluation
KEYFORMER_END_NAMESPACE
