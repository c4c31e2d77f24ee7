#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "keyformer/evaluation/scores.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace evaluation {

/// Inference-mode embeddings grouped by subject, in first-seen order.
std::vector<SubjectEmbeddings> embed_subjects(const model::ModelWeights& weights,
                                              const model::ModelConfig& config,
                                              std::span<const data::FeatureSequence> sequences,
                                              std::size_t threads = 0);

/// CSV with header subject_id,session_id,e0..e{S-1}; one row per session.
void export_embeddings(const std::filesystem::path& path,
                       std::span<const SubjectEmbeddings> subjects);

}  // namespace evaluation
KEYFORMER_END_NAMESPACE
