#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "keyformer/core/rng.hpp"
#include "keyformer/data/keystroke.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace data {

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

/// Shuffles the sorted subject list with `rng` and deals out the requested
/// sizes. Throws ContractError when the sizes exceed the subject count.
DatasetSplit split_subjects(std::span<const std::string> subjects, const SplitSizes& sizes,
                            core::Rng& rng);

/// Split taken verbatim from three subject-list files (one id per line).
/// Throws ContractError when the lists overlap.
DatasetSplit split_from_lists(const std::filesystem::path& train,
                              const std::filesystem::path& validation,
                              const std::filesystem::path& test);

std::vector<std::string> read_subject_list(const std::filesystem::path& path);

/// Sequences whose subject is in `subjects`, in their original order.
std::vector<FeatureSequence> select_subjects(std::span<const FeatureSequence> sequences,
                                             std::span<const std::string> subjects);

}  // namespace data
KEYFORMER_END_NAMESPACE
