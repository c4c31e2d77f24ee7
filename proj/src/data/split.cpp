#include "keyformer/data/split.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace data {

DatasetSplit split_subjects(std::span<const std::string> subjects, const SplitSizes& sizes,
                            core::Rng& rng) {
  const std::size_t requested = sizes.train + sizes.validation + sizes.test;
  std::vector<std::string> pool(subjects.begin(), subjects.end());
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  if (requested > pool.size()) {
    throw ContractError("split requests " + std::to_string(requested) + " subjects but only " +
                        std::to_string(pool.size()) + " are available");
  }
  for (std::size_t i = pool.size(); i > 1; --i) {
    std::swap(pool[i - 1], pool[rng.uniform_index(i)]);
  }
  DatasetSplit split;
  auto take = [&, next = std::size_t{0}](std::vector<std::string>& into, std::size_t n) mutable {
    into.assign(pool.begin() + static_cast<std::ptrdiff_t>(next),
                pool.begin() + static_cast<std::ptrdiff_t>(next + n));
    next += n;
  };
  take(split.train, sizes.train);
  take(split.validation, sizes.validation);
  take(split.test, sizes.test);
  return split;
}

std::vector<std::string> read_subject_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open subject list " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

DatasetSplit split_from_lists(const std::filesystem::path& train,
                              const std::filesystem::path& validation,
                              const std::filesystem::path& test) {
  DatasetSplit split{read_subject_list(train), read_subject_list(validation),
                     read_subject_list(test)};
  std::unordered_set<std::string> seen;
  for (const auto* list : {&split.train, &split.validation, &split.test}) {
    for (const std::string& id : *list) {
      if (!seen.insert(id).second) {
        throw ContractError("subject '" + id + "' appears in more than one split list");
      }
    }
  }
  return split;
}

std::vector<FeatureSequence> select_subjects(std::span<const FeatureSequence> sequences,
                                             std::span<const std::string> subjects) {
  const std::unordered_set<std::string> wanted(subjects.begin(), subjects.end());
  std::vector<FeatureSequence> out;
  for (const FeatureSequence& s : sequences) {
    if (wanted.contains(s.subject_id)) out.push_back(s);
  }
  return out;
}

}  // namespace data
KEYFORMER_END_NAMESPACE
