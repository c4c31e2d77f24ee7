#include "keyformer/training/triplets.hpp"

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace training {

TripletBatch sample_triplets(std::span<const data::SubjectGroup> subjects, std::size_t batch_size,
                             core::Rng& rng) {
  std::vector<std::size_t> eligible;
  std::vector<std::size_t> populated;
  std::vector<std::size_t> slot(subjects.size(), 0);
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].indices.size() >= 2) eligible.push_back(i);
    if (!subjects[i].indices.empty()) {
      slot[i] = populated.size();
      populated.push_back(i);
    }
  }
  if (eligible.size() < 2) {
    throw ContractError("sample_triplets needs at least 2 subjects with 2+ sessions, found " +
                        std::to_string(eligible.size()));
  }
  TripletBatch batch;
  batch.triplets.reserve(batch_size);
  for (std::size_t t = 0; t < batch_size; ++t) {
    const std::size_t a = eligible[rng.uniform_index(eligible.size())];
    const auto& own = subjects[a].indices;
    const std::size_t i = rng.uniform_index(own.size());
    std::size_t j = rng.uniform_index(own.size() - 1);
    if (j >= i) ++j;
    // Uniform over the other populated subjects: draw one of the remaining
    // slots and step over the anchor's own.
    std::size_t n = rng.uniform_index(populated.size() - 1);
    if (n >= slot[a]) ++n;
    const auto& other = subjects[populated[n]].indices;
    batch.triplets.push_back({own[i], own[j], other[rng.uniform_index(other.size())]});
  }
  return batch;
}

bool satisfies_identity_constraints(const TripletBatch& batch,
                                    std::span<const data::FeatureSequence> sequences) {
  for (const Triplet& t : batch.triplets) {
    if (t.anchor >= sequences.size() || t.positive >= sequences.size() ||
        t.negative >= sequences.size())
      return false;
    if (t.anchor == t.positive) return false;
    const auto& subject = sequences[t.anchor].subject_id;
    if (sequences[t.positive].subject_id != subject) return false;
    if (sequences[t.negative].subject_id == subject) return false;
  }
  return true;
}

}  // namespace training
KEYFORMER_END_NAMESPACE
