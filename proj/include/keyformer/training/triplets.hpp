#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "keyformer/core/rng.hpp"
#include "keyformer/data/keystroke.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace training {

/// Indices into the sequence list the batch was sampled from.
struct Triplet {
  std::size_t anchor;
  std::size_t positive;
  std::size_t negative;
};

struct TripletBatch {
  std::vector<Triplet> triplets;

  std::size_t size() const noexcept { return triplets.size(); }
};

/// Per triplet: anchor subject uniform over subjects with at least two
/// sessions, anchor and positive two distinct uniform sessions of it, negative
/// a uniform session of a uniform other subject. Throws ContractError unless
/// at least two subjects have two or more sessions.
TripletBatch sample_triplets(std::span<const data::SubjectGroup> subjects, std::size_t batch_size,
                             core::Rng& rng);

/// True when every triplet has subject(anchor) == subject(positive) !=
/// subject(negative) and distinct anchor/positive sessions.
bool satisfies_identity_constraints(const TripletBatch& batch,
                                    std::span<const data::FeatureSequence> sequences);

}  // namespace training
KEYFORMER_END_NAMESPACE
