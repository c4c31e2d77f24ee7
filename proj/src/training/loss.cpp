#include "keyformer/training/loss.hpp"

#include <algorithm>

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace training {

core::Var triplet_loss(const core::Var& anchor, const core::Var& positive,
                       const core::Var& negative, double margin) {
  if (anchor.shape() != positive.shape() || anchor.shape() != negative.shape()) {
    throw DimensionError("triplet_loss: embedding shapes " + core::to_string(anchor.shape()) +
                         ", " + core::to_string(positive.shape()) + ", " +
                         core::to_string(negative.shape()) + " differ");
  }
  core::Var gap = core::sub(core::euclidean_distance(anchor, positive),
                            core::euclidean_distance(anchor, negative));
  return core::relu(core::add_scalar(gap, static_cast<Real>(margin)));
}

double triplet_loss(const model::Embedding& anchor, const model::Embedding& positive,
                    const model::Embedding& negative, double margin) {
  return std::max(0.0, model::distance(anchor, positive) - model::distance(anchor, negative) +
                           margin);
}

}  // namespace training
KEYFORMER_END_NAMESPACE
