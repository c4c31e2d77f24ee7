#pragma once

#include "keyformer/core/ops.hpp"
#include "keyformer/model/transformer.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace training {

/// max(0, d(a, p) - d(a, n) + margin) on 1×S embeddings; scalar Var.
core::Var triplet_loss(const core::Var& anchor, const core::Var& positive,
                       const core::Var& negative, double margin);

/// Same value on plain embeddings.
double triplet_loss(const model::Embedding& anchor, const model::Embedding& positive,
                    const model::Embedding& negative, double margin);

}  // namespace training
KEYFORMER_END_NAMESPACE
