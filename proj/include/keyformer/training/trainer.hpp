#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "keyformer/data/keystroke.hpp"
#include "keyformer/evaluation/eer.hpp"
#include "keyformer/training/checkpoint.hpp"
#include "keyformer/training/triplets.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace training {

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0;
  /// NaN when not computed.
  double train_eer = std::numeric_limits<double>::quiet_NaN();
  double val_eer = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0;
};

nlohmann::json to_json(const EpochLog& log);
EpochLog epoch_log_from_json(const nlohmann::json& j);

struct TrainOptions {
  /// Best-so-far checkpoint, rewritten on every strict validation improvement.
  std::optional<std::filesystem::path> best_path;
  /// Checkpoint of the most recent epoch, used to resume.
  std::optional<std::filesystem::path> last_path;
  /// JSONL epoch log; appended to when resuming.
  std::optional<std::filesystem::path> log_path;
  std::size_t threads = 0;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  Checkpoint best;
  /// State after the final epoch.
  Checkpoint last;
  std::vector<EpochLog> log;
};

/// Mean triplet loss and parameter gradients for one batch. Triplets are
/// split into a fixed number of chunks reduced in order, so the result does
/// not depend on the thread count. Dropout in triplet t draws from
/// Rng::derive(seed, {epoch, batch, t}).
struct BatchGradient {
  double loss = 0;
  std::vector<core::Tensor> grads;  // parameter_list order
};
BatchGradient batch_gradient(const model::ModelWeights& weights, const model::ModelConfig& config,
                             std::span<const data::FeatureSequence> sequences,
                             const TripletBatch& batch, double margin, std::uint64_t seed,
                             std::size_t epoch, std::size_t batch_index, std::size_t threads = 0);

/// Global EER at E=1 over the inference embeddings of every subject with
/// enough sessions for the protocol. Only the sessions the protocol reads are
/// embedded.
evaluation::EERResult protocol_eer(const model::ModelWeights& weights, const model::ModelConfig& config,
                    std::span<const data::FeatureSequence> sequences, std::size_t threads = 0);

/// Epoch loop starting from `start` (fresh weights with epoch 0, or a resumed
/// checkpoint). Per epoch: batches_per_epoch triplet batches sampled from
/// Rng::derive(seed, {epoch, batch}), one Adam step each, then validation
/// Global EER at E=1; the best checkpoint moves on strict improvement.
/// Throws NumericError naming the offending tensor on a non-finite loss or
/// gradient.
TrainResult train(Checkpoint start, std::span<const data::FeatureSequence> train_set,
                  std::span<const data::FeatureSequence> validation_set,
                  const TrainOptions& options = {});

/// Fresh checkpoint with init_weights(config, Rng(train.seed)).
Checkpoint initial_checkpoint(const model::ModelConfig& config, const TrainConfig& train);

}  // namespace training
KEYFORMER_END_NAMESPACE
