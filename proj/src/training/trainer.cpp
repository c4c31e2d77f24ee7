#include "keyformer/training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "keyformer/core/error.hpp"
#include "keyformer/core/parallel.hpp"
#include "keyformer/evaluation/embeddings.hpp"
#include "keyformer/training/loss.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace training {

namespace {

// Fixed so that the reduction order, and therefore the summed gradient, is
// the same for any thread count.
constexpr std::size_t kGradientChunks = 16;

constexpr std::uint64_t kSampleStream = 0x54524950;   // "TRIP"
constexpr std::uint64_t kDropoutStream = 0x44524F50;  // "DROP"

void accumulate(std::vector<core::Tensor>& into, std::span<const core::Tensor> from) {
  for (std::size_t i = 0; i < into.size(); ++i) {
    Real* dst = into[i].raw();
    const Real* src = from[i].raw();
    for (std::size_t k = 0; k < into[i].size(); ++k) dst[k] += src[k];
  }
}

std::vector<core::Tensor> zero_grads(std::span<const core::Tensor* const> params) {
  std::vector<core::Tensor> out;
  out.reserve(params.size());
  for (const core::Tensor* p : params) out.push_back(core::Tensor::zeros(p->shape()));
  return out;
}

std::vector<std::string> parameter_names(const model::ModelWeights& weights) {
  std::vector<std::string> names;
  model::visit_parameters(weights, [&](const std::string& name, const core::Tensor&) {
    names.push_back(name);
  });
  return names;
}

std::vector<data::FeatureSequence> protocol_sessions(
    std::span<const data::FeatureSequence> sequences, std::size_t max_subjects) {
  constexpr std::size_t kEnrolment = 1;
  std::vector<data::FeatureSequence> out;
  std::size_t taken = 0;
  for (const data::SubjectGroup& g : data::group_by_subject(sequences)) {
    if (taken == max_subjects) break;
    const std::size_t n = g.indices.size();
    if (n < kEnrolment + evaluation::kTestSessions) continue;
    for (std::size_t k = 0; k < kEnrolment; ++k) out.push_back(sequences[g.indices[k]]);
    for (std::size_t k = n - evaluation::kTestSessions; k < n; ++k) {
      out.push_back(sequences[g.indices[k]]);
    }
    ++taken;
  }
  return out;
}

double eer_or_nan(const model::ModelWeights& weights, const model::ModelConfig& config,
                  std::span<const data::FeatureSequence> subset, std::size_t threads) {
  if (subset.empty()) return std::numeric_limits<double>::quiet_NaN();
  return protocol_eer(weights, config, subset, threads).eer;
}

}  // namespace

nlohmann::json to_json(const EpochLog& log) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nullptr; };
  return {{"epoch", log.epoch},
          {"mean_loss", log.mean_loss},
          {"train_eer", finite_or_null(log.train_eer)},
          {"val_eer", finite_or_null(log.val_eer)},
          {"wall_ms", log.wall_ms}};
}

EpochLog epoch_log_from_json(const nlohmann::json& j) {
  auto real_or_nan = [&](const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  EpochLog log;
  log.epoch = j.at("epoch").get<std::size_t>();
  log.mean_loss = j.at("mean_loss").get<double>();
  log.train_eer = real_or_nan("train_eer");
  log.val_eer = real_or_nan("val_eer");
  log.wall_ms = j.at("wall_ms").get<double>();
  return log;
}

BatchGradient batch_gradient(const model::ModelWeights& weights, const model::ModelConfig& config,
                             std::span<const data::FeatureSequence> sequences,
                             const TripletBatch& batch, double margin, std::uint64_t seed,
                             std::size_t epoch, std::size_t batch_index, std::size_t threads) {
  const auto params = model::parameter_list(weights);
  const std::size_t n = batch.size();
  BatchGradient out;
  out.grads = zero_grads(params);
  if (n == 0) return out;

  const std::size_t chunks = std::min(n, kGradientChunks);
  std::vector<std::vector<core::Tensor>> partial(chunks);
  std::vector<double> partial_loss(chunks, 0.0);
  core::parallel_for(
      chunks,
      [&](std::size_t c) {
        partial[c] = zero_grads(params);
        for (std::size_t t = c * n / chunks; t < (c + 1) * n / chunks; ++t) {
          const Triplet& triplet = batch.triplets[t];
          core::ParameterTape tape(true);
          core::Rng rng(core::Rng::derive(seed, {kDropoutStream, epoch, batch_index, t}));
          model::ForwardContext ctx{tape, true, &rng};
          auto run = [&](std::size_t index) {
            return model::forward_embed(weights, config,
                                        core::reference(sequences[index].values, false), ctx);
          };
          const core::Var anchor = run(triplet.anchor);
          const core::Var positive = run(triplet.positive);
          const core::Var negative = run(triplet.negative);
          const core::Var loss = triplet_loss(anchor, positive, negative, margin);
          const double value = loss.value().item();
          if (!std::isfinite(value)) {
            throw NumericError("triplet " + std::to_string(t) + " of batch " +
                               std::to_string(batch_index) + " produced a non-finite loss");
          }
          partial_loss[c] += value;
          if (value > 0) {
            core::backward(loss);
            for (std::size_t i = 0; i < params.size(); ++i) {
              const core::Tensor g = tape.gradient(*params[i]);
              Real* dst = partial[c][i].raw();
              for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
            }
          }
        }
      },
      threads);

  double total = 0;
  for (std::size_t c = 0; c < chunks; ++c) {
    accumulate(out.grads, partial[c]);
    total += partial_loss[c];
  }
  const Real inv = static_cast<Real>(1.0 / static_cast<double>(n));
  for (core::Tensor& g : out.grads) {
    for (Real& v : g.data()) v *= inv;
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

evaluation::EERResult protocol_eer(const model::ModelWeights& weights,
                                   const model::ModelConfig& config,
                                   std::span<const data::FeatureSequence> sequences,
                                   std::size_t threads) {
  const auto subset = protocol_sessions(sequences, std::numeric_limits<std::size_t>::max());
  if (subset.empty()) {
    throw ProtocolError("no subject has enough sessions for an E=1 evaluation");
  }
  const auto embedded = evaluation::embed_subjects(weights, config, subset, threads);
  if (embedded.size() < 2) throw ProtocolError("EER evaluation needs at least 2 subjects");
  const auto scores = evaluation::build_scores(embedded, 1, threads);
  evaluation::EERResult result = evaluation::global_eer(scores);
  result.enrolment = 1;
  return result;
}

Checkpoint initial_checkpoint(const model::ModelConfig& config, const TrainConfig& train) {
  config.validate();
  train.validate();
  core::Rng rng(train.seed);
  Checkpoint cp;
  cp.model_config = config;
  cp.train_config = train;
  cp.weights = model::init_weights(config, rng);
  return cp;
}

TrainResult train(Checkpoint start, std::span<const data::FeatureSequence> train_set,
                  std::span<const data::FeatureSequence> validation_set,
                  const TrainOptions& options) {
  start.model_config.validate();
  const TrainConfig& cfg = start.train_config;
  cfg.validate();
  if (validation_set.empty()) throw ContractError("train: validation split is empty");
  const core::Shape expected{start.model_config.sequence_length, start.model_config.channels};
  for (const auto* set : {&train_set, &validation_set}) {
    for (const data::FeatureSequence& s : *set) {
      if (s.values.shape() != expected) {
        throw ContractError("train: session " + s.subject_id + "/" + s.session_id + " is " +
                            core::to_string(s.values.shape()) + " but the model expects " +
                            core::to_string(expected));
      }
    }
  }
  const auto groups = data::group_by_subject(train_set);
  const auto validation = protocol_sessions(validation_set, std::numeric_limits<std::size_t>::max());
  if (validation.empty()) {
    throw ProtocolError("train: no validation subject has the 6 sessions an E=1 evaluation needs");
  }
  const auto train_probe = protocol_sessions(train_set, cfg.train_eval_subjects);
  const std::vector<std::string> names = parameter_names(start.weights);

  if (!start.adam) {
    start.adam = AdamState::zeros_like(model::parameter_list(std::as_const(start.weights)));
  }
  const AdamHyper hyper{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon};

  TrainResult result;
  result.best = start;
  if (start.epoch > 0 && options.best_path && std::filesystem::exists(*options.best_path)) {
    result.best = load_checkpoint(*options.best_path, start.model_config);
  }
  double best_eer =
      std::isnan(start.best_validation_eer) ? INFINITY : start.best_validation_eer;

  std::ofstream log_file;
  if (options.log_path) {
    log_file.open(*options.log_path, start.epoch > 0 ? std::ios::app : std::ios::trunc);
    if (!log_file) throw IoError("cannot write training log " + options.log_path->string());
  }

  Checkpoint current = std::move(start);
  const auto params = model::parameter_list(current.weights);
  for (std::size_t epoch = current.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    const auto began = std::chrono::steady_clock::now();
    double loss_total = 0;
    for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
      core::Rng rng(core::Rng::derive(cfg.seed, {kSampleStream, epoch, b}));
      const TripletBatch batch = sample_triplets(groups, cfg.batch_size, rng);
      BatchGradient grad = batch_gradient(current.weights, current.model_config, train_set, batch,
                                          cfg.margin, cfg.seed, epoch, b, options.threads);
      for (std::size_t i = 0; i < grad.grads.size(); ++i) {
        if (!grad.grads[i].all_finite()) {
          throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                             ": non-finite gradient for " + names[i]);
        }
      }
      adam_step(params, grad.grads, *current.adam, hyper);
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->all_finite()) {
          throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                             ": parameter " + names[i] + " became non-finite");
        }
      }
      loss_total += grad.loss;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss =
        cfg.batches_per_epoch == 0 ? 0.0 : loss_total / static_cast<double>(cfg.batches_per_epoch);
    const evaluation::EERResult val =
        protocol_eer(current.weights, current.model_config, validation, options.threads);
    entry.val_eer = val.eer;
    entry.train_eer =
        eer_or_nan(current.weights, current.model_config, train_probe, options.threads);
    current.epoch = epoch;

    if (val.eer < best_eer) {
      best_eer = val.eer;
      result.best = current;
      result.best.best_validation_eer = val.eer;
      result.best.global_threshold = val.threshold;
      if (options.best_path) save_checkpoint(result.best, *options.best_path);
    }
    current.best_validation_eer = std::isfinite(best_eer) ? best_eer : current.best_validation_eer;
    current.global_threshold = result.best.global_threshold;
    if (options.last_path) save_checkpoint(current, *options.last_path);

    entry.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              began)
                        .count();
    if (log_file.is_open()) {
      log_file << to_json(entry).dump() << '\n';
      log_file.flush();
    }
    result.log.push_back(entry);
    if (options.on_epoch) options.on_epoch(entry);
  }
  result.last = std::move(current);
  return result;
}

}  // namespace training
KEYFORMER_END_NAMESPACE
