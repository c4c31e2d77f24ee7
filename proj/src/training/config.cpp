#include "keyformer/training/config.hpp"

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace training {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid train config: " + what); };
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (!(margin >= 0)) fail("margin must be >= 0");
  if (!(learning_rate > 0)) fail("learning_rate must be > 0");
  if (!(beta1 >= 0 && beta1 < 1)) fail("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) fail("beta2 must lie in [0, 1)");
  if (!(epsilon > 0)) fail("epsilon must be > 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batches_per_epoch", c.batches_per_epoch},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"margin", c.margin},
       {"seed", c.seed},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"epsilon", c.epsilon},
       {"train_eval_subjects", c.train_eval_subjects}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batches_per_epoch = j.value("batches_per_epoch", c.batches_per_epoch);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.margin = j.value("margin", c.margin);
  c.seed = j.value("seed", c.seed);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.train_eval_subjects = j.value("train_eval_subjects", c.train_eval_subjects);
}

}  // namespace training
KEYFORMER_END_NAMESPACE
