#include "gradient_suite.hpp"

#include <functional>

#include "keyformer/core/gradcheck.hpp"
#include "keyformer/core/ops.hpp"
#include "keyformer/model/transformer.hpp"
#include "keyformer/training/loss.hpp"

#ifndef KEYFORMER_DOUBLE_PRECISION
#error "gradient_suite must be built against the 64-bit library"
#endif

namespace gradient_suite {

namespace {

using namespace keyformer;
using core::Tensor;
using core::Var;

Tensor random(core::Shape shape, core::Rng& rng, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero so ReLU-like kinks stay out of reach of h.
Tensor away_from_zero(core::Shape shape, core::Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.1, 1.0);
  return t;
}

// Contract an arbitrary output against fixed random weights.
Var project(const Var& out, std::uint64_t seed) {
  if (out.value().size() == 1) return out;
  core::Rng rng(seed);
  return core::sum(core::mul(out, core::constant(random(out.shape(), rng))));
}

}  // namespace

std::vector<Check> primitive_checks() {
  core::Rng rng(2024);
  std::vector<Check> checks;
  auto run = [&](const std::string& name, const Tensor& x, const std::function<Var(const Var&)>& f) {
    checks.push_back({name, core::grad_check([&](const Var& v) { return project(f(v), 99); }, x)});
  };
  const Tensor a = random({4, 6}, rng), b = random({4, 6}, rng);
  const Tensor row = random({6}, rng), right = random({6, 3}, rng), bias3 = random({3}, rng);
  auto c = [](const Tensor& t) { return core::constant(t); };

  run("add", a, [&](const Var& v) { return core::add(v, c(b)); });
  run("sub", a, [&](const Var& v) { return core::sub(c(b), v); });
  run("mul", a, [&](const Var& v) { return core::mul(v, c(b)); });
  run("mul_self", a, [&](const Var& v) { return core::mul(v, v); });
  run("scale", a, [&](const Var& v) { return core::scale(v, -2.5); });
  run("add_scalar", a, [&](const Var& v) { return core::add_scalar(v, 0.75); });
  run("add_row.x", a, [&](const Var& v) { return core::add_row(v, c(row)); });
  run("add_row.bias", row, [&](const Var& v) { return core::add_row(c(a), v); });
  run("matmul.left", a, [&](const Var& v) { return core::matmul(v, c(right)); });
  run("matmul.right", right, [&](const Var& v) { return core::matmul(c(a), v); });
  run("linear.x", a, [&](const Var& v) { return core::linear(v, c(right), c(bias3)); });
  run("linear.weight", right, [&](const Var& v) { return core::linear(c(a), v, c(bias3)); });
  run("linear.bias", bias3, [&](const Var& v) { return core::linear(c(a), c(right), v); });
  run("transpose", a, [&](const Var& v) { return core::transpose(v); });
  run("relu", away_from_zero({4, 6}, rng), [&](const Var& v) { return core::relu(v); });
  run("softplus", random({4, 6}, rng, -4, 4), [&](const Var& v) { return core::softplus(v); });
  run("dropout", a, [&](const Var& v) {
    core::Rng mask(5);
    return core::dropout(v, 0.3, true, &mask);
  });
  run("concat.rows", a, [&](const Var& v) {
    const Var parts[] = {v, c(b), v};
    return core::concat(parts, 0);
  });
  run("concat.cols", a, [&](const Var& v) {
    const Var parts[] = {c(b), v};
    return core::concat(parts, 1);
  });
  run("slice_cols", a, [&](const Var& v) { return core::slice_cols(v, 2, 3); });
  run("max_pool1d", a, [&](const Var& v) { return core::max_pool1d(v); });
  run("sum", a, [&](const Var& v) { return core::sum(v); });
  run("mean", a, [&](const Var& v) { return core::mean(v); });
  run("softmax", random({4, 6}, rng, -3, 3), [&](const Var& v) { return core::softmax(v); });
  const Tensor gain = random({6}, rng, 0.5, 1.5);
  run("layer_norm.x", random({4, 6}, rng, -2, 2),
      [&](const Var& v) { return core::layer_norm(v, c(gain), c(row)); });
  run("layer_norm.gain", gain, [&](const Var& v) { return core::layer_norm(c(a), v, c(row)); });
  run("layer_norm.bias", row, [&](const Var& v) { return core::layer_norm(c(a), c(gain), v); });
  const Tensor signal = random({3, 7}, rng), kernel = random({4, 3, 5}, rng), kbias = random({4}, rng);
  run("conv1d.x", signal, [&](const Var& v) { return core::conv1d(v, c(kernel), c(kbias)); });
  run("conv1d.kernel", kernel, [&](const Var& v) { return core::conv1d(c(signal), v, c(kbias)); });
  run("conv1d.bias", kbias, [&](const Var& v) { return core::conv1d(c(signal), c(kernel), v); });
  const Tensor even_kernel = random({2, 3, 4}, rng);
  run("conv1d.even", signal, [&](const Var& v) { return core::conv1d(v, c(even_kernel), c(Tensor({2}))); });
  const Tensor e1 = random({1, 6}, rng), e2 = random({1, 6}, rng);
  run("euclidean_distance", e1, [&](const Var& v) { return core::euclidean_distance(v, c(e2)); });
  const Tensor means = random({4}, rng, 0, 9), stds = random({4}, rng, 0.5, 3);
  run("gaussian_log_density.means", means,
      [&](const Var& v) { return core::gaussian_log_density(v, c(stds), 10); });
  run("gaussian_log_density.stds", stds,
      [&](const Var& v) { return core::gaussian_log_density(c(means), v, 10); });
  return checks;
}

double encoder_layer_check() {
  model::ModelConfig config = model::ModelConfig::tiny();
  core::Rng rng(31);
  auto weights = model::init_weights(config, rng);
  auto& layer = weights.temporal.layers[0];
  // Non-trivial norm parameters so their gradients are exercised.
  for (auto* norm : {&layer.attention_norm, &layer.scale_norm, &layer.output_norm}) {
    norm->gain = random(norm->gain.shape(), rng, 0.5, 1.5);
    norm->bias = random(norm->bias.shape(), rng, -0.5, 0.5);
  }
  Tensor x = random({config.sequence_length, config.model_width}, rng);

  auto loss = [&](core::ParameterTape& tape, const Var& input) {
    core::Rng mask(17);
    model::ForwardContext ctx{tape, true, &mask};
    return project(model::encoder_layer(input, layer, config.temporal_heads, config, ctx), 3);
  };

  std::vector<Tensor*> targets{&x};
  model::visit_parameters(weights, [&](const std::string& name, Tensor& t) {
    if (name.rfind("temporal.layers.0.", 0) == 0) targets.push_back(&t);
  });
  core::ParameterTape tape(true);
  Var input = core::leaf(x, true);
  core::backward(loss(tape, input));
  std::vector<Tensor> analytic{input.grad()};
  for (std::size_t i = 1; i < targets.size(); ++i) analytic.push_back(tape.gradient(*targets[i]));

  auto f = [&] {
    core::ParameterTape frozen(false);
    return static_cast<double>(loss(frozen, core::constant(x)).value().item());
  };
  return core::grad_check_inplace(f, targets, analytic);
}

double end_to_end_check(Loss kind, std::size_t max_coordinates, double* loss_value) {
  const model::ModelConfig config = model::ModelConfig::tiny();
  core::Rng rng(47);
  auto weights = model::init_weights(config, rng);
  Tensor x[3];
  for (Tensor& t : x) t = random({config.sequence_length, config.channels}, rng, 0, 1);

  auto loss = [&](core::ParameterTape& tape) {
    core::Rng mask(61);
    model::ForwardContext ctx{tape, true, &mask};
    Var e0 = model::forward_embed(weights, config, core::constant(x[0]), ctx);
    Var e1 = model::forward_embed(weights, config, core::constant(x[1]), ctx);
    if (kind == Loss::kDistance) return core::euclidean_distance(e0, e1);
    Var e2 = model::forward_embed(weights, config, core::constant(x[2]), ctx);
    return training::triplet_loss(e0, e1, e2, 1.0);
  };

  core::ParameterTape tape(true);
  Var value = loss(tape);
  if (loss_value != nullptr) *loss_value = value.value().item();
  core::backward(value);
  auto params = model::parameter_list(weights);
  std::vector<Tensor> analytic;
  for (Tensor* p : params) analytic.push_back(tape.gradient(*p));
  auto f = [&] {
    core::ParameterTape frozen(false);
    return static_cast<double>(loss(frozen).value().item());
  };
  return core::grad_check_inplace(f, params, analytic, 1e-5, max_coordinates);
}

}  // namespace gradient_suite
