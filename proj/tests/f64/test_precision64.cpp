#include <cmath>

#include "doctest.h"
#include "gradient_suite.hpp"
#include "keyformer/model/transformer.hpp"

using namespace keyformer;
using core::Tensor;

static_assert(sizeof(Real) == 8, "this suite runs against the 64-bit build");

TEST_CASE("range pdf matches direct density evaluation") {
  // mu = (0, 2, 4), sigma = 1, L = 5.
  model::RangeEncodingWeights enc{Tensor::vector({0, 2, 4}), Tensor({3}), Tensor({3, 2})};
  enc.raw_stds.fill(std::log(std::expm1(1.0 - model::kStdFloor)));
  core::ParameterTape tape(false);
  const Tensor pdf = model::gaussian_range_pdf(enc, 5, tape).value();
  const double pi = std::acos(-1.0);
  for (int l = 0; l < 5; ++l) {
    double row[3], total = 0;
    for (int g = 0; g < 3; ++g) {
      const double diff = l - 2.0 * g;
      row[g] = std::exp(-diff * diff / 2.0) / std::sqrt(2.0 * pi);
      total += row[g];
    }
    for (int g = 0; g < 3; ++g) CHECK(std::abs(pdf.at(l, g) - row[g] / total) <= 1e-7);
  }
}

TEST_CASE("per-primitive gradients") {
  for (const auto& check : gradient_suite::primitive_checks()) {
    INFO(check.name);
    CHECK(check.error <= 1e-6);
  }
}

TEST_CASE("encoder layer gradient") { CHECK(gradient_suite::encoder_layer_check() <= 1e-5); }

TEST_CASE("end-to-end gradient at tiny config") {
  CHECK(gradient_suite::end_to_end_check(gradient_suite::Loss::kDistance) <= 1e-4);
  double loss = 0;
  CHECK(gradient_suite::end_to_end_check(gradient_suite::Loss::kTriplet, 0, &loss) <= 1e-4);
  CHECK(loss > 0);
}
