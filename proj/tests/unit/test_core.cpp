#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "keyformer/core/error.hpp"
#include "keyformer/core/ops.hpp"
#include "keyformer/core/parallel.hpp"

using namespace keyformer;
using core::Tensor;
using core::Var;
using test_support::random_tensor;

namespace {

Tensor eval(const Var& v) { return v.value(); }

// Plain triple loop in double.
std::vector<double> matmul_oracle(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) out[i * n + j] += double(a.at(i, p)) * double(b.at(p, j));
  return out;
}

}  // namespace

TEST_CASE("mt19937_64 reference draw") {
  core::Rng rng(5489u);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  CHECK(v == 9981545732273789042ULL);
}

TEST_CASE("rng streams are reproducible and derive separates salts") {
  core::Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(core::Rng::derive(1, {2, 3}) == core::Rng::derive(1, {2, 3}));
  CHECK(core::Rng::derive(1, {2, 3}) != core::Rng::derive(1, {3, 2}));
  CHECK(core::Rng::derive(1, {2}) != core::Rng::derive(1, {2, 0}));
  CHECK(core::Rng::derive(1, {}) != core::Rng::derive(2, {}));
}

TEST_CASE("rng distributions") {
  core::Rng rng(7);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);

  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) ++counts[rng.uniform_index(7)];
  // Binomial(7000, 1/7): sd ~ 29, so +-150 is > 5 sd.
  for (int c : counts) CHECK(std::abs(c - 1000) < 150);
  CHECK_THROWS_AS(rng.uniform_index(0), ContractError);
}

TEST_CASE("tensor basics") {
  Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.shape() == core::Shape{2, 3});
  CHECK(m.at(1, 2) == 6);
  CHECK(m.reshaped({3, 2}).at(2, 1) == 6);
  CHECK_THROWS_AS(m.reshaped({4, 2}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  CHECK(Tensor::scalar(3).item() == 3);
  CHECK_THROWS(m.item());
  Tensor bad = Tensor::vector({1, NAN});
  CHECK_FALSE(bad.all_finite());
  CHECK(core::to_string(m.shape()) == "[2x3]");
}

TEST_CASE("matmul matches triple-loop oracle") {
  core::Rng rng(11);
  for (auto [m, k, n] : {std::array<std::size_t, 3>{1, 1, 1}, {3, 4, 5}, {17, 9, 13}, {64, 33, 20}}) {
    Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    Tensor c = eval(core::matmul(core::constant(a), core::constant(b)));
    const auto expected = matmul_oracle(a, b);
    REQUIRE(c.shape() == core::Shape{m, n});
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(c[i] == doctest::Approx(expected[i]).epsilon(1e-5));
  }
  CHECK_THROWS_AS(core::matmul(core::constant(Tensor::zeros({2, 3})), core::constant(Tensor::zeros({2, 3}))),
                  DimensionError);
}

TEST_CASE("softmax matches exp/sum oracle and is shift invariant") {
  core::Rng rng(3);
  Tensor x = random_tensor({4, 9}, rng, -5, 5);
  Tensor y = eval(core::softmax(core::constant(x)));
  for (std::size_t r = 0; r < 4; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 9; ++c) total += std::exp(double(x.at(r, c)));
    double row_sum = 0;
    for (std::size_t c = 0; c < 9; ++c) {
      CHECK(y.at(r, c) == doctest::Approx(std::exp(double(x.at(r, c))) / total).epsilon(1e-5));
      row_sum += y.at(r, c);
    }
    CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-6));
  }
  // Large logits must not overflow.
  Tensor big = Tensor::matrix({{1000, 1001}});
  Tensor s = eval(core::softmax(core::constant(big)));
  CHECK(s.at(0, 1) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("layer_norm matches direct formula") {
  core::Rng rng(5);
  Tensor x = random_tensor({3, 6}, rng, -2, 2);
  Tensor gain = random_tensor({6}, rng, 0.5, 1.5), bias = random_tensor({6}, rng);
  const double eps = 1e-5;
  Tensor y = eval(core::layer_norm(core::constant(x), core::constant(gain), core::constant(bias),
                                   static_cast<Real>(eps)));
  for (std::size_t r = 0; r < 3; ++r) {
    double mu = 0, var = 0;
    for (std::size_t c = 0; c < 6; ++c) mu += x.at(r, c);
    mu /= 6;
    for (std::size_t c = 0; c < 6; ++c) var += (x.at(r, c) - mu) * (x.at(r, c) - mu);
    var /= 6;
    for (std::size_t c = 0; c < 6; ++c) {
      const double expected = (x.at(r, c) - mu) / std::sqrt(var + eps) * gain[c] + bias[c];
      CHECK(y.at(r, c) == doctest::Approx(expected).epsilon(1e-5));
    }
  }
}

TEST_CASE("conv1d matches explicitly padded sum") {
  core::Rng rng(9);
  for (std::size_t k : {1u, 2u, 3u, 5u, 8u, 13u}) {
    const std::size_t c_in = 3, c_out = 4, len = 7;
    Tensor x = random_tensor({c_in, len}, rng), w = random_tensor({c_out, c_in, k}, rng),
           b = random_tensor({c_out}, rng);
    Tensor y = eval(core::conv1d(core::constant(x), core::constant(w), core::constant(b)));
    REQUIRE(y.shape() == core::Shape{c_out, len});
    // Pad explicitly: floor((k-1)/2) left, ceil right.
    const std::size_t left = (k - 1) / 2;
    std::vector<double> padded(c_in * (len + k - 1), 0.0);
    for (std::size_t c = 0; c < c_in; ++c)
      for (std::size_t t = 0; t < len; ++t) padded[c * (len + k - 1) + left + t] = x.at(c, t);
    for (std::size_t o = 0; o < c_out; ++o) {
      for (std::size_t t = 0; t < len; ++t) {
        double acc = b[o];
        for (std::size_t c = 0; c < c_in; ++c)
          for (std::size_t j = 0; j < k; ++j)
            acc += w[(o * c_in + c) * k + j] * padded[c * (len + k - 1) + t + j];
        CHECK(y.at(o, t) == doctest::Approx(acc).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("conv1d with a kernel longer than the sequence keeps the length") {
  Tensor x = Tensor::matrix({{1, 2, 3}});
  Tensor w = Tensor::zeros({1, 1, 128});
  w[63] = 1;  // centre tap of a 128-wide kernel: left padding is 63
  Tensor y = eval(core::conv1d(core::constant(x), core::constant(w), core::constant(Tensor::zeros({1}))));
  CHECK(y == Tensor::matrix({{1, 2, 3}}));
}

TEST_CASE("elementwise suite") {
  Tensor a = Tensor::matrix({{1, -2}, {3, -4}});
  Tensor b = Tensor::matrix({{0.5, 0.5}, {2, 1}});
  CHECK(eval(core::add(core::constant(a), core::constant(b))) == Tensor::matrix({{1.5, -1.5}, {5, -3}}));
  CHECK(eval(core::sub(core::constant(a), core::constant(b))) == Tensor::matrix({{0.5, -2.5}, {1, -5}}));
  CHECK(eval(core::mul(core::constant(a), core::constant(b))) == Tensor::matrix({{0.5, -1}, {6, -4}}));
  CHECK(eval(core::relu(core::constant(a))) == Tensor::matrix({{1, 0}, {3, 0}}));
  CHECK(eval(core::scale(core::constant(a), 2)) == Tensor::matrix({{2, -4}, {6, -8}}));
  CHECK(eval(core::transpose(core::constant(a))) == Tensor::matrix({{1, 3}, {-2, -4}}));
  CHECK(eval(core::max_pool1d(core::constant(a))) == Tensor::matrix({{1}, {3}}));
  CHECK(eval(core::mean(core::constant(a))).item() == doctest::Approx(-0.5));
  CHECK(eval(core::sum(core::constant(a))).item() == doctest::Approx(-2));
  const Var parts[] = {core::constant(a), core::constant(b)};
  CHECK(eval(core::concat(parts, 0)).shape() == core::Shape{4, 2});
  CHECK(eval(core::concat(parts, 1)) == Tensor::matrix({{1, -2, 0.5, 0.5}, {3, -4, 2, 1}}));
  CHECK(eval(core::slice_cols(core::constant(a), 1, 1)) == Tensor::matrix({{-2}, {-4}}));
  CHECK(eval(core::softplus(core::constant(Tensor::vector({0})))).item() == doctest::Approx(std::log(2.0)));
  CHECK(eval(core::softplus(core::constant(Tensor::vector({100})))).item() == doctest::Approx(100));
  CHECK_THROWS_AS(core::add(core::constant(a), core::constant(Tensor::zeros({3}))), DimensionError);
}

TEST_CASE("non-finite results raise NumericError naming the op") {
  Tensor big = Tensor::vector({3e38f});
  try {
    (void)core::scale(core::constant(big), 10);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("scale") != std::string::npos);
  }
}

TEST_CASE("dropout") {
  core::Rng rng(1);
  Tensor x = Tensor::full({1000}, 1);
  CHECK(eval(core::dropout(core::constant(x), Real(0.5), false, &rng)) == x);
  CHECK(eval(core::dropout(core::constant(x), Real(0), true, &rng)) == x);
  Tensor y = eval(core::dropout(core::constant(x), Real(0.25), true, &rng));
  std::size_t zeros = 0;
  for (Real v : y.data()) {
    if (v == 0) ++zeros;
    else CHECK(v == doctest::Approx(1.0 / 0.75));
  }
  CHECK(zeros > 180);
  CHECK(zeros < 320);
  // Same stream, same mask.
  core::Rng r1(9), r2(9);
  CHECK(eval(core::dropout(core::constant(x), Real(0.5), true, &r1)) ==
        eval(core::dropout(core::constant(x), Real(0.5), true, &r2)));
}

TEST_CASE("backward accumulates over shared subexpressions") {
  Var x = core::leaf(Tensor::vector({2, 3}), true);
  Var y = core::sum(core::mul(x, x));  // d/dx = 2x
  Var z = core::add(y, core::sum(x));  // + 1
  core::backward(z);
  CHECK(x.grad() == Tensor::vector({5, 7}));
  Var unused = core::leaf(Tensor::vector({1}), true);
  CHECK(unused.grad() == Tensor::vector({0}));
  CHECK_THROWS_AS(core::backward(core::mul(x, x)), ContractError);
}

TEST_CASE("parameter tape binds by address") {
  Tensor w = Tensor::vector({1, 2});
  core::ParameterTape tape(true);
  Var a = tape(w);
  Var b = tape(w);
  CHECK(a.node() == b.node());
  core::backward(core::sum(core::mul(a, b)));
  CHECK(tape.gradient(w) == Tensor::vector({2, 4}));
  Tensor never = Tensor::vector({1, 1, 1});
  CHECK(tape.gradient(never) == Tensor::zeros({3}));
  core::ParameterTape frozen(false);
  CHECK_FALSE(frozen(w).requires_grad());
}

TEST_CASE("euclidean distance") {
  Var a = core::constant(Tensor::vector({1, 0, 0}));
  Var b = core::constant(Tensor::vector({0, 1, 0}));
  CHECK(eval(core::euclidean_distance(a, b)).item() == doctest::Approx(std::sqrt(2.0)));
  CHECK(eval(core::euclidean_distance(a, a)).item() == 0);
  // Subgradient at zero distance is zero rather than NaN.
  Var p = core::leaf(Tensor::vector({0.5, 0.5}), true);
  Var q = core::leaf(Tensor::vector({0.5, 0.5}), true);
  core::backward(core::euclidean_distance(p, q));
  CHECK(p.grad() == Tensor::vector({0, 0}));
}

TEST_CASE("parallel_for covers every index once and propagates exceptions") {
  for (std::size_t threads : {1u, 2u, 5u}) {
    std::vector<int> hits(97, 0);
    core::parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; }, threads);
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
  CHECK_THROWS_AS(core::parallel_for(10, [](std::size_t i) {
                    if (i == 7) throw ContractError("boom");
                  }, 3),
                  ContractError);
}
