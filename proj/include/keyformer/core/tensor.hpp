#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "keyformer/core/precision.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace core {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Dense row-major tensor with value semantics.
///
/// Invariant: element_count(shape()) == size(). Scalars are stored with shape
/// {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, Real value);
  static Tensor scalar(Real value) { return Tensor({1}, {value}); }
  /// Row-major matrix from nested rows; all rows must have equal width.
  static Tensor matrix(std::initializer_list<std::initializer_list<Real>> rows);
  static Tensor vector(std::initializer_list<Real> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }
  Real* raw() noexcept { return data_.data(); }
  const Real* raw() const noexcept { return data_.data(); }

  Real& operator[](std::size_t i) noexcept { return data_[i]; }
  Real operator[](std::size_t i) const noexcept { return data_[i]; }
  /// 2-D element access; requires rank 2.
  Real& at(std::size_t row, std::size_t col);
  Real at(std::size_t row, std::size_t col) const;

  /// Same data under a new shape with the same element count.
  Tensor reshaped(Shape shape) const;
  void fill(Real value);
  bool all_finite() const noexcept;
  Real item() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<Real> data_;
};

}  // namespace core
KEYFORMER_END_NAMESPACE
