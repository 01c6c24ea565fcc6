#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace moelab::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Dense row-major array of doubles. Rank 1 tensors behave as a single row
// for the matrix helpers (rows() == 1, cols() == size()).
//
// Every stored value is finite; constructors and the tape reject NaN/Inf.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> mutable_data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t r, std::size_t c) const;
  double& at(std::size_t r, std::size_t c);
  double item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool flag);

  // Gradient buffer, present once a backward pass has touched this leaf or
  // after ensure_grad().
  bool has_grad() const noexcept { return grad_.has_value(); }
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void ensure_grad();
  void zero_grad();
  void clear_grad() { grad_.reset(); }

  // Throws NumericError naming `what` if any element is NaN/Inf.
  void check_finite(const std::string& what) const;

 private:
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
  std::optional<std::vector<double>> grad_;
};

bool all_finite(std::span<const double> values);

}  // namespace moelab::ad
