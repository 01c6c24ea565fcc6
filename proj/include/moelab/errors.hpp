#pragma once

#include <stdexcept>
#include <string>

namespace moelab {

// Shape or dimension disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Token id, vertex or element index outside its valid range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Caller violated a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A NaN or infinity reached a stored value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An expert of the memorizer could not fit its routed subset.
class FitError : public std::runtime_error {
 public:
  FitError(std::size_t expert, std::size_t subset_size, const std::string& what)
      : std::runtime_error(what), expert_(expert), subset_size_(subset_size) {}
  std::size_t expert() const noexcept { return expert_; }
  std::size_t subset_size() const noexcept { return subset_size_; }

 private:
  std::size_t expert_;
  std::size_t subset_size_;
};

// Training loss became non-finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace moelab
