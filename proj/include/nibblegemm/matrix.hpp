#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nibblegemm {

/// Dense row-major matrix with value semantics.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<T> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols) {
      throw std::invalid_argument("matrix data length " + std::to_string(data.size()) +
                                  " does not match " + std::to_string(rows) + "x" +
                                  std::to_string(cols));
    }
  }

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool operator==(const Matrix&) const = default;
};

/// Thrown when operand shapes cannot be multiplied or chained.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_inner_match(std::size_t lhs_cols, std::size_t rhs_rows, const char* what) {
  if (lhs_cols != rhs_rows) {
    throw DimensionError(std::string(what) + ": inner dimensions differ (" +
                         std::to_string(lhs_cols) + " vs " + std::to_string(rhs_rows) + ")");
  }
}

}  // namespace nibblegemm
