#pragma once

#include <cstdint>
#include <vector>

#include "nibblegemm/matrix.hpp"
#include "nibblegemm/quant.hpp"

namespace nibblegemm {

inline constexpr std::size_t kPanelWidth = 4;
inline constexpr std::size_t kDepthStep = 2;
inline constexpr int kSmallKernelHeight = 8;
inline constexpr int kBigKernelHeight = 24;

inline constexpr std::size_t round_up(std::size_t value, std::size_t multiple) {
  return (value + multiple - 1) / multiple * multiple;
}

/// Right-hand operand (D x N) in kernel order. Per 4-column panel and per
/// depth pair (k, k+1) the 8 bytes are
///   x(k,c0) x(k+1,c0) x(k,c1) x(k+1,c1) x(k,c2) x(k+1,c2) x(k,c3) x(k+1,c3).
/// Depth is padded to even and columns to a multiple of 4 with zeros.
struct PackedRhs {
  std::vector<std::uint8_t> buffer;
  std::size_t depth = 0;
  std::size_t padded_depth = 0;
  std::size_t cols = 0;
  std::size_t cols_packed = 0;
  std::vector<std::int32_t> col_depth_sums;  // over the original depth only

  const std::uint8_t* panel(std::size_t p) const {
    return buffer.data() + p * padded_depth * kPanelWidth;
  }
  std::size_t panel_count() const { return cols_packed / kPanelWidth; }
};

/// Left-hand operand (M x D) in kernel order.
///
/// Height 8: per panel, rows 0-7 of depth column k, then rows 0-7 of k+1.
/// Height 24: per panel and depth pair (k, k+1), 8-row blocks interleave as
///   rows 0-7 of k, rows 0-7 of k+1, rows 8-15 of k, rows 8-15 of k+1,
///   rows 16-23 of k, rows 16-23 of k+1.
/// Depth is padded to even and rows to a multiple of the height with zeros.
struct PackedLhs {
  std::vector<std::uint8_t> buffer;
  std::size_t depth = 0;
  std::size_t padded_depth = 0;
  std::size_t rows = 0;
  std::size_t rows_packed = 0;
  int kernel_height = kSmallKernelHeight;
  std::vector<std::int32_t> row_depth_sums;

  const std::uint8_t* panel(std::size_t p) const {
    return buffer.data() + p * padded_depth * static_cast<std::size_t>(kernel_height);
  }
  std::size_t panel_count() const { return rows_packed / static_cast<std::size_t>(kernel_height); }
};

/// Byte offset of x(k, j) inside a PackedRhs buffer.
inline std::size_t rhs_offset(std::size_t k, std::size_t j, std::size_t padded_depth) {
  return (j / kPanelWidth) * padded_depth * kPanelWidth + (k / kDepthStep) * 8 +
         (j % kPanelWidth) * 2 + (k % kDepthStep);
}

/// Byte offset of w(i, k) inside a PackedLhs buffer of the given height.
inline std::size_t lhs_offset(std::size_t i, std::size_t k, std::size_t padded_depth, int height) {
  const auto h = static_cast<std::size_t>(height);
  const std::size_t r = i % h;
  return (i / h) * h * padded_depth + (k / kDepthStep) * 2 * h + (r / 8) * 16 +
         (k % kDepthStep) * 8 + (r % 8);
}

PackedRhs pack_rhs(const QuantizedMatrix& x);

/// Throws std::invalid_argument unless kernel_height is 8 or 24.
PackedLhs pack_lhs(const QuantizedMatrix& w, int kernel_height);

/// Packs rows [first_row, first_row + row_count) of w.
PackedLhs pack_lhs_rows(const QuantizedMatrix& w, int kernel_height, std::size_t first_row,
                        std::size_t row_count);

Matrix<std::uint8_t> unpack_rhs(const PackedRhs& packed);
Matrix<std::uint8_t> unpack_lhs(const PackedLhs& packed);

}  // namespace nibblegemm
