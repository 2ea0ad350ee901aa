#include "nibblegemm/pack.hpp"

#include <stdexcept>
#include <string>

namespace nibblegemm {

namespace {

void check_height(int kernel_height) {
  if (kernel_height != kSmallKernelHeight && kernel_height != kBigKernelHeight) {
    throw std::invalid_argument("kernel height must be 8 or 24, got " +
                                std::to_string(kernel_height));
  }
}

}  // namespace

PackedRhs pack_rhs(const QuantizedMatrix& x) {
  PackedRhs out;
  out.depth = x.rows;
  out.padded_depth = round_up(x.rows, kDepthStep);
  out.cols = x.cols;
  out.cols_packed = round_up(x.cols, kPanelWidth);
  out.buffer.assign(out.padded_depth * out.cols_packed, 0);
  out.col_depth_sums.assign(x.cols, 0);

  for (std::size_t k = 0; k < x.rows; ++k) {
    const std::uint8_t* row = x.data.data() + k * x.cols;
    for (std::size_t j = 0; j < x.cols; ++j) {
      out.buffer[rhs_offset(k, j, out.padded_depth)] = row[j];
      out.col_depth_sums[j] += row[j];
    }
  }
  return out;
}

PackedLhs pack_lhs_rows(const QuantizedMatrix& w, int kernel_height, std::size_t first_row,
                        std::size_t row_count) {
  check_height(kernel_height);
  if (first_row + row_count > w.rows) {
    throw DimensionError("row range exceeds left operand");
  }
  PackedLhs out;
  out.depth = w.cols;
  out.padded_depth = round_up(w.cols, kDepthStep);
  out.rows = row_count;
  out.rows_packed = round_up(row_count, static_cast<std::size_t>(kernel_height));
  out.kernel_height = kernel_height;
  out.buffer.assign(out.rows_packed * out.padded_depth, 0);
  out.row_depth_sums.assign(row_count, 0);

  for (std::size_t i = 0; i < row_count; ++i) {
    const std::uint8_t* row = w.data.data() + (first_row + i) * w.cols;
    std::int32_t sum = 0;
    for (std::size_t k = 0; k < w.cols; ++k) {
      out.buffer[lhs_offset(i, k, out.padded_depth, kernel_height)] = row[k];
      sum += row[k];
    }
    out.row_depth_sums[i] = sum;
  }
  return out;
}

PackedLhs pack_lhs(const QuantizedMatrix& w, int kernel_height) {
  return pack_lhs_rows(w, kernel_height, 0, w.rows);
}

Matrix<std::uint8_t> unpack_rhs(const PackedRhs& packed) {
  Matrix<std::uint8_t> out(packed.depth, packed.cols);
  for (std::size_t k = 0; k < packed.depth; ++k) {
    for (std::size_t j = 0; j < packed.cols; ++j) {
      out(k, j) = packed.buffer[rhs_offset(k, j, packed.padded_depth)];
    }
  }
  return out;
}

Matrix<std::uint8_t> unpack_lhs(const PackedLhs& packed) {
  Matrix<std::uint8_t> out(packed.rows, packed.depth);
  for (std::size_t i = 0; i < packed.rows; ++i) {
    for (std::size_t k = 0; k < packed.depth; ++k) {
      out(i, k) = packed.buffer[lhs_offset(i, k, packed.padded_depth, packed.kernel_height)];
    }
  }
  return out;
}

}  // namespace nibblegemm
