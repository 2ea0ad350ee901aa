#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "nibblegemm/matrix.hpp"
#include "nibblegemm/quant.hpp"

// Brute-force oracles. Nothing here may use packing, kernels or the
// correction-term decomposition; they exist to check those.
namespace nibblegemm::reference {

Matrix<float> oracle_gemm_f32(const Matrix<float>& a, const Matrix<float>& b);

Matrix<std::int32_t> oracle_gemm_i32(const Matrix<std::int32_t>& a, const Matrix<std::int32_t>& b);
Matrix<std::int32_t> oracle_gemm_i32(const Matrix<std::uint8_t>& a, const Matrix<std::uint8_t>& b);

/// sum_k (w(i,k) - z_w) * (x(k,j) - z_x), evaluated directly.
Matrix<std::int32_t> oracle_quantized_product(const Matrix<std::uint8_t>& w, int z_w,
                                              const Matrix<std::uint8_t>& x, int z_x);
Matrix<std::int32_t> oracle_quantized_product(const QuantizedMatrix& w, const QuantizedMatrix& x);

struct OracleReport {
  double max_abs_diff = 0.0;
  std::optional<std::pair<std::size_t, std::size_t>> first_mismatch;
  bool pass = true;

  std::string describe() const;
};

/// Exact comparison; `actual` is row-major with the expected shape.
OracleReport compare_exact(const Matrix<std::int32_t>& expected, std::span<const std::int32_t> actual);

/// |a - e| <= rel_tol * max(1, |e|) per element.
OracleReport compare_relative(const Matrix<float>& expected, std::span<const float> actual,
                              double rel_tol = 1e-5);

}  // namespace nibblegemm::reference
