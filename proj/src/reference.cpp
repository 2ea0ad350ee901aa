#include "nibblegemm/reference.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

namespace nibblegemm::reference {

namespace {

template <typename Out, typename Acc = Out, typename A, typename B>
Matrix<Out> triple_loop(const Matrix<A>& a, const Matrix<B>& b, const char* what) {
  require_inner_match(a.cols, b.rows, what);
  Matrix<Out> c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      Acc sum = 0;
      for (std::size_t k = 0; k < a.cols; ++k) {
        sum += static_cast<Acc>(a(i, k)) * static_cast<Acc>(b(k, j));
      }
      c(i, j) = static_cast<Out>(sum);
    }
  }
  return c;
}

void check_shape(std::size_t rows, std::size_t cols, std::size_t actual) {
  if (rows * cols != actual) {
    throw DimensionError("oracle comparison: result has " + std::to_string(actual) +
                         " elements, expected " + std::to_string(rows * cols));
  }
}

}  // namespace

Matrix<float> oracle_gemm_f32(const Matrix<float>& a, const Matrix<float>& b) {
  return triple_loop<float, double>(a, b, "oracle_gemm_f32");
}

Matrix<std::int32_t> oracle_gemm_i32(const Matrix<std::int32_t>& a, const Matrix<std::int32_t>& b) {
  return triple_loop<std::int32_t>(a, b, "oracle_gemm_i32");
}

Matrix<std::int32_t> oracle_gemm_i32(const Matrix<std::uint8_t>& a, const Matrix<std::uint8_t>& b) {
  return triple_loop<std::int32_t>(a, b, "oracle_gemm_i32");
}

Matrix<std::int32_t> oracle_quantized_product(const Matrix<std::uint8_t>& w, int z_w,
                                              const Matrix<std::uint8_t>& x, int z_x) {
  require_inner_match(w.cols, x.rows, "oracle_quantized_product");
  Matrix<std::int32_t> c(w.rows, x.cols);
  for (std::size_t i = 0; i < w.rows; ++i) {
    for (std::size_t j = 0; j < x.cols; ++j) {
      std::int32_t sum = 0;
      for (std::size_t k = 0; k < w.cols; ++k) {
        sum += (static_cast<std::int32_t>(w(i, k)) - z_w) * (static_cast<std::int32_t>(x(k, j)) - z_x);
      }
      c(i, j) = sum;
    }
  }
  return c;
}

Matrix<std::int32_t> oracle_quantized_product(const QuantizedMatrix& w, const QuantizedMatrix& x) {
  return oracle_quantized_product(w.levels(), w.params.zero_point, x.levels(), x.params.zero_point);
}

std::string OracleReport::describe() const {
  std::ostringstream os;
  os << (pass ? "pass" : "FAIL") << " max_abs_diff=" << max_abs_diff;
  if (first_mismatch) {
    os << " first_mismatch=(" << first_mismatch->first << ", " << first_mismatch->second << ")";
  }
  return os.str();
}

OracleReport compare_exact(const Matrix<std::int32_t>& expected, std::span<const std::int32_t> actual) {
  check_shape(expected.rows, expected.cols, actual.size());
  OracleReport report;
  for (std::size_t idx = 0; idx < actual.size(); ++idx) {
    const double diff = std::abs(static_cast<double>(actual[idx]) - expected.data[idx]);
    if (diff > report.max_abs_diff) report.max_abs_diff = diff;
    if (diff != 0.0 && !report.first_mismatch) {
      report.first_mismatch = {idx / expected.cols, idx % expected.cols};
    }
  }
  report.pass = report.max_abs_diff == 0.0;
  return report;
}

OracleReport compare_relative(const Matrix<float>& expected, std::span<const float> actual,
                              double rel_tol) {
  check_shape(expected.rows, expected.cols, actual.size());
  OracleReport report;
  for (std::size_t idx = 0; idx < actual.size(); ++idx) {
    const double e = expected.data[idx];
    const double diff = std::abs(static_cast<double>(actual[idx]) - e);
    if (diff > report.max_abs_diff) report.max_abs_diff = diff;
    if (!(diff <= rel_tol * std::max(1.0, std::abs(e)))) {
      report.pass = false;
      if (!report.first_mismatch) report.first_mismatch = {idx / expected.cols, idx % expected.cols};
    }
  }
  return report;
}

}  // namespace nibblegemm::reference
