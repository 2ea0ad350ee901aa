#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nibblegemm/matrix.hpp"

namespace nibblegemm {

/// Linear quantization grid for one tensor: real = scale * (q - zero_point).
struct QuantParams {
  double scale = 1.0;
  int zero_point = 0;
  int bits = 4;

  int max_level() const { return (1 << bits) - 1; }
  bool operator==(const QuantParams&) const = default;
};

/// Throws std::invalid_argument unless scale > 0, bits in {4, 8} and the
/// zero point lies on the grid.
void validate(const QuantParams& params);

/// Row-major matrix of quantized levels, one level per byte.
struct QuantizedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> data;
  QuantParams params;

  std::uint8_t operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  Matrix<std::uint8_t> levels() const { return {rows, cols, data}; }
};

/// Builds a QuantizedMatrix from raw levels, checking shape and range.
QuantizedMatrix make_quantized(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> levels,
                               QuantParams params);

/// Grid covering [min(v, 0), max(v, 0)] with 2^bits levels. All-zero input
/// gives scale 1 and zero point 0.
QuantParams compute_quant_params(std::span<const float> values, int bits);
QuantParams compute_quant_params(std::span<const std::int32_t> values, int bits);

/// floor(v / scale) + zero_point, clamped to [0, 2^bits - 1].
std::uint8_t quantize_value(double value, const QuantParams& params);

QuantizedMatrix quantize(std::span<const float> values, std::size_t rows, std::size_t cols,
                         const QuantParams& params);
/// Quantizes a flat array as a 1 x n matrix.
QuantizedMatrix quantize(std::span<const float> values, const QuantParams& params);
/// Computes per-tensor params from the data, then quantizes.
QuantizedMatrix quantize(const Matrix<float>& values, int bits);

/// Levels of integer-valued inputs (used when re-quantizing integer activations).
std::vector<std::uint8_t> quantize_levels(std::span<const std::int32_t> values,
                                          const QuantParams& params);
std::vector<std::uint8_t> quantize_levels(std::span<const float> values,
                                          const QuantParams& params);

double dequantize_value(std::uint8_t level, const QuantParams& params);
std::vector<double> dequantize(const QuantizedMatrix& q);

}  // namespace nibblegemm
