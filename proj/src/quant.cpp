#include "nibblegemm/quant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nibblegemm {

namespace {

// Absorbs the last-ulp error of v / scale so that values lying exactly on a
// grid step never floor to the step below.
constexpr double kFloorSlack = 1e-9;

void check_bits(int bits) {
  if (bits != 4 && bits != 8) {
    throw std::invalid_argument("quantization bits must be 4 or 8, got " + std::to_string(bits));
  }
}

template <typename T>
QuantParams params_from_range(std::span<const T> values, int bits) {
  check_bits(bits);
  if (values.empty()) throw std::invalid_argument("cannot quantize an empty tensor");

  double lo = 0.0;
  double hi = 0.0;
  for (const T v : values) {
    const double d = static_cast<double>(v);
    if (!std::isfinite(d)) throw std::invalid_argument("cannot quantize non-finite values");
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }

  QuantParams p;
  p.bits = bits;
  if (hi == lo) {
    return p;  // all zeros
  }
  p.scale = (hi - lo) / static_cast<double>(p.max_level());
  p.zero_point = static_cast<int>(-std::floor(lo / p.scale + kFloorSlack));
  p.zero_point = std::clamp(p.zero_point, 0, p.max_level());
  return p;
}

template <typename T>
std::vector<std::uint8_t> levels_of(std::span<const T> values, const QuantParams& params) {
  std::vector<std::uint8_t> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [&](T v) { return quantize_value(static_cast<double>(v), params); });
  return out;
}

}  // namespace

void validate(const QuantParams& params) {
  check_bits(params.bits);
  if (!(params.scale > 0.0) || !std::isfinite(params.scale)) {
    throw std::invalid_argument("quantization scale must be positive and finite");
  }
  if (params.zero_point < 0 || params.zero_point > params.max_level()) {
    throw std::invalid_argument("zero point " + std::to_string(params.zero_point) +
                                " outside [0, " + std::to_string(params.max_level()) + "]");
  }
}

QuantizedMatrix make_quantized(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> levels,
                               QuantParams params) {
  validate(params);
  if (levels.size() != rows * cols) {
    throw DimensionError("quantized data length does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  const int top = params.max_level();
  if (std::any_of(levels.begin(), levels.end(), [top](std::uint8_t v) { return v > top; })) {
    throw std::invalid_argument("quantized level exceeds 2^bits - 1");
  }
  return QuantizedMatrix{rows, cols, std::move(levels), params};
}

QuantParams compute_quant_params(std::span<const float> values, int bits) {
  return params_from_range(values, bits);
}

QuantParams compute_quant_params(std::span<const std::int32_t> values, int bits) {
  return params_from_range(values, bits);
}

std::uint8_t quantize_value(double value, const QuantParams& params) {
  const double level = std::floor(value / params.scale + kFloorSlack) + params.zero_point;
  return static_cast<std::uint8_t>(std::clamp(level, 0.0, static_cast<double>(params.max_level())));
}

QuantizedMatrix quantize(std::span<const float> values, std::size_t rows, std::size_t cols,
                         const QuantParams& params) {
  validate(params);
  if (values.size() != rows * cols) {
    throw DimensionError("value count does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  return QuantizedMatrix{rows, cols, levels_of(values, params), params};
}

QuantizedMatrix quantize(std::span<const float> values, const QuantParams& params) {
  return quantize(values, 1, values.size(), params);
}

QuantizedMatrix quantize(const Matrix<float>& values, int bits) {
  const auto params = compute_quant_params(values.data, bits);
  return quantize(values.data, values.rows, values.cols, params);
}

std::vector<std::uint8_t> quantize_levels(std::span<const std::int32_t> values,
                                          const QuantParams& params) {
  return levels_of(values, params);
}

std::vector<std::uint8_t> quantize_levels(std::span<const float> values,
                                          const QuantParams& params) {
  return levels_of(values, params);
}

double dequantize_value(std::uint8_t level, const QuantParams& params) {
  return params.scale * static_cast<double>(static_cast<int>(level) - params.zero_point);
}

std::vector<double> dequantize(const QuantizedMatrix& q) {
  std::vector<double> out(q.data.size());
  std::transform(q.data.begin(), q.data.end(), out.begin(),
                 [&](std::uint8_t v) { return dequantize_value(v, q.params); });
  return out;
}

}  // namespace nibblegemm
