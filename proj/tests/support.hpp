#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "nibblegemm/quant.hpp"

namespace testing_support {

inline nibblegemm::QuantizedMatrix random_levels(std::mt19937_64& rng, std::size_t rows,
                                                 std::size_t cols, int bits = 4) {
  const int top = (1 << bits) - 1;
  std::uniform_int_distribution<int> level(0, top);
  std::vector<std::uint8_t> data(rows * cols);
  for (auto& v : data) v = static_cast<std::uint8_t>(level(rng));
  nibblegemm::QuantParams p;
  p.bits = bits;
  p.zero_point = level(rng);
  p.scale = std::uniform_real_distribution<double>(0.01, 2.0)(rng);
  return nibblegemm::make_quantized(rows, cols, std::move(data), p);
}

inline nibblegemm::QuantizedMatrix filled(std::size_t rows, std::size_t cols, std::uint8_t value,
                                          int zero_point = 0, int bits = 4) {
  nibblegemm::QuantParams p;
  p.bits = bits;
  p.zero_point = zero_point;
  return nibblegemm::make_quantized(rows, cols, std::vector<std::uint8_t>(rows * cols, value), p);
}

}  // namespace testing_support
