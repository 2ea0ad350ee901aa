#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "nibblegemm/quant.hpp"

using namespace nibblegemm;

TEST(QuantParams, SpansNegativeAndPositive) {
  const std::vector<float> v{-1.0f, 2.0f};
  const auto p = compute_quant_params(v, 4);
  EXPECT_NEAR(p.scale, 0.2, 1e-7);
  EXPECT_EQ(p.zero_point, 5);
  EXPECT_EQ(p.bits, 4);
}

TEST(QuantParams, ExactRangeGivesUnitScale) {
  const std::vector<float> v{0.0f, 15.0f};
  const auto p = compute_quant_params(v, 4);
  EXPECT_DOUBLE_EQ(p.scale, 1.0);
  EXPECT_EQ(p.zero_point, 0);
}

TEST(QuantParams, AllZeroIsDegenerate) {
  const std::vector<float> v{0.0f, 0.0f, 0.0f};
  const auto p = compute_quant_params(v, 4);
  EXPECT_DOUBLE_EQ(p.scale, 1.0);
  EXPECT_EQ(p.zero_point, 0);
}

TEST(QuantParams, PositiveOnlyRangeStillContainsZero) {
  const std::vector<float> v{3.0f, 6.0f};
  const auto p = compute_quant_params(v, 4);
  EXPECT_NEAR(p.scale, 6.0 / 15.0, 1e-7);
  EXPECT_EQ(p.zero_point, 0);
}

TEST(QuantParams, NegativeOnlyRangePutsZeroAtTop) {
  const std::vector<float> v{-3.0f, -1.5f};
  const auto p = compute_quant_params(v, 4);
  EXPECT_EQ(p.zero_point, 15);
}

TEST(QuantParams, IntegerInput) {
  const std::vector<std::int32_t> v{-10, 20};
  const auto p = compute_quant_params(v, 4);
  EXPECT_DOUBLE_EQ(p.scale, 2.0);
  EXPECT_EQ(p.zero_point, 5);
}

TEST(QuantParams, Errors) {
  EXPECT_THROW(compute_quant_params(std::span<const float>{}, 4), std::invalid_argument);
  const std::vector<float> nan{1.0f, std::numeric_limits<float>::quiet_NaN()};
  EXPECT_THROW(compute_quant_params(nan, 4), std::invalid_argument);
  const std::vector<float> inf{std::numeric_limits<float>::infinity()};
  EXPECT_THROW(compute_quant_params(inf, 4), std::invalid_argument);
  const std::vector<float> ok{1.0f};
  EXPECT_THROW(compute_quant_params(ok, 3), std::invalid_argument);
  EXPECT_THROW(validate(QuantParams{0.0, 0, 4}), std::invalid_argument);
  EXPECT_THROW(validate(QuantParams{1.0, 16, 4}), std::invalid_argument);
}

TEST(Quantize, Examples) {
  const std::vector<float> v{-1.0f, 2.0f};
  const auto q = quantize(v, QuantParams{0.2, 5, 4});
  EXPECT_EQ(q.data, (std::vector<std::uint8_t>{0, 15}));
  EXPECT_EQ(q.rows, 1u);
  EXPECT_EQ(q.cols, 2u);

  const std::vector<float> zero{0.0f};
  EXPECT_EQ(quantize(zero, QuantParams{1.0, 0, 4}).data, (std::vector<std::uint8_t>{0}));

  const std::vector<float> wide{0.0f, 255.0f};
  EXPECT_EQ(quantize(wide, QuantParams{1.0, 0, 8}).data, (std::vector<std::uint8_t>{0, 255}));
}

TEST(Quantize, ClampsOutOfRange) {
  const QuantParams p{1.0, 0, 4};
  EXPECT_EQ(quantize_value(-3.0, p), 0);
  EXPECT_EQ(quantize_value(99.0, p), 15);
}

TEST(Quantize, ShapeMismatch) {
  const std::vector<float> v{1.0f, 2.0f, 3.0f};
  EXPECT_THROW(quantize(v, 2, 2, QuantParams{}), std::invalid_argument);
}

TEST(Quantize, MakeQuantizedRejectsLevelsAboveGrid) {
  EXPECT_THROW(make_quantized(1, 1, {16}, QuantParams{}), std::invalid_argument);
  EXPECT_NO_THROW(make_quantized(1, 1, {15}, QuantParams{}));
}

TEST(Dequantize, Examples) {
  const auto a = dequantize(make_quantized(1, 2, {0, 15}, QuantParams{0.2, 5, 4}));
  EXPECT_NEAR(a[0], -1.0, 1e-12);
  EXPECT_NEAR(a[1], 2.0, 1e-12);
  EXPECT_EQ(dequantize(make_quantized(1, 1, {0}, QuantParams{1.0, 0, 4}))[0], 0.0);
  EXPECT_EQ(dequantize(make_quantized(1, 1, {7}, QuantParams{0.5, 7, 4}))[0], 0.0);
}

TEST(QuantizeProperty, RoundTripZeroAndOrder) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const int bits = trial % 2 ? 8 : 4;
    const float lo = std::uniform_real_distribution<float>(-50.0f, 5.0f)(rng);
    const float hi = lo + std::uniform_real_distribution<float>(0.0f, 60.0f)(rng);
    std::uniform_real_distribution<float> dist(lo, hi);
    std::vector<float> v(1 + trial % 37);
    for (auto& x : v) x = dist(rng);
    v.push_back(0.0f);
    const auto p = compute_quant_params(v, bits);
    const auto q = quantize(v, p);
    const auto back = dequantize(q);
    for (std::size_t i = 0; i < v.size(); ++i) {
      ASSERT_LT(std::abs(back[i] - v[i]), p.scale) << "trial " << trial << " index " << i;
    }
    EXPECT_EQ(back.back(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[i] <= v[j]) ASSERT_LE(q.data[i], q.data[j]);
      }
    }
  }
}

TEST(QuantizeLevels, IntegerActivationsMatchFloatPath) {
  const std::vector<std::int32_t> ints{-7, 0, 3, 12, 40};
  const std::vector<float> floats{-7.0f, 0.0f, 3.0f, 12.0f, 40.0f};
  const auto p = compute_quant_params(ints, 4);
  EXPECT_EQ(quantize_levels(ints, p), quantize_levels(floats, p));
}

TEST(QuantizeMatrix, ComputesParamsFromData) {
  const Matrix<float> m(2, 2, std::vector<float>{-1.0f, 0.0f, 1.0f, 2.0f});
  const auto q = quantize(m, 4);
  EXPECT_EQ(q.rows, 2u);
  EXPECT_EQ(q.cols, 2u);
  EXPECT_EQ(q.params.zero_point, 5);
  EXPECT_EQ(q.data[1], 5);
}
