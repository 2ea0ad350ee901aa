#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "nibblegemm/pack.hpp"
#include "support.hpp"

using namespace nibblegemm;
using testing_support::random_levels;

namespace {

QuantizedMatrix numbered(std::size_t rows, std::size_t cols, int bits = 8) {
  std::vector<std::uint8_t> data(rows * cols);
  std::iota(data.begin(), data.end(), 0);
  return make_quantized(rows, cols, std::move(data), QuantParams{1.0, 0, bits});
}

}  // namespace

TEST(PackRhs, FourByFour) {
  const auto p = pack_rhs(numbered(4, 4));
  EXPECT_EQ(p.buffer, (std::vector<std::uint8_t>{0, 4, 1, 5, 2, 6, 3, 7, 8, 12, 9, 13, 10, 14, 11, 15}));
  EXPECT_EQ(p.col_depth_sums, (std::vector<std::int32_t>{24, 28, 32, 36}));
}

TEST(PackRhs, OddDepthIsPadded) {
  const auto p = pack_rhs(make_quantized(1, 4, {1, 2, 3, 4}, QuantParams{}));
  EXPECT_EQ(p.padded_depth, 2u);
  EXPECT_EQ(p.buffer, (std::vector<std::uint8_t>{1, 0, 2, 0, 3, 0, 4, 0}));
}

TEST(PackRhs, ColumnsArePaddedToPanel) {
  const auto p = pack_rhs(make_quantized(2, 1, {9, 7}, QuantParams{}));
  EXPECT_EQ(p.cols_packed, 4u);
  EXPECT_EQ(p.buffer, (std::vector<std::uint8_t>{9, 7, 0, 0, 0, 0, 0, 0}));
  EXPECT_EQ(p.col_depth_sums, (std::vector<std::int32_t>{16}));
}

TEST(PackRhs, Zeros) {
  const auto p = pack_rhs(testing_support::filled(5, 7, 0));
  for (auto b : p.buffer) EXPECT_EQ(b, 0);
  for (auto s : p.col_depth_sums) EXPECT_EQ(s, 0);
}

TEST(PackLhs, SmallKernelSinglePanel) {
  const auto w = numbered(8, 2);
  const auto p = pack_lhs(w, 8);
  std::vector<std::uint8_t> expected;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t r = 0; r < 8; ++r) expected.push_back(w(r, k));
  EXPECT_EQ(p.buffer, expected);
}

TEST(PackLhs, BigKernelInterleavesBlocks) {
  const auto w = numbered(24, 2);
  const auto p = pack_lhs(w, 24);
  std::vector<std::uint8_t> expected;
  for (std::size_t block = 0; block < 3; ++block)
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t r = 0; r < 8; ++r) expected.push_back(w(block * 8 + r, k));
  EXPECT_EQ(p.buffer, expected);
}

TEST(PackLhs, RowSums) {
  const auto p = pack_lhs(numbered(8, 3), 8);
  for (std::size_t r = 0; r < 8; ++r) {
    EXPECT_EQ(p.row_depth_sums[r], static_cast<std::int32_t>(9 * r + 3));
  }
}

TEST(PackLhs, Zeros) {
  const auto p = pack_lhs(testing_support::filled(30, 5, 0), 24);
  EXPECT_EQ(p.rows_packed, 48u);
  for (auto b : p.buffer) EXPECT_EQ(b, 0);
  for (auto s : p.row_depth_sums) EXPECT_EQ(s, 0);
}

TEST(PackLhs, InvalidHeight) {
  const auto w = numbered(4, 4);
  EXPECT_THROW(pack_lhs(w, 16), std::invalid_argument);
  EXPECT_THROW(pack_lhs(w, 0), std::invalid_argument);
}

TEST(PackLhs, RowRange) {
  const auto w = numbered(20, 3);
  const auto p = pack_lhs_rows(w, 8, 8, 8);
  const auto back = unpack_lhs(p);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(back(r, k), w(8 + r, k));
  EXPECT_THROW(pack_lhs_rows(w, 8, 16, 8), std::invalid_argument);
}

TEST(PackRoundTrip, RandomShapes) {
  std::mt19937_64 rng(3);
  for (std::size_t m = 1; m <= 50; m += 7) {
    for (std::size_t d = 1; d <= 9; ++d) {
      const auto w = random_levels(rng, m, d);
      EXPECT_EQ(unpack_lhs(pack_lhs(w, 8)), w.levels());
      EXPECT_EQ(unpack_lhs(pack_lhs(w, 24)), w.levels());
      const auto x = random_levels(rng, d, m);
      EXPECT_EQ(unpack_rhs(pack_rhs(x)), x.levels());
    }
  }
}

TEST(PackOffsets, AgreeWithBuffers) {
  std::mt19937_64 rng(4);
  const auto w = random_levels(rng, 27, 7);
  const auto p = pack_lhs(w, 24);
  for (std::size_t i = 0; i < w.rows; ++i)
    for (std::size_t k = 0; k < w.cols; ++k)
      EXPECT_EQ(p.buffer[lhs_offset(i, k, p.padded_depth, 24)], w(i, k));
  const auto x = random_levels(rng, 7, 9);
  const auto q = pack_rhs(x);
  for (std::size_t k = 0; k < x.rows; ++k)
    for (std::size_t j = 0; j < x.cols; ++j) EXPECT_EQ(q.buffer[rhs_offset(k, j, q.padded_depth)], x(k, j));
}
