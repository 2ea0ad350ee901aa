#include "nibblegemm/kernel.hpp"

#include <stdexcept>
#include <string>

#if defined(__SSSE3__)
#include <immintrin.h>
#endif

namespace nibblegemm {

AccumulatorTile::AccumulatorTile(int height) : height_(height) {
  if (height != kSmallKernelHeight && height != kBigKernelHeight) {
    throw std::invalid_argument("accumulator tile height must be 8 or 24, got " +
                                std::to_string(height));
  }
}

namespace {

void check_panels(const AccumulatorTile& tile, std::span<const std::uint8_t> lhs,
                  std::span<const std::uint8_t> rhs, std::size_t depth) {
  if (depth % kDepthStep != 0) {
    throw std::invalid_argument("microkernel depth must be even (pad the operands)");
  }
  if (lhs.size() < depth * static_cast<std::size_t>(tile.height()) ||
      rhs.size() < depth * kPanelWidth) {
    throw std::invalid_argument("microkernel panel shorter than depth");
  }
}

#if defined(__SSSE3__)

// One depth pair for one 8-row block: lhs16 holds rows 0-7 of column k then
// rows 0-7 of column k+1. Interleaving yields (w(r,k), w(r,k+1)) byte pairs so
// that maddubs against a broadcast (x(k,c), x(k+1,c)) pair is a widening
// multiply of both depth levels into one 16-bit lane.
inline __m128i interleave_pair(__m128i lhs16) {
  return _mm_unpacklo_epi8(lhs16, _mm_unpackhi_epi64(lhs16, lhs16));
}

template <int Blocks>
void kernel_ssse3_pairs(__m128i (&acc)[Blocks][4], const std::uint8_t* lhs,
                        const std::uint8_t* rhs, std::size_t first_pair, std::size_t pairs) {
  const __m128i sel0 = _mm_set1_epi16(0x0100);
  const __m128i sel1 = _mm_set1_epi16(0x0302);
  const __m128i sel2 = _mm_set1_epi16(0x0504);
  const __m128i sel3 = _mm_set1_epi16(0x0706);
  for (std::size_t q = first_pair; q < first_pair + pairs; ++q) {
    const __m128i r = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(rhs + q * 8));
    const __m128i b0 = _mm_shuffle_epi8(r, sel0);
    const __m128i b1 = _mm_shuffle_epi8(r, sel1);
    const __m128i b2 = _mm_shuffle_epi8(r, sel2);
    const __m128i b3 = _mm_shuffle_epi8(r, sel3);
    for (int b = 0; b < Blocks; ++b) {
      const __m128i l = interleave_pair(_mm_loadu_si128(
          reinterpret_cast<const __m128i*>(lhs + q * 16 * Blocks + static_cast<std::size_t>(b) * 16)));
      acc[b][0] = _mm_add_epi16(acc[b][0], _mm_maddubs_epi16(l, b0));
      acc[b][1] = _mm_add_epi16(acc[b][1], _mm_maddubs_epi16(l, b1));
      acc[b][2] = _mm_add_epi16(acc[b][2], _mm_maddubs_epi16(l, b2));
      acc[b][3] = _mm_add_epi16(acc[b][3], _mm_maddubs_epi16(l, b3));
    }
  }
}

#if defined(__AVX2__)

// Two depth pairs per step: the low 128-bit lane carries pair q, the high lane
// pair q+1. The lanes are folded together at the end; 16-bit wraparound makes
// the split sum identical to the sequential one.
template <int Blocks>
void kernel_avx2_pairs(__m128i (&out)[Blocks][4], const std::uint8_t* lhs, const std::uint8_t* rhs,
                       std::size_t pairs) {
  const __m256i sel0 = _mm256_setr_epi64x(0x0100010001000100LL, 0x0100010001000100LL,
                                          0x0908090809080908LL, 0x0908090809080908LL);
  const __m256i sel1 = _mm256_add_epi8(sel0, _mm256_set1_epi8(2));
  const __m256i sel2 = _mm256_add_epi8(sel0, _mm256_set1_epi8(4));
  const __m256i sel3 = _mm256_add_epi8(sel0, _mm256_set1_epi8(6));

  __m256i acc[Blocks][4];
  for (int b = 0; b < Blocks; ++b)
    for (int c = 0; c < 4; ++c) acc[b][c] = _mm256_setzero_si256();

  for (std::size_t q = 0; q + 2 <= pairs; q += 2) {
    const __m256i r = _mm256_broadcastsi128_si256(
        _mm_loadu_si128(reinterpret_cast<const __m128i*>(rhs + q * 8)));
    const __m256i b0 = _mm256_shuffle_epi8(r, sel0);
    const __m256i b1 = _mm256_shuffle_epi8(r, sel1);
    const __m256i b2 = _mm256_shuffle_epi8(r, sel2);
    const __m256i b3 = _mm256_shuffle_epi8(r, sel3);
    for (int b = 0; b < Blocks; ++b) {
      const std::uint8_t* base = lhs + q * 16 * Blocks + static_cast<std::size_t>(b) * 16;
      const __m256i raw = _mm256_set_m128i(
          _mm_loadu_si128(reinterpret_cast<const __m128i*>(base + 16 * Blocks)),
          _mm_loadu_si128(reinterpret_cast<const __m128i*>(base)));
      const __m256i l = _mm256_unpacklo_epi8(raw, _mm256_unpackhi_epi64(raw, raw));
      acc[b][0] = _mm256_add_epi16(acc[b][0], _mm256_maddubs_epi16(l, b0));
      acc[b][1] = _mm256_add_epi16(acc[b][1], _mm256_maddubs_epi16(l, b1));
      acc[b][2] = _mm256_add_epi16(acc[b][2], _mm256_maddubs_epi16(l, b2));
      acc[b][3] = _mm256_add_epi16(acc[b][3], _mm256_maddubs_epi16(l, b3));
    }
  }
  for (int b = 0; b < Blocks; ++b) {
    for (int c = 0; c < 4; ++c) {
      const __m128i folded = _mm_add_epi16(_mm256_castsi256_si128(acc[b][c]),
                                           _mm256_extracti128_si256(acc[b][c], 1));
      out[b][c] = _mm_add_epi16(out[b][c], folded);
    }
  }
}

#endif

template <int Blocks>
void kernel_simd(AccumulatorTile& tile, const std::uint8_t* lhs, const std::uint8_t* rhs,
                 std::size_t depth) {
  __m128i acc[Blocks][4];
  for (int c = 0; c < 4; ++c)
    for (int b = 0; b < Blocks; ++b)
      acc[b][c] = _mm_loadu_si128(reinterpret_cast<const __m128i*>(tile.column(c) + b * 8));

  const std::size_t pairs = depth / kDepthStep;
  std::size_t done = 0;
#if defined(__AVX2__)
  done = pairs & ~std::size_t{1};
  kernel_avx2_pairs<Blocks>(acc, lhs, rhs, done);
#endif
  kernel_ssse3_pairs<Blocks>(acc, lhs, rhs, done, pairs - done);

  for (int c = 0; c < 4; ++c)
    for (int b = 0; b < Blocks; ++b)
      _mm_storeu_si128(reinterpret_cast<__m128i*>(tile.column(c) + b * 8), acc[b][c]);
}

#endif

}  // namespace

void microkernel_scalar(AccumulatorTile& tile, std::span<const std::uint8_t> lhs_panel,
                        std::span<const std::uint8_t> rhs_panel, std::size_t depth) {
  check_panels(tile, lhs_panel, rhs_panel, depth);
  const int height = tile.height();
  for (std::size_t k = 0; k < depth; k += kDepthStep) {
    for (int c = 0; c < AccumulatorTile::width(); ++c) {
      const unsigned x0 = rhs_panel[rhs_offset(k, static_cast<std::size_t>(c), depth)];
      const unsigned x1 = rhs_panel[rhs_offset(k + 1, static_cast<std::size_t>(c), depth)];
      for (int r = 0; r < height; ++r) {
        const unsigned w0 = lhs_panel[lhs_offset(static_cast<std::size_t>(r), k, depth, height)];
        const unsigned w1 = lhs_panel[lhs_offset(static_cast<std::size_t>(r), k + 1, depth, height)];
        tile.at(r, c) = static_cast<std::uint16_t>(tile.at(r, c) + w0 * x0 + w1 * x1);
      }
    }
  }
}

void microkernel(AccumulatorTile& tile, std::span<const std::uint8_t> lhs_panel,
                 std::span<const std::uint8_t> rhs_panel, std::size_t depth) {
#if defined(__SSSE3__)
  check_panels(tile, lhs_panel, rhs_panel, depth);
  if (tile.height() == kBigKernelHeight) {
    kernel_simd<3>(tile, lhs_panel.data(), rhs_panel.data(), depth);
  } else {
    kernel_simd<1>(tile, lhs_panel.data(), rhs_panel.data(), depth);
  }
#else
  microkernel_scalar(tile, lhs_panel, rhs_panel, depth);
#endif
}

const char* microkernel_isa() {
#if defined(__AVX2__)
  return "avx2";
#elif defined(__SSSE3__)
  return "ssse3";
#else
  return "scalar";
#endif
}

}  // namespace nibblegemm
