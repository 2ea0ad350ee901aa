#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nibblegemm/pack.hpp"
#include "nibblegemm/quant.hpp"

namespace nibblegemm {

/// Width and signedness of the lanes holding the raw product sum.
enum class AccumulatorMode {
  Signed16,          // 4-bit; raw sum must stay below 2^15
  Unsigned16Extended,  // 4-bit; raw sum below 2^16, widened before corrections
  I32,               // 8-bit; 32-bit accumulators
};

const char* to_string(AccumulatorMode mode);
AccumulatorMode accumulator_mode_from_string(const std::string& name);

struct GemmConfig {
  int kernel_height = kBigKernelHeight;
  AccumulatorMode accumulator_mode = AccumulatorMode::Signed16;
  int bits = 4;
};

/// Throws std::invalid_argument on an inconsistent configuration.
void validate(const GemmConfig& config);

/// Whether the depth bound is enforced. Unchecked exists only for timing runs.
enum class OverflowCheck { Enforced, Unchecked };

/// Raised instead of letting a 16- or 32-bit accumulator wrap.
class OverflowRiskError : public std::runtime_error {
 public:
  OverflowRiskError(std::size_t depth, std::size_t limit, const std::string& mode);
  std::size_t depth() const { return depth_; }
  std::size_t limit() const { return limit_; }

 private:
  std::size_t depth_;
  std::size_t limit_;
};

/// Largest depth whose worst-case raw product sum fits the accumulator:
/// floor(acc_max / (2^bits - 1)^2).
std::size_t max_safe_depth(int bits, AccumulatorMode mode);

/// Largest input channel count of a kh x kw convolution for q-bit operands
/// and acc_bits-wide signed accumulators.
std::int64_t conv_channel_limit(int q_bits, int acc_bits, int kh, int kw);

/// Integer result with zero point 0: real value = result_scale * values(i, j).
struct CorrectedResult {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int32_t> values;
  double result_scale = 1.0;

  std::int32_t operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Left operand prepared once for repeated products: packed panels (24-row,
/// then 8-row), the unpacked row tail, row sums and quantization params.
struct PreparedWeights {
  GemmConfig config;
  std::size_t rows = 0;
  std::size_t depth = 0;
  QuantParams params;
  PackedLhs big;    // rows [0, big.rows), height 24; empty for kernel_height 8
  PackedLhs small;  // next rows, height 8
  Matrix<std::uint8_t> tail;  // remaining rows (< 8), or all rows on the 8-bit path
  std::size_t tail_first_row = 0;
  std::vector<std::int32_t> row_depth_sums;
};

PreparedWeights prepare_weights(const QuantizedMatrix& w, const GemmConfig& config);

CorrectedResult qgemm(const PreparedWeights& w, const QuantizedMatrix& x,
                      OverflowCheck check = OverflowCheck::Enforced);

/// 4-bit product through packing and the 16-bit microkernels.
CorrectedResult qgemm(const QuantizedMatrix& w, const QuantizedMatrix& x, const GemmConfig& config,
                      OverflowCheck check = OverflowCheck::Enforced);

/// 8-bit comparison path: plain row loop with 32-bit accumulation.
CorrectedResult qgemm_u8(const QuantizedMatrix& w, const QuantizedMatrix& x);

}  // namespace nibblegemm
