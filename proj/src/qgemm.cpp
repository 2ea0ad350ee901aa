#include "nibblegemm/qgemm.hpp"

#include <algorithm>
#include <limits>

#include "nibblegemm/kernel.hpp"

namespace nibblegemm {

const char* to_string(AccumulatorMode mode) {
  switch (mode) {
    case AccumulatorMode::Signed16: return "signed16";
    case AccumulatorMode::Unsigned16Extended: return "unsigned16_extended";
    case AccumulatorMode::I32: return "i32";
  }
  return "?";
}

AccumulatorMode accumulator_mode_from_string(const std::string& name) {
  if (name == "signed16") return AccumulatorMode::Signed16;
  if (name == "unsigned16_extended") return AccumulatorMode::Unsigned16Extended;
  if (name == "i32") return AccumulatorMode::I32;
  throw std::invalid_argument("unknown accumulator mode '" + name + "'");
}

void validate(const GemmConfig& config) {
  if (config.kernel_height != kSmallKernelHeight && config.kernel_height != kBigKernelHeight) {
    throw std::invalid_argument("kernel height must be 8 or 24, got " +
                                std::to_string(config.kernel_height));
  }
  const bool wide = config.accumulator_mode == AccumulatorMode::I32;
  if ((config.bits == 8) != wide || (config.bits != 4 && config.bits != 8)) {
    throw std::invalid_argument(std::string("accumulator mode ") + to_string(config.accumulator_mode) +
                                " is not valid for " + std::to_string(config.bits) + "-bit operands");
  }
}

OverflowRiskError::OverflowRiskError(std::size_t depth, std::size_t limit, const std::string& mode)
    : std::runtime_error("overflow risk: depth " + std::to_string(depth) + " exceeds the " + mode +
                         " accumulator bound of " + std::to_string(limit)),
      depth_(depth),
      limit_(limit) {}

std::size_t max_safe_depth(int bits, AccumulatorMode mode) {
  validate(GemmConfig{kSmallKernelHeight, mode, bits});
  const std::int64_t level = (std::int64_t{1} << bits) - 1;
  std::int64_t acc_max = 0;
  switch (mode) {
    case AccumulatorMode::Signed16: acc_max = std::numeric_limits<std::int16_t>::max(); break;
    case AccumulatorMode::Unsigned16Extended: acc_max = std::numeric_limits<std::uint16_t>::max(); break;
    case AccumulatorMode::I32: acc_max = std::numeric_limits<std::int32_t>::max(); break;
  }
  return static_cast<std::size_t>(acc_max / (level * level));
}

std::int64_t conv_channel_limit(int q_bits, int acc_bits, int kh, int kw) {
  if (kh < 1 || kw < 1) throw std::invalid_argument("kernel extent must be at least 1x1");
  if (q_bits < 1 || acc_bits < 2 || acc_bits > 62) {
    throw std::invalid_argument("unsupported bit widths for channel limit");
  }
  const std::int64_t level = (std::int64_t{1} << q_bits) - 1;
  const std::int64_t depth_limit = ((std::int64_t{1} << (acc_bits - 1)) - 1) / (level * level);
  return depth_limit / (std::int64_t{kh} * kw);
}

PreparedWeights prepare_weights(const QuantizedMatrix& w, const GemmConfig& config) {
  validate(config);
  if (w.params.bits != config.bits) {
    throw std::invalid_argument("left operand is " + std::to_string(w.params.bits) +
                                "-bit but the configuration expects " + std::to_string(config.bits));
  }
  PreparedWeights out;
  out.config = config;
  out.rows = w.rows;
  out.depth = w.cols;
  out.params = w.params;

  std::size_t next = 0;
  if (config.bits == 4) {
    if (config.kernel_height == kBigKernelHeight) {
      const std::size_t big_rows = w.rows / kBigKernelHeight * kBigKernelHeight;
      out.big = pack_lhs_rows(w, kBigKernelHeight, 0, big_rows);
      next = big_rows;
    } else {
      out.big = pack_lhs_rows(w, kBigKernelHeight, 0, 0);
    }
    const std::size_t small_rows = (w.rows - next) / kSmallKernelHeight * kSmallKernelHeight;
    out.small = pack_lhs_rows(w, kSmallKernelHeight, next, small_rows);
    next += small_rows;
  }
  out.tail_first_row = next;
  const std::size_t tail_rows = w.rows - next;
  out.tail = Matrix<std::uint8_t>(
      tail_rows, w.cols,
      std::vector<std::uint8_t>(w.data.begin() + static_cast<std::ptrdiff_t>(next * w.cols), w.data.end()));

  out.row_depth_sums.reserve(w.rows);
  out.row_depth_sums.insert(out.row_depth_sums.end(), out.big.row_depth_sums.begin(),
                            out.big.row_depth_sums.end());
  out.row_depth_sums.insert(out.row_depth_sums.end(), out.small.row_depth_sums.begin(),
                            out.small.row_depth_sums.end());
  for (std::size_t i = 0; i < tail_rows; ++i) {
    std::int32_t sum = 0;
    for (std::size_t k = 0; k < w.cols; ++k) sum += out.tail(i, k);
    out.row_depth_sums.push_back(sum);
  }
  return out;
}

namespace {

inline std::int32_t widen(std::uint16_t raw, AccumulatorMode mode) {
  if (mode == AccumulatorMode::Signed16) return static_cast<std::int16_t>(raw);
  return raw;
}

void run_panels(const PackedLhs& lhs, std::size_t first_row, const PackedRhs& rhs,
                AccumulatorMode mode, CorrectedResult& out) {
  if (lhs.rows == 0) return;
  const int height = lhs.kernel_height;
  const std::size_t depth = rhs.padded_depth;
  AccumulatorTile tile(height);
  for (std::size_t pc = 0; pc < rhs.panel_count(); ++pc) {
    const std::span<const std::uint8_t> rhs_panel(rhs.panel(pc), depth * kPanelWidth);
    const std::size_t col0 = pc * kPanelWidth;
    const int valid_cols = static_cast<int>(std::min(kPanelWidth, out.cols - col0));
    for (std::size_t pr = 0; pr < lhs.panel_count(); ++pr) {
      tile.clear();
      microkernel(tile, {lhs.panel(pr), depth * static_cast<std::size_t>(height)}, rhs_panel, depth);
      const std::size_t row0 = first_row + pr * static_cast<std::size_t>(height);
      for (int c = 0; c < valid_cols; ++c) {
        for (int r = 0; r < height; ++r) {
          out.values[(row0 + static_cast<std::size_t>(r)) * out.cols + col0 + static_cast<std::size_t>(c)] =
              widen(tile.at(r, c), mode);
        }
      }
    }
  }
}

// Rows left over after the panel kernels, same 16-bit lane arithmetic.
void run_scalar_rows(const Matrix<std::uint8_t>& rows, std::size_t first_row,
                     const QuantizedMatrix& x, AccumulatorMode mode, CorrectedResult& out) {
  std::vector<std::uint16_t> acc(x.cols);
  for (std::size_t i = 0; i < rows.rows; ++i) {
    std::fill(acc.begin(), acc.end(), std::uint16_t{0});
    for (std::size_t k = 0; k < rows.cols; ++k) {
      const unsigned wik = rows(i, k);
      const std::uint8_t* xrow = x.data.data() + k * x.cols;
      for (std::size_t j = 0; j < x.cols; ++j) {
        acc[j] = static_cast<std::uint16_t>(acc[j] + wik * xrow[j]);
      }
    }
    std::int32_t* dst = out.values.data() + (first_row + i) * out.cols;
    for (std::size_t j = 0; j < x.cols; ++j) dst[j] = widen(acc[j], mode);
  }
}

void run_i32_rows(const Matrix<std::uint8_t>& rows, const QuantizedMatrix& x,
                  CorrectedResult& out) {
  for (std::size_t i = 0; i < rows.rows; ++i) {
    std::int32_t* dst = out.values.data() + i * out.cols;
    for (std::size_t k = 0; k < rows.cols; ++k) {
      const std::int32_t wik = rows(i, k);
      if (wik == 0) continue;
      const std::uint8_t* xrow = x.data.data() + k * x.cols;
      for (std::size_t j = 0; j < x.cols; ++j) {
        dst[j] += wik * xrow[j];
      }
    }
  }
}

std::vector<std::int32_t> column_depth_sums(const QuantizedMatrix& x) {
  std::vector<std::int32_t> sums(x.cols, 0);
  for (std::size_t k = 0; k < x.rows; ++k) {
    const std::uint8_t* row = x.data.data() + k * x.cols;
    for (std::size_t j = 0; j < x.cols; ++j) sums[j] += row[j];
  }
  return sums;
}

// raw - z_w * colsum - z_x * rowsum + D * z_w * z_x, in place.
void apply_corrections(CorrectedResult& out, const std::vector<std::int32_t>& row_sums,
                       const std::vector<std::int32_t>& col_sums, std::int64_t depth, std::int64_t z_w,
                       std::int64_t z_x) {
  const std::int64_t constant = depth * z_w * z_x;
  for (std::size_t i = 0; i < out.rows; ++i) {
    const std::int64_t row_term = constant - z_x * row_sums[i];
    std::int32_t* dst = out.values.data() + i * out.cols;
    for (std::size_t j = 0; j < out.cols; ++j) {
      dst[j] = static_cast<std::int32_t>(dst[j] + row_term - z_w * col_sums[j]);
    }
  }
}

}  // namespace

CorrectedResult qgemm(const PreparedWeights& w, const QuantizedMatrix& x, OverflowCheck check) {
  require_inner_match(w.depth, x.rows, "qgemm");
  if (x.params.bits != w.config.bits) {
    throw std::invalid_argument("right operand is " + std::to_string(x.params.bits) +
                                "-bit but the configuration expects " + std::to_string(w.config.bits));
  }
  const AccumulatorMode mode = w.config.accumulator_mode;
  const std::size_t limit = max_safe_depth(w.config.bits, mode);
  if (check == OverflowCheck::Enforced && w.depth > limit) {
    throw OverflowRiskError(w.depth, limit, to_string(mode));
  }

  CorrectedResult out;
  out.rows = w.rows;
  out.cols = x.cols;
  out.values.assign(w.rows * x.cols, 0);
  out.result_scale = w.params.scale * x.params.scale;

  std::vector<std::int32_t> col_sums;
  if (w.config.bits == 8) {
    run_i32_rows(w.tail, x, out);
    col_sums = column_depth_sums(x);
  } else {
    PackedRhs rhs = pack_rhs(x);
    run_panels(w.big, 0, rhs, mode, out);
    run_panels(w.small, w.big.rows, rhs, mode, out);
    run_scalar_rows(w.tail, w.tail_first_row, x, mode, out);
    col_sums = std::move(rhs.col_depth_sums);
  }
  apply_corrections(out, w.row_depth_sums, col_sums, static_cast<std::int64_t>(w.depth),
                    w.params.zero_point, x.params.zero_point);
  return out;
}

CorrectedResult qgemm(const QuantizedMatrix& w, const QuantizedMatrix& x, const GemmConfig& config,
                      OverflowCheck check) {
  validate(config);
  if (config.bits != 4) throw std::invalid_argument("qgemm is the 4-bit path; use qgemm_u8");
  require_inner_match(w.cols, x.rows, "qgemm");
  const std::size_t limit = max_safe_depth(config.bits, config.accumulator_mode);
  if (check == OverflowCheck::Enforced && w.cols > limit) {
    throw OverflowRiskError(w.cols, limit, to_string(config.accumulator_mode));
  }
  return qgemm(prepare_weights(w, config), x, check);
}

CorrectedResult qgemm_u8(const QuantizedMatrix& w, const QuantizedMatrix& x) {
  if (w.params.bits != 8 || x.params.bits != 8) {
    throw std::invalid_argument("qgemm_u8 requires 8-bit operands");
  }
  require_inner_match(w.cols, x.rows, "qgemm_u8");
  return qgemm(prepare_weights(w, GemmConfig{kSmallKernelHeight, AccumulatorMode::I32, 8}), x);
}

}  // namespace nibblegemm
