#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "nibblegemm/pack.hpp"

namespace nibblegemm {

/// height x 4 block of 16-bit accumulators, stored column-major so that
/// each output column is a run of 8-lane vectors.
class AccumulatorTile {
 public:
  explicit AccumulatorTile(int height);

  int height() const { return height_; }
  static constexpr int width() { return static_cast<int>(kPanelWidth); }

  std::uint16_t& at(int row, int col) { return values_[static_cast<std::size_t>(col * height_ + row)]; }
  std::uint16_t at(int row, int col) const {
    return values_[static_cast<std::size_t>(col * height_ + row)];
  }

  std::uint16_t* column(int col) { return values_.data() + col * height_; }
  const std::uint16_t* column(int col) const { return values_.data() + col * height_; }

  void clear() { values_.fill(0); }

 private:
  int height_;
  std::array<std::uint16_t, kBigKernelHeight * kPanelWidth> values_{};
};

/// tile(r, c) += sum_{k < depth} lhs(r, k) * rhs(k, c), 16-bit wraparound
/// arithmetic, two depth levels per step. Panels are in pack order for the
/// tile's height; depth must be even and operands must be 4-bit levels.
/// The caller is responsible for keeping depth under the accumulator bound.
void microkernel(AccumulatorTile& tile, std::span<const std::uint8_t> lhs_panel,
                 std::span<const std::uint8_t> rhs_panel, std::size_t depth);

/// Portable reference of the same contract (one scalar broadcast-multiply-add
/// per lane); always available and bit-identical to microkernel().
void microkernel_scalar(AccumulatorTile& tile, std::span<const std::uint8_t> lhs_panel,
                        std::span<const std::uint8_t> rhs_panel, std::size_t depth);

/// Name of the instruction set the dispatched microkernel uses.
const char* microkernel_isa();

}  // namespace nibblegemm
