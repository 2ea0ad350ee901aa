#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nibblegemm/matrix.hpp"
#include "nibblegemm/qgemm.hpp"
#include "nibblegemm/reference.hpp"

namespace nibblegemm::bench {

enum class Engine { F32, I32, U8, U4 };

const char* to_string(Engine engine);
/// Accepts f32, i32, u8, u4 (case-insensitive); throws std::invalid_argument otherwise.
Engine engine_from_string(const std::string& name);

struct BenchConfig {
  std::vector<std::size_t> heights{8, 24};
  std::vector<std::size_t> widths{100, 400, 1600};
  std::vector<std::size_t> depths{10, 40, 100};
  std::vector<Engine> engines{Engine::F32, Engine::I32, Engine::U8, Engine::U4};
  double target_cv = 0.01;  // relative standard deviation of the mean
  std::size_t min_reps = 5;
  std::size_t max_reps = 200;
  std::size_t warmup = 3;
  double min_batch_seconds = 1e-3;
  std::uint64_t seed = 1;
};

/// Throws std::invalid_argument on empty lists, zero sizes or target_cv <= 0.
void validate(const BenchConfig& config);

struct BenchRecord {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t depth = 0;
  std::string engine;  // "u4-ext" when the extended unsigned accumulator was needed
  double mean_us = 0.0;
  double cv = 0.0;
  std::size_t reps = 0;
  std::uint64_t checksum = 0;

  bool converged(const BenchConfig& config) const { return cv <= config.target_cv; }
};

inline constexpr const char* kCsvHeader = "height,width,depth,engine,mean_us,cv,reps,checksum";

void write_csv(std::ostream& out, const std::vector<BenchRecord>& records);
void write_csv_row(std::ostream& out, const BenchRecord& record);

/// Random operands for one grid point, regenerated per repetition from the seed.
struct Operands {
  Matrix<float> w_f32, x_f32;
  QuantizedMatrix w_q, x_q;
};
Operands make_operands(Engine engine, std::size_t height, std::size_t width, std::size_t depth,
                       std::uint64_t seed, std::size_t rep);

/// 4-bit configuration the harness uses for a grid point: 24-row kernel when
/// height >= 24, extended unsigned accumulators when depth exceeds the signed bound.
GemmConfig u4_config(std::size_t height, std::size_t depth);

/// Swappable engine implementations; defaults are the library paths.
struct EngineSet {
  std::function<Matrix<float>(const Matrix<float>&, const Matrix<float>&)> f32;
  std::function<Matrix<std::int32_t>(const Matrix<std::int32_t>&, const Matrix<std::int32_t>&)> i32;
  std::function<CorrectedResult(const QuantizedMatrix&, const QuantizedMatrix&)> u8;
  std::function<CorrectedResult(const QuantizedMatrix&, const QuantizedMatrix&, const GemmConfig&)> u4;

  static EngineSet library();
};

/// Times every (height, width, depth, engine) point; single-threaded.
std::vector<BenchRecord> run_benchmark(const BenchConfig& config,
                                       const std::function<void(const BenchRecord&)>& on_record = {});

struct VerifyFailure {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t depth = 0;
  std::string engine;
  reference::OracleReport report;
};

struct VerifyReport {
  std::size_t checked = 0;
  std::vector<VerifyFailure> failures;
  bool pass() const { return failures.empty(); }
};

/// Compares u4/u8 (and i32) against the exact oracles and f32 against the
/// float oracle at every grid point.
VerifyReport verify_engines(const BenchConfig& config, const EngineSet& engines = EngineSet::library());

void print_report(std::ostream& out, const VerifyReport& report);

}  // namespace nibblegemm::bench
