#include "nibblegemm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include <Eigen/Core>

namespace nibblegemm::bench {

namespace {

using Clock = std::chrono::steady_clock;

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Matrix<T> eigen_gemm(const Matrix<T>& a, const Matrix<T>& b) {
  require_inner_match(a.cols, b.rows, "eigen_gemm");
  Matrix<T> c(a.rows, b.cols);
  using Map = Eigen::Map<const RowMajor<T>>;
  Eigen::Map<RowMajor<T>> out(c.data.data(), static_cast<Eigen::Index>(c.rows),
                              static_cast<Eigen::Index>(c.cols));
  out.noalias() = Map(a.data.data(), static_cast<Eigen::Index>(a.rows), static_cast<Eigen::Index>(a.cols)) *
                  Map(b.data.data(), static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols));
  return c;
}

Matrix<std::int32_t> widen(const QuantizedMatrix& q) {
  return {q.rows, q.cols, std::vector<std::int32_t>(q.data.begin(), q.data.end())};
}

template <typename T>
std::uint64_t fnv1a(const std::vector<T>& values) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
  for (std::size_t i = 0; i < values.size() * sizeof(T); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

// Runs the engine once; returns a checksum of its output.
std::uint64_t run_engine(Engine engine, const Operands& ops, const EngineSet& set, const GemmConfig& u4) {
  switch (engine) {
    case Engine::F32: return fnv1a(set.f32(ops.w_f32, ops.x_f32).data);
    case Engine::I32: return fnv1a(set.i32(widen(ops.w_q), widen(ops.x_q)).data);
    case Engine::U8: return fnv1a(set.u8(ops.w_q, ops.x_q).values);
    case Engine::U4: return fnv1a(set.u4(ops.w_q, ops.x_q, u4).values);
  }
  return 0;
}

// One measurable call per engine with operands bound outside the timed region.
std::function<std::uint64_t()> bind_engine(Engine engine, const Operands& ops, const EngineSet& set,
                                           const GemmConfig& u4,
                                           const Matrix<std::int32_t>& w_i32,
                                           const Matrix<std::int32_t>& x_i32) {
  switch (engine) {
    case Engine::F32:
      return [&] { return static_cast<std::uint64_t>(set.f32(ops.w_f32, ops.x_f32).data[0] != 0.0f); };
    case Engine::I32:
      return [&] { return static_cast<std::uint64_t>(set.i32(w_i32, x_i32).data[0]); };
    case Engine::U8:
      return [&] { return static_cast<std::uint64_t>(set.u8(ops.w_q, ops.x_q).values[0]); };
    case Engine::U4:
      return [&, u4] { return static_cast<std::uint64_t>(set.u4(ops.w_q, ops.x_q, u4).values[0]); };
  }
  return {};
}

double time_batch(const std::function<std::uint64_t()>& call, std::size_t n, std::uint64_t& sink) {
  const auto start = Clock::now();
  for (std::size_t i = 0; i < n; ++i) sink += call();
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

const char* to_string(Engine engine) {
  switch (engine) {
    case Engine::F32: return "f32";
    case Engine::I32: return "i32";
    case Engine::U8: return "u8";
    case Engine::U4: return "u4";
  }
  return "?";
}

Engine engine_from_string(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "f32") return Engine::F32;
  if (lower == "i32") return Engine::I32;
  if (lower == "u8") return Engine::U8;
  if (lower == "u4") return Engine::U4;
  throw std::invalid_argument("unknown engine '" + name + "' (expected f32, i32, u8 or u4)");
}

void validate(const BenchConfig& config) {
  if (config.heights.empty() || config.widths.empty() || config.depths.empty()) {
    throw std::invalid_argument("benchmark grid lists must be non-empty");
  }
  if (config.engines.empty()) throw std::invalid_argument("no engines selected");
  auto has_zero = [](const std::vector<std::size_t>& v) {
    return std::find(v.begin(), v.end(), 0) != v.end();
  };
  if (has_zero(config.heights) || has_zero(config.widths) || has_zero(config.depths)) {
    throw std::invalid_argument("matrix dimensions must be positive");
  }
  if (!(config.target_cv > 0.0)) throw std::invalid_argument("target_cv must be positive");
  if (config.max_reps < 2 || config.min_reps < 2 || config.min_reps > config.max_reps) {
    throw std::invalid_argument("need 2 <= min_reps <= max_reps");
  }
  const bool has_u4 = std::find(config.engines.begin(), config.engines.end(), Engine::U4) !=
                      config.engines.end();
  const std::size_t extended = max_safe_depth(4, AccumulatorMode::Unsigned16Extended);
  if (has_u4 && *std::max_element(config.depths.begin(), config.depths.end()) > extended) {
    throw std::invalid_argument("u4 engine supports depth up to " + std::to_string(extended));
  }
}

void write_csv_row(std::ostream& out, const BenchRecord& r) {
  const auto flags = out.flags();
  out << r.height << ',' << r.width << ',' << r.depth << ',' << r.engine << ',' << std::fixed
      << std::setprecision(3) << r.mean_us << ',' << std::setprecision(5) << r.cv << ',' << r.reps
      << ',' << r.checksum << '\n';
  out.flags(flags);
}

void write_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << kCsvHeader << "\n";
  for (const auto& r : records) write_csv_row(out, r);
}

Operands make_operands(Engine engine, std::size_t height, std::size_t width, std::size_t depth,
                       std::uint64_t seed, std::size_t rep) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(height), static_cast<std::uint32_t>(width),
                    static_cast<std::uint32_t>(depth), static_cast<std::uint32_t>(rep),
                    static_cast<std::uint32_t>(engine)};
  std::mt19937_64 rng(seq);
  Operands ops;
  if (engine == Engine::F32) {
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    ops.w_f32 = Matrix<float>(height, depth);
    ops.x_f32 = Matrix<float>(depth, width);
    for (float& v : ops.w_f32.data) v = dist(rng);
    for (float& v : ops.x_f32.data) v = dist(rng);
    return ops;
  }
  const int bits = engine == Engine::U4 ? 4 : 8;
  const int top = (1 << bits) - 1;
  std::uniform_int_distribution<int> level(0, top);
  auto random_matrix = [&](std::size_t rows, std::size_t cols) {
    std::vector<std::uint8_t> data(rows * cols);
    for (auto& v : data) v = static_cast<std::uint8_t>(level(rng));
    QuantParams p;
    p.bits = bits;
    p.zero_point = engine == Engine::I32 ? 0 : level(rng);
    p.scale = 1.0 / top;
    return make_quantized(rows, cols, std::move(data), p);
  };
  ops.w_q = random_matrix(height, depth);
  ops.x_q = random_matrix(depth, width);
  return ops;
}

GemmConfig u4_config(std::size_t height, std::size_t depth) {
  GemmConfig config;
  config.kernel_height = height >= static_cast<std::size_t>(kBigKernelHeight) ? kBigKernelHeight
                                                                                : kSmallKernelHeight;
  config.accumulator_mode = AccumulatorMode::Signed16;
  if (depth > max_safe_depth(4, AccumulatorMode::Signed16)) {
    config.accumulator_mode = AccumulatorMode::Unsigned16Extended;
  }
  return config;
}

EngineSet EngineSet::library() {
  EngineSet set;
  set.f32 = [](const Matrix<float>& a, const Matrix<float>& b) { return eigen_gemm(a, b); };
  set.i32 = [](const Matrix<std::int32_t>& a, const Matrix<std::int32_t>& b) { return eigen_gemm(a, b); };
  set.u8 = [](const QuantizedMatrix& w, const QuantizedMatrix& x) { return qgemm_u8(w, x); };
  set.u4 = [](const QuantizedMatrix& w, const QuantizedMatrix& x, const GemmConfig& c) {
    return qgemm(w, x, c);
  };
  return set;
}

std::vector<BenchRecord> run_benchmark(const BenchConfig& config,
                                       const std::function<void(const BenchRecord&)>& on_record) {
  validate(config);
  const EngineSet set = EngineSet::library();
  std::vector<BenchRecord> records;
  std::uint64_t sink = 0;

  for (std::size_t h : config.heights) {
    for (std::size_t w : config.widths) {
      for (std::size_t d : config.depths) {
        for (Engine engine : config.engines) {
          const GemmConfig u4 = u4_config(h, d);
          BenchRecord record;
          record.height = h;
          record.width = w;
          record.depth = d;
          record.engine = to_string(engine);
          if (engine == Engine::U4 && u4.accumulator_mode == AccumulatorMode::Unsigned16Extended) {
            record.engine = "u4-ext";
          }

          std::size_t batch = 1;
          std::vector<double> samples;
          for (std::size_t rep = 0; rep < config.max_reps; ++rep) {
            const Operands ops = make_operands(engine, h, w, d, config.seed, rep);
            const Matrix<std::int32_t> w_i32 = engine == Engine::I32 ? widen(ops.w_q) : Matrix<std::int32_t>{};
            const Matrix<std::int32_t> x_i32 = engine == Engine::I32 ? widen(ops.x_q) : Matrix<std::int32_t>{};
            const auto call = bind_engine(engine, ops, set, u4, w_i32, x_i32);
            if (rep == 0) {
              record.checksum = run_engine(engine, ops, set, u4);
              while (time_batch(call, batch, sink) < config.min_batch_seconds) batch *= 2;
              for (std::size_t i = 0; i < config.warmup; ++i) time_batch(call, batch, sink);
            }
            samples.push_back(time_batch(call, batch, sink) / static_cast<double>(batch));

            if (samples.size() >= config.min_reps) {
              const double n = static_cast<double>(samples.size());
              double mean = 0.0;
              for (double s : samples) mean += s;
              mean /= n;
              double var = 0.0;
              for (double s : samples) var += (s - mean) * (s - mean);
              var /= (n - 1.0);
              record.mean_us = mean * 1e6;
              record.cv = std::sqrt(var / n) / mean;
              record.reps = samples.size();
              if (record.cv < config.target_cv) break;
            }
          }
          records.push_back(record);
          if (on_record) on_record(record);
        }
      }
    }
  }
  // Keeps the timed calls observable.
  if (sink == 0x5eed5eed5eedULL) records.front().checksum ^= 1;
  return records;
}

VerifyReport verify_engines(const BenchConfig& config, const EngineSet& engines) {
  validate(config);
  VerifyReport report;
  for (std::size_t h : config.heights) {
    for (std::size_t w : config.widths) {
      for (std::size_t d : config.depths) {
        for (Engine engine : config.engines) {
          const Operands ops = make_operands(engine, h, w, d, config.seed, 0);
          reference::OracleReport r;
          switch (engine) {
            case Engine::F32: {
              const auto actual = engines.f32(ops.w_f32, ops.x_f32);
              r = reference::compare_relative(reference::oracle_gemm_f32(ops.w_f32, ops.x_f32), actual.data);
              break;
            }
            case Engine::I32: {
              const auto actual = engines.i32(widen(ops.w_q), widen(ops.x_q));
              r = reference::compare_exact(reference::oracle_gemm_i32(ops.w_q.levels(), ops.x_q.levels()),
                                           actual.data);
              break;
            }
            case Engine::U8: {
              const auto actual = engines.u8(ops.w_q, ops.x_q);
              r = reference::compare_exact(reference::oracle_quantized_product(ops.w_q, ops.x_q),
                                           actual.values);
              break;
            }
            case Engine::U4: {
              const auto actual = engines.u4(ops.w_q, ops.x_q, u4_config(h, d));
              r = reference::compare_exact(reference::oracle_quantized_product(ops.w_q, ops.x_q),
                                           actual.values);
              break;
            }
          }
          ++report.checked;
          if (!r.pass) report.failures.push_back({h, w, d, to_string(engine), r});
        }
      }
    }
  }
  return report;
}

void print_report(std::ostream& out, const VerifyReport& report) {
  for (const auto& f : report.failures) {
    out << "MISMATCH " << f.engine << " at " << f.height << "x" << f.width << "x" << f.depth << ": "
        << f.report.describe() << "\n";
  }
  out << (report.pass() ? "verify: PASS" : "verify: FAIL") << " (" << report.checked
      << " engine/size checks, " << report.failures.size() << " failures)\n";
}

}  // namespace nibblegemm::bench
