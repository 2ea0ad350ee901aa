// nibblegemm: benchmark, verification and demo driver for the low-bit GEMM.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>

#if defined(__linux__)
#include <sched.h>
#endif

#include <CLI11.hpp>

#include "nibblegemm/bench.hpp"
#include "nibblegemm/kernel.hpp"
#include "nibblegemm/model_io.hpp"
#include "nibblegemm/nn.hpp"

namespace {

using namespace nibblegemm;

struct GridFlags {
  std::vector<std::size_t> heights{8, 24};
  std::vector<std::size_t> widths{100, 400, 1600};
  std::vector<std::size_t> depths{10, 40, 100};
  std::vector<std::string> engines{"f32", "i32", "u8", "u4"};
  double target_cv = 0.01;
  std::size_t max_reps = 200;
  std::uint64_t seed = 1;
  std::size_t warmup = 3;

  void attach(CLI::App* app) {
    app->add_option("--heights", heights, "Left-matrix heights")->delimiter(',');
    app->add_option("--widths", widths, "Right-matrix widths")->delimiter(',');
    app->add_option("--depths", depths, "Inner dimensions")->delimiter(',');
    app->add_option("--engines", engines, "Engines: f32,i32,u8,u4")->delimiter(',');
    app->add_option("--target-cv", target_cv, "Stop when the relative std of the mean drops below this");
    app->add_option("--max-reps", max_reps, "Repetition cap per point");
    app->add_option("--seed", seed, "Seed for operand generation");
    app->add_option("--warmup", warmup, "Untimed warm-up batches");
  }

  bench::BenchConfig config() const {
    bench::BenchConfig c;
    c.heights = heights;
    c.widths = widths;
    c.depths = depths;
    c.engines.clear();
    for (const auto& e : engines) c.engines.push_back(bench::engine_from_string(e));
    c.target_cv = target_cv;
    c.max_reps = max_reps;
    c.min_reps = std::min<std::size_t>(c.min_reps, max_reps);
    c.seed = seed;
    c.warmup = warmup;
    bench::validate(c);
    return c;
  }
};

void pin_to_core() {
#if defined(__linux__)
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(0, &set);
  if (sched_setaffinity(0, sizeof(set), &set) != 0) std::cerr << "warning: could not pin to core 0\n";
#else
  std::cerr << "warning: core pinning is not supported on this platform\n";
#endif
}

int run_bench(const GridFlags& flags, const std::string& csv_path) {
  const auto config = flags.config();
  std::ofstream file;
  if (!csv_path.empty()) {
    file.open(csv_path);
    if (!file) {
      std::cerr << "cannot open " << csv_path << "\n";
      return 2;
    }
  }
  std::ostream& out = csv_path.empty() ? std::cout : file;
  out << bench::kCsvHeader << "\n";
  bench::run_benchmark(config, [&](const bench::BenchRecord& r) {
    bench::write_csv_row(out, r);
    out.flush();
  });
  return 0;
}

int run_verify(const GridFlags& flags) {
  const auto report = bench::verify_engines(flags.config());
  bench::print_report(std::cout, report);
  return report.pass() ? 0 : 1;
}

// Times one forward pass per engine until the mean is stable.
int run_demo(std::uint64_t seed, double target_cv, std::size_t max_reps, const std::string& save_path) {
  const nn::Network net4 = nn::make_demo_network(seed, 4);
  const nn::Network net8 = nn::make_demo_network(seed, 8, AccumulatorMode::I32);
  if (!save_path.empty()) nn::save_model(net4, save_path);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<float> pixel(0.0f, 1.0f);
  nn::Tensor image(net4.input_shape());
  for (float& v : image.data) v = pixel(rng);

  struct Row {
    const char* model;
    const nn::Network* net;
    nn::ForwardMode mode;
  };
  const Row rows[] = {{"CNN (f32)", &net4, nn::ForwardMode::Float},
                      {"QNN-8 (u8)", &net8, nn::ForwardMode::Quantized},
                      {"QNN-4 (u4)", &net4, nn::ForwardMode::Quantized},
                      {"QNN-32 (naive i32)", &net4, nn::ForwardMode::NaiveI32}};

  std::cout << "network: 25x33 input, " << net4.parameter_count() << " parameters, kernel isa "
            << microkernel_isa() << "\n";
  std::cout << "model,conv_ms,total_ms,reps,top_class\n";
  for (const auto& row : rows) {
    std::vector<double> totals, convs;
    std::vector<float> out;
    for (std::size_t rep = 0; rep < max_reps; ++rep) {
      nn::ForwardProfile profile;
      out = nn::network_forward(*row.net, image, row.mode, &profile);
      if (rep == 0) continue;  // warm-up
      totals.push_back(profile.total_seconds);
      convs.push_back(profile.conv_seconds);
      if (totals.size() >= 5) {
        const double n = static_cast<double>(totals.size());
        double mean = 0.0, var = 0.0;
        for (double t : totals) mean += t;
        mean /= n;
        for (double t : totals) var += (t - mean) * (t - mean);
        if (std::sqrt(var / (n - 1.0) / n) / mean < target_cv) break;
      }
    }
    double total = 0.0, conv = 0.0;
    for (std::size_t i = 0; i < totals.size(); ++i) {
      total += totals[i];
      conv += convs[i];
    }
    const double n = static_cast<double>(totals.size());
    const auto top = std::max_element(out.begin(), out.end()) - out.begin();
    std::cout << row.model << ',' << std::fixed << std::setprecision(4) << conv / n * 1e3 << ','
              << total / n * 1e3 << ',' << totals.size() << ',' << top << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-bit quantized GEMM benchmark and verification harness"};
  app.require_subcommand(1);
  bool pin = false;
  app.add_flag("--pin", pin, "Pin the process to core 0 (best effort)");

  GridFlags bench_flags;
  std::string csv_path;
  auto* bench_cmd = app.add_subcommand("bench", "Time the engines over the size grid and emit CSV");
  bench_flags.attach(bench_cmd);
  bench_cmd->add_option("--csv", csv_path, "Write CSV here instead of stdout");

  GridFlags verify_flags;
  auto* verify_cmd = app.add_subcommand("verify", "Check every engine against the brute-force oracles");
  verify_flags.attach(verify_cmd);

  std::uint64_t demo_seed = 1;
  double demo_cv = 0.01;
  std::size_t demo_reps = 500;
  std::string demo_save;
  auto* demo_cmd = app.add_subcommand("demo", "Time the demo classifier network per engine");
  demo_cmd->add_option("--seed", demo_seed, "Weight and input seed");
  demo_cmd->add_option("--target-cv", demo_cv, "Relative std of the mean to stop at");
  demo_cmd->add_option("--max-reps", demo_reps, "Repetition cap");
  demo_cmd->add_option("--save-model", demo_save, "Also write the 4-bit network to this model file");

  CLI11_PARSE(app, argc, argv);
  if (pin) pin_to_core();

  try {
    if (*bench_cmd) return run_bench(bench_flags, csv_path);
    if (*verify_cmd) return run_verify(verify_flags);
    if (*demo_cmd) return run_demo(demo_seed, demo_cv, demo_reps, demo_save);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
