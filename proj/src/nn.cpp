#include "nibblegemm/nn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Core>

#include "nibblegemm/reference.hpp"

namespace nibblegemm::nn {

namespace {

using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string layer_label(std::size_t index) { return "layer " + std::to_string(index); }

void apply_activation(ActivationFn fn, std::span<float> values) {
  switch (fn) {
    case ActivationFn::None: break;
    case ActivationFn::ReLU:
      for (float& v : values) v = std::max(v, 0.0f);
      break;
    case ActivationFn::SoftMax: softmax_inplace(values); break;
  }
}

std::size_t expected_weight_count(const LayerSpec& layer, const Shape& input) {
  if (layer.kind == LayerKind::FC) return layer.filters * input.size();
  return layer.filters * input.channels * layer.kernel_h * layer.kernel_w;
}

void check_weights(const LayerSpec& layer, const Shape& input) {
  const std::size_t expected = expected_weight_count(layer, input);
  if (layer.weights.size() != expected) {
    throw std::invalid_argument(std::string(to_string(layer.kind)) + " layer expects " +
                                std::to_string(expected) + " weights for input " + to_string(input) +
                                ", got " + std::to_string(layer.weights.size()));
  }
  if (layer.is_conv() && !layer.bias.empty()) {
    throw std::invalid_argument("convolution layers carry no bias");
  }
  if (!layer.bias.empty() && layer.bias.size() != layer.filters) {
    throw std::invalid_argument("FC bias must have one entry per output");
  }
}

Tensor to_tensor(const Activation& act) {
  if (const auto* t = std::get_if<Tensor>(&act)) return *t;
  return std::get<ScaledActivation>(act).dequantize();
}

}  // namespace

std::string to_string(const Shape& shape) {
  return std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" +
         std::to_string(shape.width);
}

Tensor::Tensor(Shape shape, float fill)
    : channels(shape.channels), height(shape.height), width(shape.width), data(shape.size(), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : channels(shape.channels), height(shape.height), width(shape.width), data(std::move(values)) {
  if (data.size() != shape.size()) {
    throw DimensionError("tensor data length does not match shape " + to_string(shape));
  }
}

Tensor ScaledActivation::dequantize() const {
  Tensor out(shape());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.data[i] = static_cast<float>(scale * static_cast<double>(data[i]));
  }
  return out;
}

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::QConv: return "qconv";
    case LayerKind::FConv: return "fconv";
    case LayerKind::FC: return "fc";
  }
  return "?";
}

const char* to_string(ActivationFn fn) {
  switch (fn) {
    case ActivationFn::None: return "none";
    case ActivationFn::ReLU: return "relu";
    case ActivationFn::SoftMax: return "softmax";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
  if (name == "qconv") return LayerKind::QConv;
  if (name == "fconv") return LayerKind::FConv;
  if (name == "fc") return LayerKind::FC;
  throw std::invalid_argument("unknown layer kind '" + name + "'");
}

ActivationFn activation_from_string(const std::string& name) {
  if (name == "none") return ActivationFn::None;
  if (name == "relu") return ActivationFn::ReLU;
  if (name == "softmax") return ActivationFn::SoftMax;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

Shape output_shape(const LayerSpec& layer, const Shape& input) {
  if (layer.filters == 0) throw std::invalid_argument("layer needs at least one filter");
  if (layer.kind == LayerKind::FC) return {layer.filters, 1, 1};
  if (layer.kernel_h == 0 || layer.kernel_w == 0 || layer.stride_h == 0 || layer.stride_w == 0) {
    throw std::invalid_argument("kernel and stride must be positive");
  }
  if (input.height < layer.kernel_h || input.width < layer.kernel_w) {
    throw DimensionError("kernel " + std::to_string(layer.kernel_h) + "x" +
                         std::to_string(layer.kernel_w) + " larger than input " + to_string(input));
  }
  return {layer.filters, (input.height - layer.kernel_h) / layer.stride_h + 1,
          (input.width - layer.kernel_w) / layer.stride_w + 1};
}

Matrix<float> im2col(const Tensor& input, std::size_t kh, std::size_t kw, std::size_t sh,
                     std::size_t sw) {
  return im2col<float>(input.data, input.shape(), kh, kw, sh, sw);
}

Matrix<std::int32_t> im2col(const ScaledActivation& input, std::size_t kh, std::size_t kw,
                            std::size_t sh, std::size_t sw) {
  return im2col<std::int32_t>(input.data, input.shape(), kh, kw, sh, sw);
}

void softmax_inplace(std::span<float> values) {
  if (values.empty()) return;
  const float peak = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (float& v : values) {
    v = std::exp(v - peak);
    total += v;
  }
  for (float& v : values) v = static_cast<float>(v / total);
}

std::size_t max_input_channels(const GemmConfig& config, std::size_t kh, std::size_t kw) {
  return max_safe_depth(config.bits, config.accumulator_mode) / (kh * kw);
}

QuantizedConv build_quantized_conv(const LayerSpec& spec, const Shape& input,
                                   const GemmConfig& config) {
  if (spec.kind != LayerKind::QConv) throw std::invalid_argument("not a QCONV layer");
  if (spec.activation == ActivationFn::SoftMax) {
    throw std::invalid_argument("SoftMax is only supported on float layers");
  }
  validate(config);
  output_shape(spec, input);
  check_weights(spec, input);
  const std::size_t limit = max_input_channels(config, spec.kernel_h, spec.kernel_w);
  if (input.channels > limit) {
    throw std::invalid_argument(
        "QCONV with " + std::to_string(input.channels) + " input channels exceeds the limit of " +
        std::to_string(limit) + " channels for " + std::to_string(spec.kernel_h) + "x" +
        std::to_string(spec.kernel_w) + " kernels at " + std::to_string(config.bits) + "-bit " +
        to_string(config.accumulator_mode));
  }
  const std::size_t depth = input.channels * spec.kernel_h * spec.kernel_w;
  Matrix<float> unrolled(spec.filters, depth, spec.weights);
  QuantizedConv out{spec, input, quantize(unrolled, config.bits), {}};
  out.prepared = prepare_weights(out.weights, config);
  return out;
}

ScaledActivation quantized_conv_forward(const QuantizedConv& layer, const Activation& input,
                                        QuantEngine engine) {
  const LayerSpec& spec = layer.spec;
  const int bits = layer.prepared.config.bits;

  Shape in_shape;
  QuantParams x_params;
  std::vector<std::uint8_t> levels;
  double incoming_scale = 1.0;
  if (const auto* t = std::get_if<Tensor>(&input)) {
    in_shape = t->shape();
    x_params = compute_quant_params(std::span<const float>(t->data), bits);
    levels = quantize_levels(std::span<const float>(t->data), x_params);
  } else {
    const auto& a = std::get<ScaledActivation>(input);
    in_shape = a.shape();
    x_params = compute_quant_params(std::span<const std::int32_t>(a.data), bits);
    levels = quantize_levels(std::span<const std::int32_t>(a.data), x_params);
    incoming_scale = a.scale;
  }
  if (in_shape != layer.input) {
    throw DimensionError("QCONV expects input " + to_string(layer.input) + ", got " +
                         to_string(in_shape));
  }

  Matrix<std::uint8_t> cols = im2col<std::uint8_t>(levels, in_shape, spec.kernel_h, spec.kernel_w,
                                                   spec.stride_h, spec.stride_w);
  const Shape out_shape = output_shape(spec, in_shape);
  const QuantizedMatrix x{cols.rows, cols.cols, std::move(cols.data), x_params};

  ScaledActivation out;
  out.channels = out_shape.channels;
  out.height = out_shape.height;
  out.width = out_shape.width;
  out.storage_bits = layer.prepared.config.accumulator_mode == AccumulatorMode::Signed16 ? 16 : 32;
  if (engine == QuantEngine::Packed) {
    CorrectedResult r = qgemm(layer.prepared, x);
    out.data = std::move(r.values);
    out.scale = r.result_scale * incoming_scale;
  } else {
    auto r = reference::oracle_quantized_product(layer.weights, x);
    out.data = std::move(r.data);
    out.scale = layer.weights.params.scale * x_params.scale * incoming_scale;
  }

  if (spec.activation == ActivationFn::ReLU) {
    for (std::int32_t& v : out.data) v = std::max(v, 0);
  }
  if (out.storage_bits == 16) {
    const auto [lo, hi] = std::minmax_element(out.data.begin(), out.data.end());
    if (lo != out.data.end() && (*lo < std::numeric_limits<std::int16_t>::min() ||
                                 *hi > std::numeric_limits<std::int16_t>::max())) {
      throw std::logic_error("16-bit activation out of range despite the depth bound");
    }
  }
  return out;
}

Tensor float_layer_forward(const LayerSpec& layer, const Tensor& input) {
  const Shape out_shape = output_shape(layer, input.shape());
  check_weights(layer, input.shape());
  Tensor out(out_shape);
  if (layer.kind == LayerKind::FC) {
    Eigen::Map<const RowMajorF> w(layer.weights.data(), static_cast<Eigen::Index>(layer.filters),
                                  static_cast<Eigen::Index>(input.data.size()));
    Eigen::Map<const Eigen::VectorXf> x(input.data.data(), static_cast<Eigen::Index>(input.data.size()));
    Eigen::Map<Eigen::VectorXf> y(out.data.data(), static_cast<Eigen::Index>(layer.filters));
    y.noalias() = w * x;
    if (!layer.bias.empty()) {
      y += Eigen::Map<const Eigen::VectorXf>(layer.bias.data(), static_cast<Eigen::Index>(layer.bias.size()));
    }
  } else {
    const Matrix<float> cols = im2col(input, layer.kernel_h, layer.kernel_w, layer.stride_h, layer.stride_w);
    Eigen::Map<const RowMajorF> w(layer.weights.data(), static_cast<Eigen::Index>(layer.filters),
                                  static_cast<Eigen::Index>(cols.rows));
    Eigen::Map<const RowMajorF> x(cols.data.data(), static_cast<Eigen::Index>(cols.rows),
                                  static_cast<Eigen::Index>(cols.cols));
    Eigen::Map<RowMajorF> y(out.data.data(), static_cast<Eigen::Index>(layer.filters),
                            static_cast<Eigen::Index>(cols.cols));
    y.noalias() = w * x;
  }
  apply_activation(layer.activation, out.data);
  return out;
}

Network::Network(Shape input, std::vector<LayerSpec> layers, int bits, AccumulatorMode mode,
                 int kernel_height)
    : input_(input), layers_(std::move(layers)), config_{kernel_height, mode, bits} {
  validate(config_);
  if (layers_.empty()) throw std::invalid_argument("network has no layers");
  if (input_.size() == 0) throw std::invalid_argument("network input shape is empty");
  shapes_.push_back(input_);
  quantized_.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& layer = layers_[i];
    try {
      const Shape next = output_shape(layer, shapes_.back());
      if (layer.kind == LayerKind::QConv) {
        quantized_[i] = build_quantized_conv(layer, shapes_.back(), config_);
      } else {
        check_weights(layer, shapes_.back());
      }
      shapes_.push_back(next);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(layer_label(i) + ": " + e.what());
    }
  }
}

const QuantizedConv* Network::quantized(std::size_t i) const {
  return quantized_.at(i) ? &*quantized_[i] : nullptr;
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers_) total += layer.weights.size() + layer.bias.size();
  return total;
}

bool Network::operator==(const Network& other) const {
  return input_ == other.input_ && layers_ == other.layers_ && config_.bits == other.config_.bits &&
         config_.accumulator_mode == other.config_.accumulator_mode &&
         config_.kernel_height == other.config_.kernel_height;
}

std::vector<float> network_forward(const Network& net, const Tensor& input, ForwardMode mode,
                                   ForwardProfile* profile) {
  const auto start = Clock::now();
  if (input.shape() != net.input_shape()) {
    throw DimensionError("network expects input " + to_string(net.input_shape()) + ", got " +
                         to_string(input.shape()));
  }
  double conv_seconds = 0.0;
  Activation act = input;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const LayerSpec& layer = net.layers()[i];
    const auto layer_start = Clock::now();
    if (layer.kind == LayerKind::QConv && mode != ForwardMode::Float) {
      act = quantized_conv_forward(*net.quantized(i), act,
                                   mode == ForwardMode::NaiveI32 ? QuantEngine::NaiveI32
                                                                 : QuantEngine::Packed);
    } else {
      act = float_layer_forward(layer, to_tensor(act));
    }
    if (layer.is_conv()) conv_seconds += seconds_since(layer_start);
  }
  Tensor result = to_tensor(act);
  if (profile) {
    profile->conv_seconds = conv_seconds;
    profile->total_seconds = seconds_since(start);
  }
  return std::move(result.data);
}

Network make_demo_network(std::uint64_t seed, int bits, AccumulatorMode mode, int kernel_height) {
  struct ConvGeometry {
    std::size_t filters, kernel, stride;
  };
  constexpr ConvGeometry kConvs[] = {{8, 5, 1}, {8, 3, 1}, {8, 3, 2}, {16, 3, 1}, {16, 3, 2}, {24, 3, 1}};
  constexpr std::size_t kClasses = 36;
  const Shape input{1, 25, 33};

  std::mt19937_64 rng(seed);
  auto random_weights = [&rng](std::size_t count, std::size_t fan_in) {
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    std::uniform_real_distribution<float> dist(-bound, bound);
    std::vector<float> w(count);
    for (float& v : w) v = dist(rng);
    return w;
  };

  std::vector<LayerSpec> layers;
  Shape shape = input;
  for (const auto& g : kConvs) {
    LayerSpec layer;
    layer.kind = LayerKind::QConv;
    layer.filters = g.filters;
    layer.kernel_h = layer.kernel_w = g.kernel;
    layer.stride_h = layer.stride_w = g.stride;
    layer.activation = ActivationFn::ReLU;
    const std::size_t fan_in = shape.channels * g.kernel * g.kernel;
    layer.weights = random_weights(g.filters * fan_in, fan_in);
    shape = output_shape(layer, shape);
    layers.push_back(std::move(layer));
  }
  LayerSpec fc;
  fc.kind = LayerKind::FC;
  fc.filters = kClasses;
  fc.activation = ActivationFn::SoftMax;
  fc.weights = random_weights(kClasses * shape.size(), shape.size());
  fc.bias = random_weights(kClasses, shape.size());
  layers.push_back(std::move(fc));
  return Network(input, std::move(layers), bits, mode, kernel_height);
}

}  // namespace nibblegemm::nn
