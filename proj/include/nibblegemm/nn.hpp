#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "nibblegemm/matrix.hpp"
#include "nibblegemm/qgemm.hpp"
#include "nibblegemm/quant.hpp"

namespace nibblegemm::nn {

struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return channels * height * width; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

/// Real-valued activation, CHW layout.
struct Tensor {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  Shape shape() const { return {channels, height, width}; }
  float& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
};

/// Integer activation with zero point 0: real value = scale * data[i].
/// storage_bits is 16 on the signed 16-bit path and 32 otherwise; values
/// always fit that width.
struct ScaledActivation {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> data;
  double scale = 1.0;
  int storage_bits = 32;

  Shape shape() const { return {channels, height, width}; }
  Tensor dequantize() const;
};

using Activation = std::variant<Tensor, ScaledActivation>;

enum class LayerKind { QConv, FConv, FC };
enum class ActivationFn { None, ReLU, SoftMax };

const char* to_string(LayerKind kind);
const char* to_string(ActivationFn fn);
LayerKind layer_kind_from_string(const std::string& name);
ActivationFn activation_from_string(const std::string& name);

/// One layer. Convolutions have no bias and no padding; weights are laid out
/// [filter][channel][ky][kx]. FC weights are [out][in] over the CHW-flattened
/// input, with an optional per-output bias.
struct LayerSpec {
  LayerKind kind = LayerKind::QConv;
  std::size_t filters = 0;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  ActivationFn activation = ActivationFn::None;
  std::vector<float> weights;
  std::vector<float> bias;

  bool is_conv() const { return kind != LayerKind::FC; }
  bool operator==(const LayerSpec&) const = default;
};

/// Output geometry of a layer; throws DimensionError if the kernel does not fit.
Shape output_shape(const LayerSpec& layer, const Shape& input);

/// Unrolls receptive fields into a (C*kh*kw) x (out_h*out_w) matrix. Row
/// index is (c*kh + ky)*kw + kx, column index is oy*out_w + ox.
template <typename T>
Matrix<T> im2col(std::span<const T> chw, const Shape& in, std::size_t kh, std::size_t kw,
                 std::size_t sh, std::size_t sw) {
  if (kh == 0 || kw == 0 || sh == 0 || sw == 0) {
    throw std::invalid_argument("kernel and stride must be positive");
  }
  if (in.height < kh || in.width < kw) {
    throw DimensionError("kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                         " larger than input " + to_string(in));
  }
  if (chw.size() != in.size()) throw DimensionError("im2col: data does not match shape");
  const std::size_t out_h = (in.height - kh) / sh + 1;
  const std::size_t out_w = (in.width - kw) / sw + 1;
  Matrix<T> cols(in.channels * kh * kw, out_h * out_w);
  std::size_t row = 0;
  for (std::size_t c = 0; c < in.channels; ++c) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx, ++row) {
        T* dst = cols.data.data() + row * cols.cols;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const T* src = chw.data() + (c * in.height + oy * sh + ky) * in.width + kx;
          for (std::size_t ox = 0; ox < out_w; ++ox) *dst++ = src[ox * sw];
        }
      }
    }
  }
  return cols;
}

Matrix<float> im2col(const Tensor& input, std::size_t kh, std::size_t kw, std::size_t sh,
                     std::size_t sw);
Matrix<std::int32_t> im2col(const ScaledActivation& input, std::size_t kh, std::size_t kw,
                            std::size_t sh, std::size_t sw);

/// A QCONV layer with its weight-side quantities computed once: unrolled
/// filters quantized per tensor, packed panels and row sums.
struct QuantizedConv {
  LayerSpec spec;
  Shape input;
  QuantizedMatrix weights;
  PreparedWeights prepared;
};

/// Largest input channel count a kh x kw QCONV accepts under the configuration.
std::size_t max_input_channels(const GemmConfig& config, std::size_t kh, std::size_t kw);

/// Throws std::invalid_argument if the channel limit or weight shape is violated.
QuantizedConv build_quantized_conv(const LayerSpec& spec, const Shape& input,
                                   const GemmConfig& config);

/// How the integer product of a quantized layer is evaluated.
enum class QuantEngine { Packed, NaiveI32 };

/// F->Q or Q->Q: re-quantizes the input per tensor, multiplies with the
/// cached weights and applies the activation to the integers. Output scale is
/// s_w * s_x, times the incoming scale for integer inputs.
ScaledActivation quantized_conv_forward(const QuantizedConv& layer, const Activation& input,
                                        QuantEngine engine = QuantEngine::Packed);

/// Real-valued convolution (QCONV specs are evaluated with their float
/// weights) or fully-connected layer, followed by the activation.
Tensor float_layer_forward(const LayerSpec& layer, const Tensor& input);

void softmax_inplace(std::span<float> values);

/// Ordered layers with validated geometry. Immutable once built.
class Network {
 public:
  Network(Shape input, std::vector<LayerSpec> layers, int bits = 4,
          AccumulatorMode mode = AccumulatorMode::Signed16, int kernel_height = kBigKernelHeight);

  const Shape& input_shape() const { return input_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  int bits() const { return config_.bits; }
  AccumulatorMode accumulator_mode() const { return config_.accumulator_mode; }
  int kernel_height() const { return config_.kernel_height; }
  const GemmConfig& gemm_config() const { return config_; }

  /// Input shape of layer i; index layers().size() gives the network output.
  const Shape& shape_at(std::size_t i) const { return shapes_[i]; }
  const QuantizedConv* quantized(std::size_t i) const;
  std::size_t parameter_count() const;

  bool operator==(const Network& other) const;

 private:
  Shape input_;
  std::vector<LayerSpec> layers_;
  GemmConfig config_;
  std::vector<Shape> shapes_;
  std::vector<std::optional<QuantizedConv>> quantized_;
};

enum class ForwardMode {
  Float,     // every layer in float, QCONV included
  Quantized,  // QCONV through the packed low-bit GEMM
  NaiveI32,   // QCONV through a plain 32-bit integer product
};

struct ForwardProfile {
  double conv_seconds = 0.0;
  double total_seconds = 0.0;
};

std::vector<float> network_forward(const Network& net, const Tensor& input,
                                   ForwardMode mode = ForwardMode::Quantized,
                                   ForwardProfile* profile = nullptr);

/// The 7-layer character classifier geometry (25x33 grayscale input, six
/// bias-free convolutions, 36-way FC with SoftMax) with seeded random weights.
Network make_demo_network(std::uint64_t seed, int bits = 4,
                          AccumulatorMode mode = AccumulatorMode::Signed16,
                          int kernel_height = kBigKernelHeight);

}  // namespace nibblegemm::nn
