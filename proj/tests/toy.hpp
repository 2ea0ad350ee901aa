#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "nibblegemm/nn.hpp"

namespace testing_support {

using nibblegemm::nn::ActivationFn;
using nibblegemm::nn::LayerKind;
using nibblegemm::nn::LayerSpec;
using nibblegemm::nn::Shape;
using nibblegemm::nn::Tensor;

// Direct convolution in double, no im2col. Weights [f][c][ky][kx].
inline std::vector<double> conv_direct(const LayerSpec& layer, const Tensor& in) {
  const std::size_t oh = (in.height - layer.kernel_h) / layer.stride_h + 1;
  const std::size_t ow = (in.width - layer.kernel_w) / layer.stride_w + 1;
  std::vector<double> out(layer.filters * oh * ow, 0.0);
  for (std::size_t f = 0; f < layer.filters; ++f)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::size_t c = 0; c < in.channels; ++c)
          for (std::size_t ky = 0; ky < layer.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < layer.kernel_w; ++kx) {
              const double w =
                  layer.weights[((f * in.channels + c) * layer.kernel_h + ky) * layer.kernel_w + kx];
              acc += w * in.at(c, oy * layer.stride_h + ky, ox * layer.stride_w + kx);
            }
        if (layer.activation == ActivationFn::ReLU) acc = std::max(acc, 0.0);
        out[(f * oh + oy) * ow + ox] = acc;
      }
  return out;
}

// 1x4x4 image -> 2x2x2 block features -> two logits: brightness of the top
// half versus the bottom half, read from the block-sum filter.
inline nibblegemm::nn::Network toy_classifier() {
  LayerSpec conv;
  conv.kind = LayerKind::QConv;
  conv.filters = 2;
  conv.kernel_h = conv.kernel_w = 2;
  conv.stride_h = conv.stride_w = 2;
  conv.activation = ActivationFn::ReLU;
  conv.weights = {1, 1, 1, 1, 1, 0, 0, 1};

  LayerSpec fc;
  fc.kind = LayerKind::FC;
  fc.filters = 2;
  fc.activation = ActivationFn::SoftMax;
  fc.weights = {1, 1, 0, 0, 0, 0, 0, 0,
                0, 0, 1, 1, 0, 0, 0, 0};
  return nibblegemm::nn::Network(Shape{1, 4, 4}, {conv, fc});
}

// label 0: bright top rows; label 1: bright bottom rows.
inline Tensor toy_input(std::mt19937_64& rng, int label) {
  std::uniform_real_distribution<float> bright(0.8f, 1.0f), dim(0.0f, 0.2f);
  Tensor t(Shape{1, 4, 4});
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      const bool top = y < 2;
      t.at(0, y, x) = (top == (label == 0)) ? bright(rng) : dim(rng);
    }
  return t;
}

// Per-element bound for a quantized product of depth d.
inline double product_bound(std::size_t depth, double s_w, double s_x, double max_w, double max_x) {
  return static_cast<double>(depth) * (s_w * max_x + s_x * max_w + s_w * s_x);
}

}  // namespace testing_support
