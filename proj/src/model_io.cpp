#include "nibblegemm/model_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nibblegemm::nn {

using json = nlohmann::ordered_json;

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
constexpr std::string_view kWeightEncoding = "f32le-base64";

std::string floats_to_bytes(const std::vector<float>& values) {
  std::string bytes;
  bytes.reserve(values.size() * 4);
  for (float v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int shift = 0; shift < 32; shift += 8) bytes.push_back(static_cast<char>((bits >> shift) & 0xFF));
  }
  return bytes;
}

std::vector<float> bytes_to_floats(std::string_view bytes) {
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
    }
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

json encode_blob(const std::vector<float>& values) {
  return json{{"encoding", kWeightEncoding},
              {"count", values.size()},
              {"data", base64_encode(floats_to_bytes(values))}};
}

// Typed field access that reports where the document went wrong.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ModelParseError(path_.empty() ? "/" : path_, message);
  }

  const json& field(const std::string& key) const {
    const auto it = node_.find(key);
    if (it == node_.end()) throw ModelParseError(path_ + "/" + key, "missing field");
    return *it;
  }
  bool has(const std::string& key) const { return node_.contains(key); }
  std::string path(const std::string& key) const { return path_ + "/" + key; }

  std::string string(const std::string& key) const {
    const json& v = field(key);
    if (!v.is_string()) throw ModelParseError(path(key), "expected a string");
    return v.get<std::string>();
  }

  std::size_t count(const std::string& key) const {
    const json& v = field(key);
    if (!v.is_number_unsigned()) throw ModelParseError(path(key), "expected a non-negative integer");
    return v.get<std::size_t>();
  }

  std::array<std::size_t, 2> pair(const std::string& key) const {
    const json& v = field(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_unsigned() || !v[1].is_number_unsigned()) {
      throw ModelParseError(path(key), "expected [height, width] of non-negative integers");
    }
    return {v[0].get<std::size_t>(), v[1].get<std::size_t>()};
  }

  std::vector<float> blob(const std::string& key) const {
    const Reader blob(field(key), path(key));
    if (blob.string("encoding") != kWeightEncoding) {
      throw ModelParseError(blob.path("encoding"), "unsupported weight encoding");
    }
    const std::size_t n = blob.count("count");
    std::string bytes;
    try {
      bytes = base64_decode(blob.string("data"));
    } catch (const std::invalid_argument& e) {
      throw ModelParseError(blob.path("data"), e.what());
    }
    if (bytes.size() != n * 4) {
      throw ModelParseError(blob.path("data"), "decoded " + std::to_string(bytes.size()) +
                                                   " bytes, expected " + std::to_string(n * 4));
    }
    return bytes_to_floats(bytes);
  }

 private:
  const json& node_;
  std::string path_;
};

template <typename Fn>
auto enum_field(const Reader& r, const std::string& key, Fn parse) {
  const std::string name = r.string(key);
  try {
    return parse(name);
  } catch (const std::invalid_argument& e) {
    throw ModelParseError(r.path(key), e.what());
  }
}

}  // namespace

ModelParseError::ModelParseError(std::string location, const std::string& message)
    : std::runtime_error(location + ": " + message), location_(std::move(location)) {}

std::string base64_encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                            (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                            static_cast<unsigned char>(bytes[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t n = static_cast<unsigned char>(bytes[i]) << 16;
    if (rest == 2) n |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += rest == 2 ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64 length is not a multiple of 4");
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (int i = 0; i < 64; ++i) lookup[static_cast<unsigned char>(kAlphabet[i])] = i;

  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t n = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=' && last && j >= 2) {
        ++pad;
        n <<= 6;
        continue;
      }
      const int v = lookup[static_cast<unsigned char>(c)];
      if (v < 0 || pad > 0) throw std::invalid_argument("invalid base64 data");
      n = (n << 6) | static_cast<std::uint32_t>(v);
    }
    out += static_cast<char>((n >> 16) & 0xFF);
    if (pad < 2) out += static_cast<char>((n >> 8) & 0xFF);
    if (pad < 1) out += static_cast<char>(n & 0xFF);
  }
  return out;
}

std::string serialize_model(const Network& net) {
  json doc;
  doc["format"] = kModelFormat;
  doc["input"] = {{"channels", net.input_shape().channels},
                  {"height", net.input_shape().height},
                  {"width", net.input_shape().width}};
  doc["bits"] = net.bits();
  doc["accumulator"] = to_string(net.accumulator_mode());
  doc["kernel_height"] = net.kernel_height();
  json layers = json::array();
  for (const LayerSpec& layer : net.layers()) {
    json l;
    l["kind"] = to_string(layer.kind);
    l["filters"] = layer.filters;
    if (layer.is_conv()) {
      l["kernel"] = {layer.kernel_h, layer.kernel_w};
      l["stride"] = {layer.stride_h, layer.stride_w};
    }
    l["activation"] = to_string(layer.activation);
    l["weights"] = encode_blob(layer.weights);
    if (!layer.bias.empty()) l["bias"] = encode_blob(layer.bias);
    layers.push_back(std::move(l));
  }
  doc["layers"] = std::move(layers);
  return doc.dump(2) + "\n";
}

Network parse_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ModelParseError("byte " + std::to_string(e.byte), e.what());
  }

  const Reader root(doc, "");
  const std::string format = root.string("format");
  if (format != kModelFormat) {
    throw ModelParseError("/format", "unsupported model format '" + format + "', expected '" +
                                         std::string(kModelFormat) + "'");
  }

  const Reader input(root.field("input"), "/input");
  const Shape shape{input.count("channels"), input.count("height"), input.count("width")};

  const std::size_t bits = root.count("bits");
  const AccumulatorMode mode = enum_field(root, "accumulator", accumulator_mode_from_string);
  const std::size_t kernel_height = root.count("kernel_height");
  try {
    validate(GemmConfig{static_cast<int>(kernel_height), mode, static_cast<int>(bits)});
  } catch (const std::invalid_argument& e) {
    throw ModelParseError("/", e.what());
  }

  const json& layer_nodes = root.field("layers");
  if (!layer_nodes.is_array()) throw ModelParseError("/layers", "expected an array");
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < layer_nodes.size(); ++i) {
    const Reader r(layer_nodes[i], "/layers/" + std::to_string(i));
    LayerSpec layer;
    layer.kind = enum_field(r, "kind", layer_kind_from_string);
    layer.filters = r.count("filters");
    if (layer.is_conv()) {
      const auto kernel = r.pair("kernel");
      const auto stride = r.pair("stride");
      layer.kernel_h = kernel[0];
      layer.kernel_w = kernel[1];
      layer.stride_h = stride[0];
      layer.stride_w = stride[1];
    }
    layer.activation = enum_field(r, "activation", activation_from_string);
    layer.weights = r.blob("weights");
    if (r.has("bias")) layer.bias = r.blob("bias");
    layers.push_back(std::move(layer));
  }

  try {
    return Network(shape, std::move(layers), static_cast<int>(bits), mode,
                   static_cast<int>(kernel_height));
  } catch (const std::invalid_argument& e) {
    throw ModelParseError("/layers", e.what());
  }
}

void save_model(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << serialize_model(net);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Network load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str());
}

}  // namespace nibblegemm::nn
