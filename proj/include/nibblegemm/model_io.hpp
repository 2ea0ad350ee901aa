#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "nibblegemm/nn.hpp"

namespace nibblegemm::nn {

inline constexpr std::string_view kModelFormat = "nibblegemm-model v1";

/// Malformed or unsupported model document. location() is a JSON pointer
/// ("/layers/2/weights") or "byte N" for syntax errors.
class ModelParseError : public std::runtime_error {
 public:
  ModelParseError(std::string location, const std::string& message);
  const std::string& location() const { return location_; }

 private:
  std::string location_;
};

std::string serialize_model(const Network& net);
Network parse_model(std::string_view text);

void save_model(const Network& net, const std::filesystem::path& path);
Network load_model(const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);
/// Throws std::invalid_argument on characters outside the alphabet or bad padding.
std::string base64_decode(std::string_view text);

}  // namespace nibblegemm::nn
