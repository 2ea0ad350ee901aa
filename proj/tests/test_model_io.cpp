#include <gtest/gtest.h>

#include <filesystem>
#include <json.hpp>

#include "nibblegemm/model_io.hpp"

using namespace nibblegemm;
using namespace nibblegemm::nn;

namespace {

std::string location_of(const std::string& text) {
  try {
    parse_model(text);
  } catch (const ModelParseError& e) {
    return e.location();
  }
  return "<parsed>";
}

}  // namespace

TEST(Base64, KnownVectors) {
  EXPECT_EQ(base64_encode(""), "");
  EXPECT_EQ(base64_encode("f"), "Zg==");
  EXPECT_EQ(base64_encode("fo"), "Zm8=");
  EXPECT_EQ(base64_encode("foo"), "Zm9v");
  EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
  for (std::string s : {"", "f", "fo", "foo", "foob", "fooba", "foobar"}) EXPECT_EQ(base64_decode(base64_encode(s)), s);
  EXPECT_THROW(base64_decode("Zm9"), std::invalid_argument);
  EXPECT_THROW(base64_decode("Zm!v"), std::invalid_argument);
  EXPECT_THROW(base64_decode("Z=9v"), std::invalid_argument);
}

TEST(ModelIo, RoundTripDemoNetwork) {
  const Network net = make_demo_network(21);
  const Network back = parse_model(serialize_model(net));
  EXPECT_TRUE(back == net);
  EXPECT_EQ(back.parameter_count(), 10892u);
}

TEST(ModelIo, RoundTripThroughFile) {
  const Network net = make_demo_network(22, 8, AccumulatorMode::I32, 8);
  const auto path = std::filesystem::temp_directory_path() / "nibblegemm_model_io_test.json";
  save_model(net, path);
  const Network back = load_model(path);
  std::filesystem::remove(path);
  EXPECT_TRUE(back == net);
  EXPECT_EQ(back.bits(), 8);
  EXPECT_EQ(back.kernel_height(), 8);
}

TEST(ModelIo, DocumentLayout) {
  const auto doc = nlohmann::json::parse(serialize_model(make_demo_network(23)));
  EXPECT_EQ(doc["format"], std::string(kModelFormat));
  EXPECT_EQ(doc["accumulator"], "signed16");
  EXPECT_EQ(doc["layers"].size(), 7u);
  EXPECT_EQ(doc["layers"][0]["kernel"], nlohmann::json({5, 5}));
  EXPECT_EQ(doc["layers"][6]["weights"]["count"], 36u * 72u);
  EXPECT_EQ(doc["layers"][6]["bias"]["count"], 36u);
  EXPECT_FALSE(doc["layers"][6].contains("kernel"));
}

TEST(ModelIo, ChannelLimitRejected) {
  auto doc = nlohmann::ordered_json::parse(serialize_model(make_demo_network(24)));
  // layer 2 sees 8 channels at 3x3; claim 17 by inflating the layer before it.
  auto& first = doc["layers"][0];
  first["filters"] = 17;
  first["weights"]["count"] = 17 * 25;
  first["weights"]["data"] = base64_encode(std::string(17 * 25 * 4, '\0'));
  auto& second = doc["layers"][1];
  second["weights"]["count"] = 8 * 17 * 9;
  second["weights"]["data"] = base64_encode(std::string(8 * 17 * 9 * 4, '\0'));
  try {
    parse_model(doc.dump());
    FAIL() << "expected rejection";
  } catch (const ModelParseError& e) {
    EXPECT_EQ(e.location(), "/layers");
    EXPECT_NE(std::string(e.what()).find("limit of 16"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
}

TEST(ModelIo, ExtendedModeRaisesLimit) {
  auto doc = nlohmann::ordered_json::parse(serialize_model(make_demo_network(24)));
  doc["accumulator"] = "unsigned16_extended";
  EXPECT_NO_THROW(parse_model(doc.dump()));
  doc["bits"] = 8;
  EXPECT_EQ(location_of(doc.dump()), "/");
}

TEST(ModelIo, TruncatedFile) {
  const std::string text = serialize_model(make_demo_network(25));
  for (std::size_t cut : {std::size_t{0}, std::size_t{10}, text.size() / 2, text.size() - 3}) {
    try {
      parse_model(text.substr(0, cut));
      FAIL() << "parsed a truncated document of " << cut << " bytes";
    } catch (const ModelParseError& e) {
      EXPECT_EQ(e.location().rfind("byte ", 0), 0u) << e.location();
    }
  }
}

TEST(ModelIo, UnknownFormat) {
  auto doc = nlohmann::ordered_json::parse(serialize_model(make_demo_network(26)));
  doc["format"] = "nibblegemm-model v2";
  EXPECT_EQ(location_of(doc.dump()), "/format");
}

TEST(ModelIo, LocatesBadFields) {
  auto doc = nlohmann::ordered_json::parse(serialize_model(make_demo_network(27)));
  auto bad = doc;
  bad["layers"][3]["activation"] = "tanh";
  EXPECT_EQ(location_of(bad.dump()), "/layers/3/activation");
  bad = doc;
  bad["layers"][2]["weights"]["count"] = 5;
  EXPECT_EQ(location_of(bad.dump()), "/layers/2/weights/data");
  bad = doc;
  bad["layers"][0]["stride"] = {1};
  EXPECT_EQ(location_of(bad.dump()), "/layers/0/stride");
  bad = doc;
  bad["input"].erase("width");
  EXPECT_EQ(location_of(bad.dump()), "/input/width");
  bad = doc;
  bad["layers"][1]["weights"]["data"] = "***";
  EXPECT_EQ(location_of(bad.dump()), "/layers/1/weights/data");
}

TEST(ModelIo, MissingFile) {
  EXPECT_THROW(load_model("/nonexistent/model.json"), std::runtime_error);
}
