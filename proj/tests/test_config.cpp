#include "oracles.hpp"

#include "primseg/config.hpp"

#include <gtest/gtest.h>

using namespace primseg;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, EmptyObjectKeepsDefaults) {
  const Config c = parse_config("{}");
  const Config d;
  EXPECT_EQ(config_to_json(c), config_to_json(d));
  EXPECT_EQ(c.pipeline.hp.sigma_per_type[0], 0.02);
  EXPECT_EQ(c.pipeline.k, 50);
  EXPECT_EQ(c.pipeline.dense_cap, 4096);
  EXPECT_EQ(c.loss.alpha, 1.0);
  EXPECT_EQ(c.loss.beta, 0.1);
  EXPECT_EQ(c.pipeline.cone, ConeFormula::Perpendicular);
  EXPECT_EQ(c.pipeline.scale, EmbeddingScale::Amplify);
}

TEST(Config, ReadsEverySection) {
  const Config c = parse_config(R"({
    "pipeline": {"seed": 9, "k": 20, "cone_cosine_distance": true, "embedding_scale": "attenuate"},
    "hyper": {"sigma_cone": 0.05, "sigma_e": 0.3, "bandwidth": 0.7, "d_max": 8},
    "estimation": {"k_fit": 32, "inlier_threshold": 0.02},
    "mean_shift": {"min_size": 5},
    "weights": {"max_raw_weight": 50},
    "loss": {"alpha": 2, "delta2": 3}
  })");
  EXPECT_EQ(c.pipeline.seed, 9u);
  EXPECT_EQ(c.pipeline.k, 20);
  EXPECT_EQ(c.pipeline.cone, ConeFormula::Cosine);
  EXPECT_EQ(c.pipeline.scale, EmbeddingScale::Attenuate);
  EXPECT_EQ(c.pipeline.hp.sigma_per_type[3], 0.05);
  EXPECT_EQ(c.pipeline.hp.sigma_e, 0.3);
  EXPECT_EQ(c.pipeline.hp.bandwidth, 0.7);
  EXPECT_EQ(c.pipeline.hp.d_max, 8);
  EXPECT_EQ(c.pipeline.estimation.k_fit, 32);
  EXPECT_EQ(c.pipeline.fit.inlier_threshold, 0.02);
  EXPECT_EQ(c.pipeline.mean_shift.min_size, 5);
  EXPECT_EQ(c.pipeline.weights.max_raw_weight, 50);
  EXPECT_EQ(c.loss.alpha, 2);
  EXPECT_EQ(c.loss.delta2, 3);
}

TEST(Config, RoundTrip) {
  Config c;
  c.pipeline.hp.sigma_e = 0.123456789012345;
  c.pipeline.scale = EmbeddingScale::Attenuate;
  c.loss.nu_push = 0.25;
  const std::string text = config_to_json(c);
  EXPECT_EQ(config_to_json(parse_config(text)), text);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_EQ(error_of(R"({"hyper": {"bogus": 1}})"), "config key 'hyper.bogus': unknown key");
  EXPECT_NE(error_of(R"({"extra": {}})").find("'extra'"), std::string::npos);
}

TEST(Config, TypeErrorsNameTheKey) {
  EXPECT_NE(error_of(R"({"pipeline": {"k": 2.5}})").find("pipeline.k"), std::string::npos);
  EXPECT_NE(error_of(R"({"hyper": {"sigma_e": "x"}})").find("hyper.sigma_e"), std::string::npos);
  EXPECT_NE(error_of(R"({"pipeline": {"embedding_scale": "log"}})").find("pipeline.embedding_scale"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"loss": 3})").find("loss"), std::string::npos);
}

TEST(Config, RangeErrorsNameTheKey) {
  EXPECT_NE(error_of(R"({"hyper": {"sigma_plane": 0}})").find("hyper.sigma_plane"), std::string::npos);
  EXPECT_NE(error_of(R"({"hyper": {"d_min": 5, "d_max": 3}})").find("hyper.d_max"), std::string::npos);
  EXPECT_NE(error_of(R"({"loss": {"delta1": 2, "delta2": 1}})").find("delta2"), std::string::npos);
  EXPECT_NE(error_of(R"({"hyper": {"bandwidth": -1}})").find("hyper.bandwidth"), std::string::npos);
}

TEST(Config, MalformedJson) {
  EXPECT_FALSE(error_of("{").empty());
  EXPECT_FALSE(error_of("[]").empty());
}

TEST(Config, LoadFromFile) {
  oracle::TempDir dir("config");
  const auto path = dir.write("c.json", R"({"pipeline": {"k": 12}})");
  EXPECT_EQ(load_config(path.string()).pipeline.k, 12);
  EXPECT_THROW(load_config(dir.file("missing.json").string()), Error);
}
