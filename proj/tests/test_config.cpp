#include <gtest/gtest.h>

#include <cstdlib>

#include "segtrack/config.hpp"
#include "segtrack/error.hpp"

using namespace segtrack;

namespace {

std::string message_of(const std::string& json_text) {
  try {
    parse_run_config(json_text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig);
    return e.what();
  }
  return "";
}

}  // namespace

TEST(RunConfig, EmptyDocumentKeepsDefaults) {
  const RunConfig c = parse_run_config("{}");
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.network.patch_size, 128);
  EXPECT_EQ(c.tracker.search_factor, 4.0);
  EXPECT_EQ(c.training.learning_rate, 1e-3);
  EXPECT_EQ(c.training.decay_factor, 0.2);
  EXPECT_EQ(c.training.max_gap, 50);
  EXPECT_EQ(c.training.perturbation_fraction, 0.125);
  EXPECT_FALSE(c.ablation.any());
}

TEST(RunConfig, NestedValuesAndSeedPropagation) {
  const RunConfig c = parse_run_config(R"({"seed": 9, "network": {"patch_size": 64, "sem": {"head_channels": 32}},
      "gem": {"init_steps": 7}, "tracker": {"mask_threshold": 0.4}, "ablate": ["no_sem"], "checkpoint": "w.pt"})");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.training.seed, 9u);
  EXPECT_EQ(c.tracker.gem.seed, 9u);
  EXPECT_EQ(c.network.patch_size, 64);
  EXPECT_EQ(c.network.sem.head_channels, 32);
  EXPECT_EQ(c.tracker.gem.init_steps, 7);
  EXPECT_EQ(c.tracker.mask_threshold, 0.4);
  EXPECT_TRUE(c.ablation.no_sem);
  EXPECT_EQ(c.checkpoint, "w.pt");
}

TEST(RunConfig, UnknownKeyIsNamed) {
  EXPECT_NE(message_of(R"({"tracker": {"serach_factor": 3}})").find("tracker.serach_factor"), std::string::npos);
  EXPECT_NE(message_of(R"({"network": {"encoder": {"depth": 3}}})").find("network.encoder.depth"), std::string::npos);
  EXPECT_NE(message_of(R"({"bogus": 1})").find("bogus"), std::string::npos);
}

TEST(RunConfig, WrongTypesAndInvalidValuesRejected) {
  EXPECT_NE(message_of(R"({"seed": "one"})").find("seed"), std::string::npos);
  EXPECT_NE(message_of(R"({"training": {"batch_size": 0}})").find("batch_size"), std::string::npos);
  EXPECT_FALSE(message_of("{not json").empty());
  EXPECT_FALSE(message_of(R"({"ablate": ["no_everything"]})").empty());
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c = parse_run_config(R"({"seed": 3, "network": {"patch_size": 64}, "ablate": ["no_gim", "no_mam"]})");
  const RunConfig back = parse_run_config(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.ablation, c.ablation);
}

TEST(RunConfig, EnvironmentSeedOverrides) {
  RunConfig c = parse_run_config(R"({"seed": 3})");
  ::setenv("SEGTRACK_SEED", "42", 1);
  apply_environment(c);
  ::unsetenv("SEGTRACK_SEED");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.training.seed, 42u);
  EXPECT_EQ(c.tracker.gem.seed, 42u);
  ::setenv("SEGTRACK_SEED", "abc", 1);
  EXPECT_THROW(apply_environment(c), Error);
  ::unsetenv("SEGTRACK_SEED");
}

TEST(RunConfig, MissingFileIsIoError) {
  try {
    load_run_config("/nonexistent/config.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}
