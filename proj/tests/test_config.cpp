#include <gtest/gtest.h>

#include "stunet/config.hpp"
#include "stunet/error.hpp"

namespace stunet {
namespace {

TEST(RunConfig, EmptyObjectGivesDefaults) {
  const RunConfig c = parse_run_config("{}");
  EXPECT_EQ(c.out, "out");
  EXPECT_EQ(c.jobs, 1u);
  EXPECT_EQ(c.budgets, std::vector<std::string>{"0.15"});
  EXPECT_EQ(c.reduction, Reduction::kMean);
  EXPECT_EQ(c.eval.splits, 5u);
  EXPECT_EQ(c.gradcheck.eps, 1e-6);
  EXPECT_FALSE(c.gradcheck.inject_conv_fault);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, SeedPropagates) {
  const RunConfig c = parse_run_config(R"({"seed": 7})");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.train.seed, 7u);
  EXPECT_EQ(c.synth.seed, 7u);
}

TEST(RunConfig, UnknownKeysNamed) {
  try {
    parse_run_config(R"({"train": {"learning_rate": 0.1, "x": 1}})");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.x"), std::string::npos);
  }
  EXPECT_THROW(parse_run_config(R"({"trian": {}})"), ConfigError);
}

TEST(RunConfig, TypeAndRangeErrors) {
  EXPECT_THROW(parse_run_config(R"({"jobs": "two"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"jobs": -1})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"model": 3})"), ConfigError);
  EXPECT_THROW(parse_run_config("{not json"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"gradcheck": {"eps": 0.5}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"reduction": "median"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"budgets": ["2"]})"), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), Error);
}

TEST(RunConfig, BudgetsAcceptNumbersAndP) {
  const RunConfig c = parse_run_config(R"({"budgets": [0.2, "P", "0.3"]})");
  const auto b = c.parsed_budgets();
  ASSERT_EQ(b.size(), 3u);
  EXPECT_DOUBLE_EQ(b[0].fraction, 0.2);
  EXPECT_TRUE(b[1].proportional);
  EXPECT_DOUBLE_EQ(b[2].fraction, 0.3);
}

TEST(RunConfig, DumpParsesBackIdentically) {
  const RunConfig c = parse_run_config(
      R"({"seed": 3, "reduction": "max", "budgets": ["P"],
          "model": {"expansion": 1, "base_channels": 8},
          "train": {"learning_rate": 0.01, "epochs": 4}, "kts": {"penalty": 0.1},
          "synth": {"videos": 5}, "gradcheck": {"steps": 4}})");
  const std::string dumped = dump_run_config(c);
  EXPECT_EQ(dump_run_config(parse_run_config(dumped)), dumped);
  EXPECT_EQ(parse_run_config(dumped).reduction, Reduction::kMax);
}

}  // namespace
}  // namespace stunet
