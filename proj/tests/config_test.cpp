#include "ffsim/config.hpp"

#include <gtest/gtest.h>

namespace ffsim {
namespace {

TEST(Config, DefaultsAreValid) {
  const ExperimentConfig c;
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(c.occupancy.size(), 15u);
  EXPECT_EQ(c.egress_target, 1000);
  EXPECT_EQ(c.warmup_egress, 100);
  EXPECT_EQ(c.repetitions, 20);
}

TEST(Config, ParsesKeysCommentsAndAliases) {
  const ExperimentConfig c = parse_config(
      "# sample\n"
      "scenario = agr,obs   # independent mix\n"
      "occupancy = 5, 10,20\n"
      "mu = 0.5\n"
      "\n"
      "repetitions = 3\n"
      "snapshot_at = 60\n");
  ASSERT_EQ(c.scenarios.size(), 1u);
  EXPECT_EQ(c.scenarios[0], ScenarioTag::agr_obs_indep);
  EXPECT_EQ(c.occupancy, (std::vector<int>{5, 10, 20}));
  EXPECT_DOUBLE_EQ(c.model.mu, 0.5);
  EXPECT_EQ(c.repetitions, 3);
  ASSERT_TRUE(c.snapshot_at.has_value());
  EXPECT_DOUBLE_EQ(*c.snapshot_at, 60.0);
  EXPECT_EQ(parse_config("scenario = all\n").scenarios.size(), 6u);
}

TEST(Config, RoundTripThroughText) {
  ExperimentConfig c;
  c.scenarios = {kAllScenarios.begin(), kAllScenarios.end()};
  c.model.k_s = 2.75;
  c.model.h = 0.1;
  c.occupancy = {1, 2, 187};
  c.seed_base = 123456789012345ULL;
  c.snapshot_at = 12.5;
  const ExperimentConfig back = parse_config(config_to_text(c));
  EXPECT_EQ(config_to_text(back), config_to_text(c));
  EXPECT_EQ(back.seed_base, c.seed_base);
  EXPECT_EQ(back.model.k_s, 2.75);
}

TEST(Config, RejectsOutOfRangeValues) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("mu = 1.5\n").find("mu = 1.5 outside [0,1]"), std::string::npos);
  EXPECT_NE(message("k_d = -0.1\n").find("k_d"), std::string::npos);
  EXPECT_NE(message("h = 0\n").find("h = 0"), std::string::npos);
  EXPECT_NE(message("occupancy = 0\n").find("occupancy = 0 outside [1,187]"), std::string::npos);
  EXPECT_NE(message("occupancy = 188\n").find("outside [1,187]"), std::string::npos);
  EXPECT_NE(message("width_cells = 10\n").find("width"), std::string::npos);
  EXPECT_NE(message("warmup_egress = 1000\n").find("warmup"), std::string::npos);
  EXPECT_NE(message("scenario = 7\n").find("7"), std::string::npos);
  EXPECT_NE(message("colour = red\n").find("unknown key 'colour'"), std::string::npos);
  EXPECT_NE(message("mu = 0.5\nmu = 0.6\n").find("duplicate key 'mu'"), std::string::npos);
  EXPECT_NE(message("mu 0.5\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("repetitions = 2.5\n").find("not an integer"), std::string::npos);
  EXPECT_NE(message("k_s = nan\n").find("not a number"), std::string::npos);
}

}  // namespace
}  // namespace ffsim
