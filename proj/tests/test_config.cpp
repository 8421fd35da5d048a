#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "vhslice/config.hpp"

using namespace vhslice;

namespace {

std::string error_of(const Json& j) {
  try {
    run_config_from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyObjectGivesDefaults) {
  const auto rc = run_config_from_json(Json::object());
  EXPECT_EQ(rc.profile, "full");
  EXPECT_EQ(rc.trial.scenario.pairs, 20);
  EXPECT_EQ(rc.trial.training.steps, 200000);
  EXPECT_EQ(rc.trial.training.sac.hidden, (std::vector<int>{512, 512, 256}));
  EXPECT_EQ(rc.trial.training.sac.batch_size, 1024u);
  EXPECT_EQ(rc.trial.training.sac.learning_rate, 1e-4);
  EXPECT_EQ(rc.trial.training.sac.gamma, 0.99);
  EXPECT_EQ(rc.trial.training.sac.polyak_rate, 0.005);
  EXPECT_EQ(rc.trial.training.sac.buffer_capacity, 1000000u);
}

TEST(Config, RoundTripIsIdentical) {
  Json j = {{"scenario", {{"pairs", 7}, {"mean_se", 4.5}, {"t_slice_ms", 10}, {"ran", {{"n_rb", 50}}}}},
            {"variant", "baseline"},
            {"training", {{"profile", "fast"}, {"steps", 123}, {"sac", {{"gamma", 0.9}}}}},
            {"eval_seeds", {5, 6}}};
  const auto rc = run_config_from_json(j);
  EXPECT_EQ(rc.trial.scenario.pairs, 7);
  EXPECT_EQ(rc.trial.scenario.ran.n_rb, 50);
  EXPECT_EQ(rc.trial.variant, RewardVariant::baseline);
  EXPECT_EQ(rc.trial.training.steps, 123);
  EXPECT_EQ(rc.trial.training.sac.hidden, (std::vector<int>{64, 64}));  // from the profile
  EXPECT_EQ(rc.trial.training.reward_floor, -10.0);
  const Json once = to_json(rc);
  const Json twice = to_json(run_config_from_json(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(once.dump(), twice.dump());
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(error_of({{"scenario", {{"pairs", 0}}}}), "scenario.pairs: must be >= 1");
  EXPECT_EQ(error_of({{"scenario", {{"pairs", "many"}}}}), "scenario.pairs: expected an integer");
  EXPECT_EQ(error_of({{"scenario", {{"ran", {{"n_rbs", 3}}}}}}), "scenario.ran.n_rbs: unknown field");
  EXPECT_EQ(error_of({{"trainig", Json::object()}}), "trainig: unknown field");
  EXPECT_NE(error_of({{"training", {{"profile", "turbo"}}}}).find("training.profile"), std::string::npos);
  EXPECT_NE(error_of({{"scenario", {{"scheduler", "fifo"}}}}).find("scenario.scheduler"), std::string::npos);
  EXPECT_NE(error_of({{"variant", "x"}}).find("variant"), std::string::npos);
  EXPECT_EQ(error_of({{"eval_seeds", {-1}}}), "eval_seeds[0]: must be >= 0");
}

TEST(Config, MissingFileNamesThePath) {
  try {
    load_run_config("/nonexistent/cfg.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/cfg.json"), std::string::npos);
  }
}

TEST(Manifest, SaveLoadRoundTrip) {
  RunManifest m;
  m.command = "sweep";
  m.target = "users";
  m.out_dir = "runs/x";
  m.config = run_config_from_json({{"training", {{"profile", "fast"}}}, {"train_seed", 9}});
  const auto path = (std::filesystem::temp_directory_path() / "vhslice_manifest.json").string();
  save_manifest(m, path);
  const auto back = load_manifest(path);
  EXPECT_EQ(back.command, "sweep");
  EXPECT_EQ(back.target, "users");
  EXPECT_EQ(back.version, std::string(kVersion));
  EXPECT_EQ(to_json(back.config), to_json(m.config));
  std::ofstream(path) << "{\"format\": \"other\"}";
  EXPECT_THROW(load_manifest(path), ConfigError);
  std::filesystem::remove(path);
}
