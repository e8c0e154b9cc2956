#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "run_config.hpp"
#include "sonotype/error.hpp"

using namespace sonotype;
namespace fs = std::filesystem;

namespace {

std::string invalid_config_message(const std::string& text) {
  try {
    cli::parse_run_config(text);
  } catch (const Error& e) {
    if (e.code() == Errc::invalid_config) return e.what();
    return "wrong code: " + std::string(e.what());
  }
  return "no error";
}

int run(const std::string& args) {
  const std::string cmd = std::string(SONOTYPE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("sonotype_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(RunConfig, DefaultsAndOverrides) {
  const auto rc = cli::parse_run_config(R"({
    "experiment": "vary_s_balanced", "s_values": [3, 6], "arms": ["transfer", "none"],
    "network": {"image_side": 32, "conv_filters": [4, 8], "dense_sizes": [16, 8]},
    "train": {"optimizer": "sgd", "patience": 3},
    "benchmark": {"seed": 9, "snr_db": null, "families": ["chirp", "pulse_train"]}
  })");
  EXPECT_EQ(rc.experiment.kind, ExperimentKind::vary_s_balanced);
  EXPECT_EQ(rc.experiment.s_values, (std::vector<std::size_t>{3, 6}));
  EXPECT_EQ(rc.experiment.arms, (std::vector<Arm>{Arm::none, Arm::transfer}));
  EXPECT_EQ(rc.experiment.train.optimizer, nn::Optimizer::sgd);
  EXPECT_EQ(rc.experiment.train.patience, 3u);
  EXPECT_EQ(rc.benchmark_seed, 9u);
  EXPECT_FALSE(rc.benchmark.render.snr_db);
  EXPECT_EQ(rc.benchmark.families, (std::vector<Family>{Family::chirp, Family::pulse_train}));
  EXPECT_EQ(rc.benchmark.image_side, 32u);
  EXPECT_EQ(rc.experiment.pretext.image_side, 32u);
  EXPECT_FALSE(rc.catalog_path);
  EXPECT_NO_THROW(cli::parse_run_config("{}"));
}

TEST(RunConfig, ErrorsNameTheOffendingPath) {
  EXPECT_NE(invalid_config_message("{").find("not valid JSON"), std::string::npos);
  EXPECT_NE(invalid_config_message(R"({"bogus": 1})").find("unknown key 'bogus'"), std::string::npos);
  EXPECT_NE(invalid_config_message(R"({"trials": -1})").find("config.trials"), std::string::npos);
  EXPECT_NE(invalid_config_message(R"({"trials": "3"})").find("config.trials"), std::string::npos);
  EXPECT_NE(invalid_config_message(R"({"train": {"optimizer": "rmsprop"}})").find("config.train.optimizer"),
            std::string::npos);
  EXPECT_NE(invalid_config_message(R"({"network": {"dense_sizes": [8]}})").find("config.network.dense_sizes"),
            std::string::npos);
  EXPECT_NE(invalid_config_message(R"({"arms": "none,magic"})").find("config.arms"), std::string::npos);
  EXPECT_NE(invalid_config_message(R"({"benchmark": {"families": ["whistle"]}})").find("config.benchmark.families"),
            std::string::npos);
  EXPECT_NE(invalid_config_message(R"({"quota": {"train": 5, "extra": 1}})").find("config.quota"), std::string::npos);
  EXPECT_NE(invalid_config_message(R"({"experiment": "exp9"})").find("config.experiment"), std::string::npos);
}

TEST(RunConfig, MissingFileIsAConfigError) {
  try {
    cli::load_run_config("/nonexistent/run.json");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_config);
  }
}

TEST(Binary, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("dataset --out x.sntp"), 2);
  const auto dir = scratch("codes");
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << R"({"unknown": true})";
  EXPECT_EQ(run("synth --config " + bad.string() + " --out " + dir.string()), 2);
  EXPECT_EQ(run("dataset --catalog " + (dir / "missing.sntp").string() + " --out " + (dir / "d.sntp").string()), 3);
  fs::remove_all(dir);
}

TEST(Binary, SynthThenDatasetWritesContainers) {
  const auto dir = scratch("flow");
  const auto cfg = dir / "run.json";
  std::ofstream(cfg) << R"({"network": {"image_side": 32}, "benchmark": {"num_sonotypes": 3, "samples_per": 12}})";
  ASSERT_EQ(run("synth --config " + cfg.string() + " --seed 4 --wav-count 1 --out " + dir.string()), 0);
  for (const char* name : {"catalog.sntp", "templates.txt", "manifest.txt"}) EXPECT_TRUE(fs::exists(dir / name)) << name;
  const auto ds = dir / "ds.sntp";
  EXPECT_EQ(run("dataset --catalog " + (dir / "catalog.sntp").string() + " --k 2 --s 6 --seed 1 --out " + ds.string()), 0);
  EXPECT_TRUE(fs::exists(ds));
  // Asking for more sonotypes than the catalog holds is a data error.
  EXPECT_EQ(run("dataset --catalog " + (dir / "catalog.sntp").string() + " --k 5 --s 6 --out " + ds.string()), 3);
  fs::remove_all(dir);
}
