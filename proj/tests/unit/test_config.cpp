// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "iqa/config.hpp"
#include "iqa/error.hpp"
#include "iqa/io.hpp"

using namespace iqa;
namespace fs = std::filesystem;

namespace {

// Runs `fn`, expecting Error(kConfig) whose message mentions `needle`.
template <class F>
void expect_config_error(F&& fn, const std::string& needle) {
  try {
    fn();
    FAIL("expected a config error mentioning " << needle);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                  e.what());
  }
}

}  // namespace

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK(c.seed == 1);
  CHECK(c.train.group_size == 8);
  CHECK(c.train.beta_kl == 1e-3);
  CHECK(c.train.clip_eps == 0.2);
  CHECK(c.train.lr == 1e-2);
  CHECK(c.train.total_steps() == 2000);
  CHECK(c.train.k_pct == 0.4);
  CHECK(c.train.egf_enabled);
  CHECK(c.train.reward.shape == RewardShape::kExponential);
  CHECK(c.train.reward.schedule.k_min == 5.0);
  CHECK(c.train.reward.schedule.k_max == 25.0);
  CHECK(c.train.reward.lambda_fmt == 0.5);
  CHECK(c.pig.k == 3);
  CHECK(c.pig.stop_threshold == 4.5);
  CHECK(c.pig.strength == 0.7);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("JSON round trip covers every field") {
  RunConfig c;
  c.seed = 12345678901234ULL;
  c.output_dir = "out/x";
  c.train.lr = 0.003;
  c.train.reward.shape = RewardShape::kFixedGauss;
  c.train.reward.schedule.tau = 0.25;
  c.eval.perturb = true;
  c.pig.dump_pgm = true;
  c.ablate.seeds = {4, 5};
  c.ablate.shapes = {RewardShape::kBinary};
  c.ablate.egf = {false};
  c.logging.trajectory_every = 0;
  const std::string text = config_to_json(c);
  const RunConfig back = config_from_json(text);
  CHECK(config_to_json(back) == text);
  CHECK(back.seed == c.seed);
  CHECK(back.train.reward.shape == RewardShape::kFixedGauss);
  CHECK(back.ablate.seeds == std::vector<std::uint64_t>{4, 5});

  // The document mirrors the TrainConfig field names.
  const auto j = nlohmann::json::parse(text);
  for (const char* key :
       {"clip_eps", "beta_kl", "lr", "epochs", "steps_per_epoch", "group_size",
        "reward", "egf_enabled", "k_pct"}) {
    CHECK_MESSAGE(j["train"].contains(key), key);
  }
}

TEST_CASE("partial documents keep defaults") {
  const RunConfig c = config_from_json(R"({"train": {"lr": 0.5}})");
  CHECK(c.train.lr == 0.5);
  CHECK(c.train.group_size == 8);
  CHECK(c.seed == 1);
  CHECK(config_from_json("{}").train.lr == 0.01);
}

TEST_CASE("unknown keys and type mismatches name the key") {
  expect_config_error([] { config_from_json(R"({"trian": {}})"); }, "trian");
  expect_config_error(
      [] { config_from_json(R"({"train": {"reward": {"shap": "binary"}}})"); },
      "train.reward.shap");
  expect_config_error([] { config_from_json(R"({"train": {"lr": "fast"}})"); },
                      "train.lr");
  expect_config_error(
      [] { config_from_json(R"({"train": {"epochs": 1.5}})"); }, "train.epochs");
  expect_config_error(
      [] { config_from_json(R"({"train": {"reward": {"shape": "gauss"}}})"); },
      "train.reward.shape");
  expect_config_error([] { config_from_json(R"({"seed": -1})"); }, "seed");
  expect_config_error([] { config_from_json(R"({"ablate": {"seeds": [1, "x"]}})"); },
                      "ablate.seeds[1]");
  expect_config_error([] { config_from_json("{not json"); }, "JSON");
}

TEST_CASE("validation names the offending field") {
  RunConfig c;
  c.pig.strength = 0.0;
  expect_config_error([&] { c.validate(); }, "pig.strength");
  c = {};
  c.eval.min_patches = 3;
  c.eval.max_patches = 1;
  expect_config_error([&] { c.validate(); }, "eval.min_patches");
  c = {};
  c.train.clip_eps = 2.0;
  expect_config_error([&] { c.validate(); }, "clip_eps");
}

TEST_CASE("overrides") {
  RunConfig c;
  apply_override(c, "train.lr=0.003");
  CHECK(c.train.lr == 0.003);
  apply_override(c, "beta_kl=0");
  CHECK(c.train.beta_kl == 0.0);
  apply_override(c, "shape=binary");
  CHECK(c.train.reward.shape == RewardShape::kBinary);
  apply_override(c, "train.reward.shape=\"sigmoid\"");
  CHECK(c.train.reward.shape == RewardShape::kSigmoid);
  apply_override(c, "egf_enabled=false");
  CHECK_FALSE(c.train.egf_enabled);
  apply_override(c, "ablate.seeds=[7,8,9]");
  CHECK(c.ablate.seeds == std::vector<std::uint64_t>{7, 8, 9});
  apply_override(c, "output_dir=some/where");
  CHECK(c.output_dir == "some/where");
  apply_override(c, "steps=0");
  CHECK(c.train.total_steps() == 0);
  apply_override(c, "steps=250");
  CHECK(c.train.epochs == 1);
  CHECK(c.train.steps_per_epoch == 250);
}

TEST_CASE("bad overrides") {
  RunConfig c;
  expect_config_error([&] { apply_override(c, "nonsense=1"); }, "nonsense");
  expect_config_error([&] { apply_override(c, "train.nope=1"); }, "train.nope");
  expect_config_error([&] { apply_override(c, "lr"); }, "key=value");
  expect_config_error([&] { apply_override(c, "lr=abc"); }, "train.lr");
  expect_config_error([&] { apply_override(c, "steps=-4"); }, "steps");
  // Leaf names that occur in several sections must be qualified.
  expect_config_error([&] { apply_override(c, "n_images=5"); },
                      "eval.n_images");
  expect_config_error([&] { apply_override(c, "total_steps=5"); }, "ambiguous");
  // A failed override leaves nothing half-applied.
  CHECK(c.train.lr == 0.01);
}

TEST_CASE("loading files") {
  const fs::path dir = fs::temp_directory_path() / "iqa_test_config";
  fs::create_directories(dir);
  const std::string good = (dir / "good.json").string();
  io::write_file(good, R"({"seed": 9, "train": {"steps_per_epoch": 3}})");
  const RunConfig c = load_config(good);
  CHECK(c.seed == 9);
  CHECK(c.train.steps_per_epoch == 3);

  const std::string invalid = (dir / "invalid.json").string();
  io::write_file(invalid, R"({"pig": {"k": 0}})");
  expect_config_error([&] { load_config(invalid); }, "pig.k");

  expect_config_error([&] { load_config((dir / "missing.json").string()); },
                      "cannot read");
  fs::remove_all(dir);
}
