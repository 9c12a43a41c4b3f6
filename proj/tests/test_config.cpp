// Config parsing, override precedence, validation, and the effective-config
// provenance dump.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "pixelworld/config.hpp"
#include "pixelworld/util.hpp"

using namespace pw;

namespace {

std::string write_temp(const std::string& text) {
  std::string path = "cfg_test_tmp.cfg";
  std::ofstream f(path, std::ios::binary);
  f << text;
  f.close();
  return path;
}

}  // namespace

TEST_CASE("parse_config_text handles comments, blanks, and whitespace") {
  auto kv = parse_config_text("# header\n\n  seed = 7 \nlr=0.001   # inline\n\tdataset = d.pwds\n");
  CHECK(kv.size() == 3);
  CHECK(kv.at("seed") == "7");
  CHECK(kv.at("lr") == "0.001");
  CHECK(kv.at("dataset") == "d.pwds");
}

TEST_CASE("parse_config_text rejects malformed lines") {
  CHECK_THROWS_AS(parse_config_text("seed 7\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("= 7\n"), ValidationError);
}

TEST_CASE("apply_override rejects unknown keys and bad values") {
  TrainConfig cfg;
  CHECK_THROWS_AS(apply_override(cfg, "no_such_key", "1"), ValidationError);
  CHECK_THROWS_AS(apply_override(cfg, "steps", "many"), ValidationError);
  CHECK_THROWS_AS(apply_override(cfg, "lr", "1e-4x"), ValidationError);
  CHECK_THROWS_AS(apply_override(cfg, "freeze", "maybe"), ValidationError);
}

TEST_CASE("apply_override parses every value kind") {
  TrainConfig cfg;
  apply_override(cfg, "seed", "123");
  apply_override(cfg, "lr", "2.5e-3");
  apply_override(cfg, "steps", "17");
  apply_override(cfg, "freeze", "false");
  apply_override(cfg, "policy_ema", "on");
  apply_override(cfg, "prefix_kind", "fixed");
  CHECK(cfg.seed == 123);
  CHECK(cfg.lr == doctest::Approx(2.5e-3));
  CHECK(cfg.steps == 17);
  CHECK(cfg.freeze == false);
  CHECK(cfg.policy_ema == true);
  CHECK(cfg.prefix_kind == "fixed");
}

TEST_CASE("load_config precedence is file < overrides") {
  std::string path = write_temp("steps = 100\nlr = 0.001\n");
  TrainConfig cfg = load_config(path, {"steps=200"});
  CHECK(cfg.steps == 200);
  CHECK(cfg.lr == doctest::Approx(0.001));
  std::remove(path.c_str());
}

TEST_CASE("load_config with empty path starts from defaults") {
  TrainConfig cfg = load_config("", {"seed=9"});
  TrainConfig defaults;
  CHECK(cfg.seed == 9);
  CHECK(cfg.H == defaults.H);
  CHECK(cfg.beta == doctest::Approx(defaults.beta));
}

TEST_CASE("load_config rejects malformed overrides") {
  CHECK_THROWS_AS(load_config("", {"steps"}), ValidationError);
}

TEST_CASE("validate_config enforces cross-field constraints") {
  auto invalid = [](const std::string& key, const std::string& value) {
    TrainConfig cfg;
    apply_override(cfg, key, value);
    CHECK_THROWS_AS(validate_config(cfg), ValidationError);
  };
  invalid("threads", "0");
  invalid("channels", "1");
  invalid("views", "2");
  invalid("action_dim", "6");
  invalid("sigma_min", "0");
  invalid("beta", "1.5");
  invalid("K", "1");
  invalid("loss_reduction", "median");
  invalid("prefix_kind", "warmup");
  invalid("train_episodes", "0");

  TrainConfig cfg;
  apply_override(cfg, "keep_top", "5");
  apply_override(cfg, "keep_bottom", "4");  // 5 + 4 > K = 8
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);

  TrainConfig cfg2;
  apply_override(cfg2, "prefix_lo", "6");
  apply_override(cfg2, "prefix_hi", "2");
  CHECK_THROWS_AS(validate_config(cfg2), ValidationError);

  CHECK_NOTHROW(validate_config(TrainConfig{}));
}

TEST_CASE("effective_config is sorted, complete, and round-trips") {
  TrainConfig cfg;
  cfg.seed = 77;
  cfg.lr = 3e-4;
  cfg.prefix_kind = "curriculum";
  cfg.freeze = false;

  std::string dump = effective_config(cfg);
  auto kv = parse_config_text(dump);
  CHECK(kv.at("seed") == "77");
  CHECK(kv.at("prefix_kind") == "curriculum");
  CHECK(kv.at("freeze") == "false");

  TrainConfig back;
  apply_config(back, kv);
  CHECK(back.seed == cfg.seed);
  CHECK(back.lr == cfg.lr);  // exact: shortest round-trip float formatting
  CHECK(back.prefix_kind == cfg.prefix_kind);
  CHECK(back.freeze == cfg.freeze);
  CHECK(effective_config(back) == dump);

  std::string prev;
  std::istringstream in(dump);
  std::string line;
  while (std::getline(in, line)) {
    std::string key = line.substr(0, line.find('='));
    CHECK(prev < key);
    prev = key;
  }
}
