#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sca/config.hpp"

using namespace sca;
namespace fs = std::filesystem;

namespace {

fs::path write_tmp(const std::string& name, const std::string& body) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream f(p);
  f << body;
  return p;
}

}  // namespace

TEST_CASE("defaults pass validation and survive a json round-trip") {
  RunConfig cfg;
  json j = config_to_json(cfg);
  RunConfig back;
  apply_config_json(back, j);
  CHECK(config_to_json(back) == j);
  CHECK(back.ppo.buffer_cap == cfg.ppo.buffer_cap);
  CHECK(back.social.phi == doctest::Approx(cfg.social.phi));
}

TEST_CASE("file loading applies nested values") {
  auto p = write_tmp("sca_cfg_ok.json", R"({
    "ppo": {"lr": 0.0005, "minibatch": 32},
    "social": {"phi": 0.7},
    "layout": {"arm_length": 60.0},
    "experiment": {"seeds": [7, 8], "sweep_phis": [0.0, 0.5]}
  })");
  RunConfig cfg = load_config(p.string());
  CHECK(cfg.ppo.lr == 0.0005);
  CHECK(cfg.ppo.minibatch == 32);
  CHECK(cfg.social.phi == 0.7);
  CHECK(cfg.layout.arm_length == 60.0);
  REQUIRE(cfg.experiment.seeds.size() == 2);
  CHECK(cfg.experiment.seeds[1] == 8);
  REQUIRE(cfg.experiment.sweep_phis.size() == 2);
  CHECK(cfg.experiment.sweep_phis[1] == 0.5);
}

TEST_CASE("unknown keys are rejected with the full dotted path") {
  RunConfig cfg;
  try {
    apply_config_json(cfg, json::parse(R"({"ppo": {"learning_rate": 0.1}})"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("ppo.learning_rate") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config_json(cfg, json::parse(R"({"nonsense": 1})")), ConfigError);
}

TEST_CASE("out-of-range values are rejected") {
  RunConfig cfg;
  CHECK_THROWS_AS(apply_config_json(cfg, json::parse(R"({"ppo": {"lr": -1.0}})")), ConfigError);
  CHECK_THROWS_AS(apply_config_json(cfg, json::parse(R"({"ppo": {"clip": 0.0}})")),
                  ConfigError);
  CHECK_THROWS_AS(apply_config_json(cfg, json::parse(R"({"social": {"phi": 3.2}})")),
                  ConfigError);
  CHECK_THROWS_AS(apply_config_json(cfg, json::parse(R"({"env": {"max_decisions": 0}})")),
                  ConfigError);
  CHECK_THROWS_AS(apply_config_json(cfg, json::parse(R"({"ppo": {"minibatch": 1.5}})")),
                  ConfigError);  // non-integer for an int field
}

TEST_CASE("cross-field validation catches inconsistent settings") {
  RunConfig cfg;
  cfg.ppo.minibatch = 2048;  // larger than buffer_cap
  CHECK_THROWS_AS(detail::validate_cross_fields(cfg), ConfigError);

  RunConfig cfg2;
  cfg2.env.k_min = 9;
  cfg2.env.k_max = 3;
  CHECK_THROWS_AS(detail::validate_cross_fields(cfg2), ConfigError);

  RunConfig cfg3;
  cfg3.dpl.stride = cfg3.dpl.window + 1;
  CHECK_THROWS_AS(detail::validate_cross_fields(cfg3), ConfigError);

  RunConfig cfg4;
  cfg4.env.decision_period = 0.35;  // not a multiple of substep_dt
  CHECK_THROWS_AS(detail::validate_cross_fields(cfg4), ConfigError);

  RunConfig ok;
  CHECK_NOTHROW(detail::validate_cross_fields(ok));
}

TEST_CASE("command-line overrides use dotted key=value pairs") {
  RunConfig cfg;
  apply_overrides(cfg, {"ppo.lr=0.002", "env.n_max_neighbors=4", "social.phi=0.25"});
  CHECK(cfg.ppo.lr == 0.002);
  CHECK(cfg.env.n_max_neighbors == 4);
  CHECK(cfg.social.phi == 0.25);

  apply_overrides(cfg, {"experiment.seeds=[4,5,6]"});
  REQUIRE(cfg.experiment.seeds.size() == 3);
  CHECK(cfg.experiment.seeds[2] == 6);

  CHECK_THROWS_AS(apply_overrides(cfg, {"ppo.lr"}), ConfigError);        // missing '='
  CHECK_THROWS_AS(apply_overrides(cfg, {"ppo.bogus=1"}), ConfigError);   // unknown key
  CHECK_THROWS_AS(apply_overrides(cfg, {"ppo.lr=banana"}), ConfigError); // wrong type
}

TEST_CASE("malformed or missing config files raise ConfigError") {
  CHECK_THROWS_AS(load_config("/nonexistent/path.json"), ConfigError);
  auto p = write_tmp("sca_cfg_bad.json", "{ not json ");
  CHECK_THROWS_AS(load_config(p.string()), ConfigError);
}
