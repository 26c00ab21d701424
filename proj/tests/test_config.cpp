#include <catch2/catch_amalgamated.hpp>

#include "vardram/vardram.hpp"

using namespace vardram;

TEST_CASE("parser reads sections, comments and typed values")
{
  ConfigParser p;
  p.parse_text(
      "[run]\n"
      "scenario = VAR  # inline comment\n"
      "seed = 42\n"
      "lp_mode = true\n"
      "; full-line comment\n"
      "[timing]\n"
      "tras_ns = 32.0\n",
      "inline");
  REQUIRE(p.get_string("run.scenario", "") == "VAR");
  REQUIRE(p.get_u64("run.seed", 0) == 42);
  REQUIRE(p.get_bool("run.lp_mode", false));
  REQUIRE(p.get_double("timing.tras_ns", 0.0) == 32.0);
  REQUIRE(p.get_double("timing.trp_ns", 13.75) == 13.75);  // fallback
  REQUIRE_NOTHROW(p.reject_unknown());
}

TEST_CASE("parser rejects malformed input")
{
  auto parse = [](const std::string& text) {
    ConfigParser p;
    p.parse_text(text, "t");
  };
  REQUIRE_THROWS_AS(parse("[run\nscenario = VAR\n"), ParseError);
  REQUIRE_THROWS_AS(parse("key = 1\n"), ParseError);  // outside any section
  REQUIRE_THROWS_AS(parse("[run]\nnokey\n"), ParseError);
  REQUIRE_THROWS_AS(parse("[run]\n= 5\n"), ParseError);
  REQUIRE_THROWS_AS(parse("[run]\nseed = 1\nseed = 2\n"), ParseError);
  REQUIRE_THROWS_AS(parse("[]\n"), ParseError);
}

TEST_CASE("typed getters validate their formats")
{
  ConfigParser p;
  p.parse_text("[a]\nx = 12q\ny = maybe\nz = 1.5.2\n", "t");
  REQUIRE_THROWS_AS(p.get_u64("a.x", 0), ParseError);
  REQUIRE_THROWS_AS(p.get_bool("a.y", false), ParseError);
  REQUIRE_THROWS_AS(p.get_double("a.z", 0.0), ParseError);
}

TEST_CASE("unknown keys are hard errors after extraction")
{
  ConfigParser p;
  p.parse_text("[run]\nscenario = VAR\ntypo_key = 3\n", "t");
  p.get_string("run.scenario", "");
  REQUIRE_THROWS_AS(p.reject_unknown(), ConfigError);
}

TEST_CASE("scenario and gating mode names round-trip")
{
  REQUIRE(scenario_from_string("IDEAL") == Scenario::Ideal);
  REQUIRE(scenario_from_string("pv") == Scenario::Pv);
  REQUIRE(scenario_from_string(scenario_name(Scenario::Var)) == Scenario::Var);
  REQUIRE_THROWS_AS(scenario_from_string("super"), ConfigError);
  REQUIRE(gating_mode_from_string("static_close") == GatingMode::StaticClose);
  REQUIRE(gating_mode_from_string(gating_mode_name(GatingMode::DynamicClose)) ==
          GatingMode::DynamicClose);
  REQUIRE_THROWS_AS(gating_mode_from_string("off"), ConfigError);
}

TEST_CASE("scenario config populates from parsed text")
{
  ConfigParser p;
  p.parse_text(
      "[run]\n"
      "scenario = PV\n"
      "seed = 7\n"
      "victim_count = 2\n"
      "[geometry]\n"
      "channels = 2\n"
      "rows_per_bank = 8192\n"
      "[timing]\n"
      "tras_ns = 36.0\n"
      "[variation]\n"
      "sigma_over_mean = 0.12\n"
      "[remap]\n"
      "interrupt_stall_cycles = 5\n"
      "[lp]\n"
      "idle_threshold_cycles = 250\n",
      "t");
  ScenarioConfig cfg = ScenarioConfig::from_parser(p);
  REQUIRE(cfg.scenario == Scenario::Pv);
  REQUIRE(cfg.seed == 7);
  REQUIRE(cfg.victim_count == 2);
  REQUIRE(cfg.geometry.channels == 2);
  REQUIRE(cfg.geometry.rows_per_bank == 8192);
  REQUIRE(cfg.geometry.banks_per_rank == 8);  // default
  REQUIRE(cfg.timing.tras == 36000);
  REQUIRE(cfg.timing.trc == 36000 + 13750);
  REQUIRE(cfg.variation.sigma_over_mean == 0.12);
  REQUIRE(cfg.engine.interrupt_stall_cycles == 5);
  REQUIRE(cfg.lp_idle_threshold_cycles == 250);
}

TEST_CASE("config validation enforces the scenario coupling rules")
{
  ScenarioConfig cfg;
  cfg.scenario = Scenario::Var;
  REQUIRE_NOTHROW(cfg.validate());

  SECTION("refresh multiplier is 1x or 4x only")
  {
    cfg.refresh_multiplier = 2;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  }

  SECTION("VAR needs at least one victim")
  {
    cfg.victim_count = 0;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  }

  SECTION("geometry fields must be powers of two")
  {
    cfg.geometry.cols_per_row = 1000;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("copy cost defaults to tRC plus both bursts")
{
  ScenarioConfig cfg;
  // 45.75 ns + 4 x 1.25 + 4 x 1.25 = 55.75 ns.
  REQUIRE(cfg.copy_cost_ps() == 55750);
  cfg.copy_cost_override_ps = 40000;
  REQUIRE(cfg.copy_cost_ps() == 40000);
}

TEST_CASE("refresh section feeds the refresh config")
{
  ScenarioConfig cfg;
  cfg.refresh_multiplier = 4;
  RefreshConfig rc = cfg.refresh_config();
  REQUIRE(rc.multiplier == 4);
  REQUIRE(rc.trefi == 7812500);
  REQUIRE(rc.trefw == 64000000000ull);
  REQUIRE(rc.cells_per_row == 65536);
  REQUIRE(rc.ber == 4e-9);
}
