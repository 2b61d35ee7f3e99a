#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "specsim/model.hpp"

using namespace specsim;

namespace {

json base_config() {
  return json::parse(R"({
    "schema": 1,
    "profile": {"name": "vicuna-13b/vicuna-160m", "t_draft_ms": 5.61, "t_target_ms": 20.15},
    "policy": {"name": "gammatune"},
    "acceptance": {"name": "iid", "params": {"alpha": 0.7}},
    "target_tokens": 100,
    "initial_gamma": 4,
    "seed": 3
  })");
}

std::string error_field(const json& doc, ParseOptions opts = {}) {
  try {
    parse_config(doc, opts);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("inline profile yields the Table 1 ratio") {
  const SimulationConfig c = parse_config(base_config());
  CHECK(c.profile.t_draft_ms == 5.61);
  CHECK(c.profile.t_target_ms == 20.15);
  CHECK(c.profile.speedup_factor() == doctest::Approx(3.5918).epsilon(1e-4));
}

TEST_CASE("equal latencies give c = 1") {
  json doc = base_config();
  doc["profile"] = {{"t_draft_ms", 1.0}, {"t_target_ms", 1.0}};
  CHECK(parse_config(doc).profile.speedup_factor() == 1.0);
}

TEST_CASE("zero draft latency is rejected") {
  json doc = base_config();
  doc["profile"]["t_draft_ms"] = 0;
  try {
    parse_config(doc);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "profile.t_draft_ms");
    CHECK(std::string(e.what()).find("non-positive latency") != std::string::npos);
  }
}

TEST_CASE("builtin catalog holds the four measured pairs") {
  const auto& catalog = builtin_profiles();
  CHECK(catalog.size() == 4);

  const auto& v7 = find_profile("vicuna-7b-v1.5/vicuna-68m");
  CHECK(v7.t_target_ms == 14.29);
  CHECK(v7.t_draft_ms == 1.76);
  CHECK(v7.speedup_factor() == doctest::Approx(8.119).epsilon(1e-4));

  const auto& l70 = find_profile("Llama-3.1-70B/Llama-3.1-8B");
  CHECK(l70.t_target_ms == 925.05);
  CHECK(l70.t_draft_ms == 16.65);
  CHECK(l70.speedup_factor() == doctest::Approx(55.56).epsilon(1e-4));

  CHECK(find_profile("vicuna-13b-v1.5/vicuna-160m").t_target_ms == 20.15);
  CHECK(find_profile("vicuna-13b-v1.5/vicuna-160m").t_draft_ms == 5.61);
  CHECK(find_profile("Llama-3.1-8B/Llama-3.2-1B").t_target_ms == 16.65);
  CHECK(find_profile("Llama-3.1-8B/Llama-3.2-1B").t_draft_ms == 8.87);

  for (const auto& [name, p] : catalog) CHECK_MESSAGE(p.speedup_factor() > 1.0, name);

  CHECK_THROWS_WITH_AS(find_profile("unknown-pair"), doctest::Contains("unknown profile"), ConfigError);
}

TEST_CASE("builtin profile referenced by name") {
  json doc = base_config();
  doc["profile"] = "vicuna-7b-v1.5/vicuna-68m";
  CHECK(parse_config(doc).profile == find_profile("vicuna-7b-v1.5/vicuna-68m"));
  doc["profile"] = "nope";
  CHECK(error_field(doc) == "profile");
}

TEST_CASE("errors carry the field path") {
  json doc = base_config();
  doc["policy"]["name"] = "magic";
  CHECK(error_field(doc) == "policy.name");

  doc = base_config();
  doc["acceptance"]["name"] = "oracle";
  CHECK(error_field(doc) == "acceptance.name");

  doc = base_config();
  doc["policy"]["params"] = {{"eta", 1.5}};
  CHECK(error_field(doc) == "policy.params.eta");

  doc = base_config();
  doc["policy"]["params"] = {{"gamma_min", 5}, {"gamma_max", 3}};
  CHECK(error_field(doc) == "policy.params.gamma_max");

  doc = base_config();
  doc["policy"]["params"] = {{"tau", -0.1}};
  CHECK(error_field(doc) == "policy.params.tau");

  doc = base_config();
  doc["target_tokens"] = 0;
  CHECK(error_field(doc) == "target_tokens");

  doc = base_config();
  doc["initial_gamma"] = 0;
  CHECK(error_field(doc) == "initial_gamma");

  doc = base_config();
  doc["schema"] = 2;
  CHECK(error_field(doc) == "schema");

  doc = base_config();
  doc.erase("policy");
  CHECK(error_field(doc) == "policy");
}

TEST_CASE("unknown fields: strict rejects, lenient ignores") {
  json doc = base_config();
  doc["colour"] = "blue";
  doc["policy"]["params"] = {{"etaa", 0.3}};
  CHECK(error_field(doc) == "policy.params.etaa");
  doc["policy"]["params"] = json::object();
  CHECK(error_field(doc) == "colour");
  CHECK(error_field(doc, {true}) == "<no error>");
}

TEST_CASE("regime transition rows must sum to one") {
  json doc = base_config();
  doc["acceptance"] = json::parse(R"({"name": "regime", "params": {
      "regimes": [{"name": "a", "alpha": 0.9}, {"name": "b", "alpha": 0.1}],
      "transition": [[0.5, 0.5], [0.3, 0.6]]}})");
  CHECK(error_field(doc) == "acceptance.params.transition[1]");

  doc["acceptance"]["params"]["transition"] = {{0.5, 0.5}, {0.4, 0.6}};
  const auto spec = parse_config(doc).acceptance;
  CHECK(spec.regimes.size() == 2);
  CHECK(spec.transition[1][0] == 0.4);
}

TEST_CASE("regime defaults and self_transition shorthand") {
  json doc = base_config();
  doc["acceptance"] = {{"name", "regime"}};
  CHECK(parse_config(doc).acceptance == default_regime_spec());

  doc["acceptance"]["params"] = {{"self_transition", 0.7}};
  const auto spec = parse_config(doc).acceptance;
  CHECK(spec.transition[0][0] == 0.7);
  CHECK(spec.transition[0][1] == doctest::Approx(0.15));
}

TEST_CASE("config round-trips through JSON field by field") {
  json doc = base_config();
  doc["policy"]["params"] = {{"eta", 0.4}, {"delta", 3}, {"expansion_mode", "literal"}, {"tau", 0.2}};
  doc["charge_probe"] = true;
  for (const json& acc : {json::parse(R"({"name": "iid", "params": {"alpha": 0.3, "correlated": true}})"),
                          json::parse(R"({"name": "regime", "params": {"concentration": 4}})"),
                          json::parse(R"({"name": "replay", "params": {"path": "t.jsonl"}})")}) {
    doc["acceptance"] = acc;
    const SimulationConfig c = parse_config(doc);
    const SimulationConfig again = parse_config(json::parse(to_json(c).dump()));
    CHECK(again == c);
  }
}

TEST_CASE("load_config reports file and JSON problems") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "specsim_test_model";
  fs::create_directories(dir);

  CHECK_THROWS_AS(load_config(dir / "missing.json"), IoError);

  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS_WITH_AS(load_config(dir / "bad.json"), doctest::Contains("malformed JSON"), ConfigError);

  std::ofstream(dir / "good.json") << base_config().dump();
  CHECK(load_config(dir / "good.json").seed == 3);
}

TEST_CASE("dotted overrides") {
  json doc = base_config();
  apply_override(doc, "policy.name=fixed");
  apply_override(doc, "policy.params.eta=0.5");
  apply_override(doc, "seed=11");
  const SimulationConfig c = parse_config(doc);
  CHECK(c.policy.kind == PolicyKind::fixed);
  CHECK(c.policy.params.eta == 0.5);
  CHECK(c.seed == 11);

  doc["profile"] = "vicuna-7b-v1.5/vicuna-68m";
  apply_override(doc, "profile.verify_ms_per_token=0.1");
  CHECK(parse_config(doc).profile.verify_ms_per_token == 0.1);
  CHECK(parse_config(doc).profile.t_draft_ms == 1.76);

  CHECK_THROWS_AS(apply_override(doc, "novalue"), ConfigError);
}
