#include <doctest.h>

#include <filesystem>
#include <string>

#include <json.hpp>

#include "disc/config.hpp"
#include "disc/errors.hpp"

using namespace disc;
using nlohmann::json;

namespace {

std::filesystem::path presets() { return std::filesystem::path(DISC_SOURCE_DIR) / "data/presets"; }

std::string with_policy(const json& policy) {
  json j = json::parse(default_config_text());
  j["preset_dir"] = presets().string();
  j["policies"] = json::array({policy});
  return j.dump(2);
}

void expect_field_error(const json& policy, const std::string& fragment) {
  CAPTURE(policy.dump());
  CHECK_THROWS_WITH_AS(parse_config(with_policy(policy), presets()),
                       doctest::Contains(fragment.c_str()), ConfigError);
}

}  // namespace

TEST_CASE("default config parses and validates") {
  const auto cfg = parse_config(default_config_text(), presets());
  CHECK(cfg.world_source == "overlap5");
  REQUIRE(cfg.world.has_value());
  CHECK(cfg.world->num_classes() == 5);
  CHECK(cfg.sampler.num_steps == 50);
  CHECK(cfg.reference.per_class == 64);
  CHECK(cfg.seeds.size() == 5);
  CHECK(cfg.longtail.imbalance_factor == 100.0);
  for (const auto& p : cfg.policies) CHECK_NOTHROW(p.validate());
  const auto* disc_ds = &cfg.policies.front();
  for (const auto& p : cfg.policies)
    if (p.name == "disc_ds") disc_ds = &p;
  CHECK(disc_ds->kind == GuidanceKind::DiscDs);
  CHECK(disc_ds->tau_mode == TauMode::Dynamic);
  CHECK(*disc_ds->tau == 0.8);
  CHECK(*disc_ds->alpha == 0.8);
  CHECK(disc_ds->anneal->noise_scale == 0.1);
  CHECK(disc_ds->anneal->psi == 1.0);
}

TEST_CASE("config hash is stable and sensitive") {
  const auto a = parse_config(default_config_text(), presets());
  const auto b = parse_config(default_config_text(), presets());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  json j = json::parse(default_config_text());
  j["seeds"] = json::array({1, 2});
  CHECK(parse_config(j.dump(), presets()).hash() != a.hash());
  j = json::parse(default_config_text());
  j["output_dir"] = "elsewhere";
  CHECK(parse_config(j.dump(), presets()).hash() == a.hash());
}

TEST_CASE("forbidden policy combinations are rejected with the field path") {
  const json anneal = true;
  expect_field_error({{"name", "p"}, {"kind", "cfg"}, {"w", 2}, {"anneal", anneal}}, "policies[0]");
  expect_field_error({{"name", "p"}, {"kind", "cfg"}, {"w", 2}, {"tau", 0.8}}, "tau");
  expect_field_error({{"name", "p"}, {"kind", "cfg"}, {"w", 2}, {"alpha", 0.8}}, "alpha");
  expect_field_error({{"name", "p"}, {"kind", "cads"}, {"w", 2}}, "anneal");
  expect_field_error({{"name", "p"}, {"kind", "cads"}, {"w", 2}, {"anneal", anneal}, {"tau", 0.5}},
                     "tau");
  expect_field_error({{"name", "p"}, {"kind", "ccfg"}, {"w", 2}}, "tau");
  expect_field_error({{"name", "p"}, {"kind", "ccfg"}, {"w", 2}, {"tau", 0.8}, {"alpha", 0.5}},
                     "alpha");
  expect_field_error({{"name", "p"}, {"kind", "ccfg"}, {"w", 2}, {"tau", 0.8}, {"tau_mode", "dynamic"}},
                     "tau_mode");
  expect_field_error({{"name", "p"}, {"kind", "disc_ds"}, {"w", 2}, {"tau", 0.8}, {"alpha", 0.8}},
                     "anneal");
  expect_field_error({{"name", "p"}, {"kind", "disc_ds"}, {"w", 2}, {"anneal", anneal}, {"alpha", 0.8}},
                     "tau");
  expect_field_error({{"name", "p"}, {"kind", "disc_ds"}, {"w", 2}, {"anneal", anneal}, {"tau", 0.8}},
                     "alpha");
  expect_field_error({{"name", "p"}, {"kind", "disc_ds"}, {"w", 2}, {"anneal", anneal}, {"tau", 0.8},
                      {"alpha", 1.5}},
                     "alpha");
  expect_field_error({{"name", "p"}, {"kind", "cfg"}, {"w", -1}}, "w");
  expect_field_error({{"name", "p"}, {"kind", "dpm"}, {"w", 2}}, "policies[0].kind");
  expect_field_error({{"name", "p"}, {"w", 2}}, "policies[0].kind");
  expect_field_error({{"name", "p"}, {"kind", "cfg"}, {"w", "two"}}, "policies[0].w");
  expect_field_error({{"name", "p"}, {"kind", "cfg"}, {"weight", 2}}, "policies[0].weight");
  expect_field_error({{"name", "p"}, {"kind", "cads"}, {"anneal", {{"tau1", 0.9}, {"tau2", 0.5}}}},
                     "tau2");
}

TEST_CASE("other validation errors name their field") {
  auto fails = [](const std::string& text, const char* fragment) {
    CHECK_THROWS_WITH_AS(parse_config(text, presets()), doctest::Contains(fragment), ConfigError);
  };
  json j = json::parse(default_config_text());
  j["world"] = {{"preset", "no_such_world"}};
  fails(j.dump(), "world.preset");

  j = json::parse(default_config_text());
  j["seeds"] = json::array();
  fails(j.dump(), "seeds");

  j = json::parse(default_config_text());
  j["sampler"]["strength"] = 1.5;
  fails(j.dump(), "sampler");

  j = json::parse(default_config_text());
  j["sampler"]["stepper"] = "euler";
  fails(j.dump(), "sampler.stepper");

  j = json::parse(default_config_text());
  j["train"]["epochs"] = -3;
  fails(j.dump(), "train");

  j = json::parse(default_config_text());
  j["policies"].push_back(j["policies"][0]);
  fails(j.dump(), "policies");

  j = json::parse(default_config_text());
  j["bogus"] = 1;
  fails(j.dump(), "bogus");

  j = json::parse(default_config_text());
  j["reference"]["policy"] = {{"kind", "cfg"}, {"w", 2}};
  fails(j.dump(), "reference.policy");

  fails("{\n  \"seeds\": [1,\n  }\n", "line 3");
}

TEST_CASE("inline worlds") {
  json j = json::parse(default_config_text());
  j["world"] = {{"inline",
                 {{"dim", 2},
                  {"kappa", 4.0},
                  {"classes",
                   {{{"name", "x"}, {"components", {{{"weight", 1.0}, {"mean", {0, 0}}, {"std", 1.0}}}}},
                    {{"name", "y"}, {"components", {{{"weight", 1.0}, {"mean", {3, 0}}, {"std", 1.0}}}}}}},
                  {"priors", {0.5, 0.5}}}}};
  const auto cfg = parse_config(j.dump(), presets());
  CHECK(cfg.world_source == "inline");
  CHECK(cfg.world->num_classes() == 2);
  CHECK(cfg.world->kappa() == 4.0);

  j["world"]["inline"]["priors"] = {0.5, 0.6};
  CHECK_THROWS_WITH_AS(parse_config(j.dump(), presets()), doctest::Contains("world"), ConfigError);
}

TEST_CASE("world json round trip") {
  const auto w = load_preset("overlap5", presets());
  const auto back = world_from_json(world_to_json(w), "overlap5");
  CHECK(back.num_classes() == w.num_classes());
  for (int c = 0; c < w.num_classes(); ++c) CHECK(back.class_mean(c) == w.class_mean(c));
  const auto resolved = parse_config(default_config_text(), presets()).resolved_json();
  CHECK(world_from_json(resolved.at("world"), "x").num_classes() == 5);
}

TEST_CASE("fnv1a64 known values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}
