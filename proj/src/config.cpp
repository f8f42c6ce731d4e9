#include "disc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "disc/errors.hpp"

namespace disc {

using nlohmann::json;
using nlohmann::ordered_json;

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

namespace {

// Walks one JSON object, remembering its path for diagnostics and rejecting
// keys nobody asked for.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
    throw ConfigError("config field '" + path + "': " + msg);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(at(key), "has the wrong type");
    }
  }

  template <typename T>
  void get_positive(const std::string& key, T& out) {
    get(key, out);
    if (!(out > T{0})) fail(at(key), "must be positive");
  }

  template <typename Enum, typename Parse>
  void get_enum(const std::string& key, Enum& out, Parse parse) {
    if (!has(key)) return;
    const auto& v = obj_.at(key);
    if (!v.is_string()) fail(at(key), "must be a string");
    try {
      out = parse(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
      fail(at(key), e.what());
    }
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) fail(at(k), "unknown field");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

AnnealConfig parse_anneal(const json& j, const std::string& path) {
  AnnealConfig a;
  if (j.is_boolean()) {
    if (!j.get<bool>()) Fields::fail(path, "use omission rather than false to disable annealing");
    return a;
  }
  Fields f(j, path);
  f.get("tau1", a.tau1);
  f.get("tau2", a.tau2);
  f.get("noise_scale", a.noise_scale);
  f.get("psi", a.psi);
  f.finish();
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    Fields::fail(path, e.what());
  }
  return a;
}

GuidancePolicy parse_policy(const json& j, const std::string& path, bool require_name) {
  Fields f(j, path);
  GuidancePolicy p;
  f.get("name", p.name);
  if (require_name && p.name.empty()) Fields::fail(f.at("name"), "is required");
  if (p.name.find_first_of(" \t\n") != std::string::npos) {
    Fields::fail(f.at("name"), "must not contain whitespace");
  }
  if (!f.has("kind")) Fields::fail(f.at("kind"), "is required");
  f.get_enum("kind", p.kind, parse_kind);
  f.get("w", p.w);
  if (f.has("anneal")) p.anneal = parse_anneal(f.raw("anneal"), f.at("anneal"));
  if (f.has("tau")) {
    double tau = 0.0;
    f.get("tau", tau);
    p.tau = tau;
  }
  if (f.has("alpha")) {
    double alpha = 0.0;
    f.get("alpha", alpha);
    p.alpha = alpha;
  }
  if (p.kind == GuidanceKind::DiscDs) p.tau_mode = TauMode::Dynamic;
  f.get_enum("tau_mode", p.tau_mode, parse_tau_mode);
  f.get_enum("distance_source", p.distance_source, parse_distance_source);
  f.finish();
  if (p.name.empty()) p.name = std::string(kind_name(p.kind));
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    Fields::fail(path, e.what());
  }
  return p;
}

ordered_json policy_to_json(const GuidancePolicy& p) {
  ordered_json j;
  j["name"] = p.name;
  j["kind"] = kind_name(p.kind);
  j["w"] = p.w;
  if (p.anneal) {
    j["anneal"] = {{"tau1", p.anneal->tau1},
                   {"tau2", p.anneal->tau2},
                   {"noise_scale", p.anneal->noise_scale},
                   {"psi", p.anneal->psi}};
  }
  if (p.tau) j["tau"] = *p.tau;
  j["tau_mode"] = tau_mode_name(p.tau_mode);
  if (p.alpha) j["alpha"] = *p.alpha;
  j["distance_source"] = distance_source_name(p.distance_source);
  return j;
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

std::filesystem::path default_preset_dir() { return DISC_DEFAULT_PRESET_DIR; }

GaussianMixtureWorld world_from_json(const json& j, const std::string& name) {
  Fields f(j, name.empty() ? "world" : name);
  int dim = 0;
  double kappa = 8.0;
  std::string wname = name;
  std::vector<double> priors;
  f.get("name", wname);
  f.get_positive("dim", dim);
  f.get("kappa", kappa);
  std::vector<ClassMixture> classes;
  if (!f.has("classes") || !f.raw("classes").is_array() || f.raw("classes").empty()) {
    Fields::fail(f.at("classes"), "must be a non-empty array");
  }
  const auto& arr = f.raw("classes");
  for (std::size_t c = 0; c < arr.size(); ++c) {
    const std::string cpath = f.at("classes") + "[" + std::to_string(c) + "]";
    Fields cf(arr[c], cpath);
    ClassMixture cls;
    cf.get("name", cls.name);
    if (cls.name.empty()) cls.name = std::to_string(c);
    if (!cf.has("components") || !cf.raw("components").is_array()) {
      Fields::fail(cf.at("components"), "must be an array");
    }
    const auto& comps = cf.raw("components");
    for (std::size_t k = 0; k < comps.size(); ++k) {
      Fields kf(comps[k], cf.at("components") + "[" + std::to_string(k) + "]");
      MixtureComponent comp;
      kf.get("weight", comp.weight);
      kf.get("mean", comp.mean);
      kf.get("std", comp.std);
      kf.finish();
      cls.components.push_back(std::move(comp));
    }
    cf.finish();
    classes.push_back(std::move(cls));
  }
  if (f.has("priors")) {
    f.get("priors", priors);
  } else {
    priors.assign(classes.size(), 1.0 / static_cast<double>(classes.size()));
  }
  f.finish();
  try {
    return GaussianMixtureWorld(dim, std::move(classes), std::move(priors), kappa, wname);
  } catch (const std::invalid_argument& e) {
    Fields::fail(name.empty() ? "world" : name, e.what());
  }
}

ordered_json world_to_json(const GaussianMixtureWorld& world) {
  ordered_json j;
  j["name"] = world.name();
  j["dim"] = world.dim();
  j["kappa"] = world.kappa();
  j["priors"] = std::vector<double>(world.priors().begin(), world.priors().end());
  j["classes"] = ordered_json::array();
  for (int c = 0; c < world.num_classes(); ++c) {
    const auto& m = world.mixture(c);
    ordered_json cls;
    cls["name"] = m.name;
    cls["components"] = ordered_json::array();
    for (const auto& comp : m.components) {
      cls["components"].push_back({{"weight", comp.weight}, {"mean", comp.mean}, {"std", comp.std}});
    }
    j["classes"].push_back(cls);
  }
  return j;
}

GaussianMixtureWorld load_preset(const std::string& name, const std::filesystem::path& dir) {
  if (name.empty() || name.find_first_of("/\\") != std::string::npos) {
    throw ConfigError("config field 'world.preset': invalid preset name '" + name + "'");
  }
  const auto path = dir / (name + ".json");
  std::ifstream is(path);
  if (!is) {
    throw ConfigError("config field 'world.preset': unknown preset '" + name + "' (looked in " +
                      dir.string() + ")");
  }
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("preset '" + name + "': " + e.what());
  }
  return world_from_json(j, "preset:" + name);
}

NoiseSchedule ExperimentConfig::make_schedule() const {
  return NoiseSchedule::linear(schedule.num_train_steps, schedule.beta_min, schedule.beta_max);
}

FeatureExtractor ExperimentConfig::make_extractor() const {
  const int dim = world->dim();
  if (!reference.extractor.explicit_kind) return default_extractor(dim);
  if (reference.extractor.kind == ExtractorKind::Identity) return FeatureExtractor::identity(dim);
  return FeatureExtractor::random_projection(dim, reference.extractor.out_dim,
                                             reference.extractor.seed);
}

ordered_json ExperimentConfig::resolved_json() const {
  ordered_json j;
  j["world_source"] = world_source;
  j["world"] = world_to_json(*world);
  j["schedule"] = {{"num_train_steps", schedule.num_train_steps},
                   {"beta_min", schedule.beta_min},
                   {"beta_max", schedule.beta_max}};
  j["sampler"] = {{"num_steps", sampler.num_steps},
                  {"stepper", stepper_name(sampler.stepper)},
                  {"init", init_mode_name(sampler.init)},
                  {"strength", sampler.strength}};
  const auto ex = make_extractor();
  j["reference"] = {{"per_class", reference.per_class},
                    {"policy", policy_to_json(reference.policy)},
                    {"extractor",
                     {{"kind", ex.kind() == ExtractorKind::Identity ? "identity" : "random_projection"},
                      {"out_dim", ex.out_dim()},
                      {"seed", ex.seed()}}},
                    {"mix_real", reference.mix_real}};
  j["policies"] = ordered_json::array();
  for (const auto& p : policies) j["policies"].push_back(policy_to_json(p));
  j["longtail"] = {{"n_max", longtail.n_max},
                   {"imbalance_factor", longtail.imbalance_factor},
                   {"test_per_class", longtail.test_per_class},
                   {"head_threshold", longtail.head_threshold}};
  ordered_json modes = ordered_json::array();
  for (auto m : mixup_modes) modes.push_back(mixup_mode_name(m));
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"lr", train.lr},
                {"momentum", train.momentum},
                {"weight_decay", train.weight_decay},
                {"mixup_modes", modes},
                {"mixup_beta_a", train.mixup_beta_a},
                {"classifier", classifier_kind_name(train.classifier)},
                {"hidden", train.hidden}};
  j["seeds"] = seeds;
  return j;
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(resolved_json().dump())); }

ExperimentConfig parse_config(const std::string& text,
                              const std::optional<std::filesystem::path>& preset_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config syntax error at " + line_col(text, e.byte) + ": " + e.what());
  }
  ExperimentConfig cfg;
  Fields top(root, "");

  std::filesystem::path presets = preset_dir.value_or(default_preset_dir());
  if (top.has("preset_dir")) {
    std::string d;
    top.get("preset_dir", d);
    presets = d;
  }

  if (top.has("world")) {
    const auto& w = top.raw("world");
    if (w.is_object() && w.contains("preset")) {
      Fields wf(w, "world");
      wf.get("preset", cfg.world_source);
      wf.finish();
      cfg.world = load_preset(cfg.world_source, presets);
    } else if (w.is_object() && w.contains("inline")) {
      Fields wf(w, "world");
      cfg.world_source = "inline";
      cfg.world = world_from_json(wf.raw("inline"), "world.inline");
      wf.finish();
    } else {
      Fields::fail("world", "needs either 'preset' or 'inline'");
    }
  } else {
    cfg.world = load_preset(cfg.world_source, presets);
  }

  if (top.has("schedule")) {
    Fields f(top.raw("schedule"), "schedule");
    f.get_positive("num_train_steps", cfg.schedule.num_train_steps);
    f.get("beta_min", cfg.schedule.beta_min);
    f.get("beta_max", cfg.schedule.beta_max);
    f.finish();
  }
  try {
    (void)cfg.make_schedule();
  } catch (const std::invalid_argument& e) {
    Fields::fail("schedule", e.what());
  }

  cfg.sampler.init = InitMode::FromReal;
  if (top.has("sampler")) {
    Fields f(top.raw("sampler"), "sampler");
    f.get_positive("num_steps", cfg.sampler.num_steps);
    f.get_enum("stepper", cfg.sampler.stepper, parse_stepper);
    f.get_enum("init", cfg.sampler.init, parse_init_mode);
    f.get("strength", cfg.sampler.strength);
    f.finish();
  }
  try {
    cfg.sampler.validate(cfg.make_schedule());
  } catch (const std::invalid_argument& e) {
    Fields::fail("sampler", e.what());
  }

  cfg.reference.policy.name = "reference_cads";
  if (top.has("reference")) {
    Fields f(top.raw("reference"), "reference");
    f.get_positive("per_class", cfg.reference.per_class);
    if (f.has("policy")) {
      cfg.reference.policy = parse_policy(f.raw("policy"), "reference.policy", false);
      if (cfg.reference.policy.kind != GuidanceKind::Cads) {
        Fields::fail("reference.policy.kind", "reference sets use kind cads");
      }
    }
    if (f.has("extractor")) {
      Fields ef(f.raw("extractor"), "reference.extractor");
      cfg.reference.extractor.explicit_kind = ef.has("kind");
      ef.get_enum("kind", cfg.reference.extractor.kind, [](const std::string& s) {
        if (s == "identity") return ExtractorKind::Identity;
        if (s == "random_projection") return ExtractorKind::RandomProjection;
        throw std::invalid_argument("unknown extractor kind '" + s + "'");
      });
      ef.get_positive("out_dim", cfg.reference.extractor.out_dim);
      ef.get("seed", cfg.reference.extractor.seed);
      ef.finish();
    }
    f.get("mix_real", cfg.reference.mix_real);
    f.finish();
  }

  if (top.has("policies")) {
    const auto& arr = top.raw("policies");
    if (!arr.is_array() || arr.empty()) Fields::fail("policies", "must be a non-empty array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "policies[" + std::to_string(i) + "]";
      auto p = parse_policy(arr[i], path, false);
      if (!names.insert(p.name).second) Fields::fail(path + ".name", "duplicate policy name");
      cfg.policies.push_back(std::move(p));
    }
  } else {
    cfg.policies = default_config().policies;
  }

  if (top.has("longtail")) {
    Fields f(top.raw("longtail"), "longtail");
    f.get_positive("n_max", cfg.longtail.n_max);
    f.get("imbalance_factor", cfg.longtail.imbalance_factor);
    f.get_positive("test_per_class", cfg.longtail.test_per_class);
    f.get("head_threshold", cfg.longtail.head_threshold);
    f.finish();
  }
  try {
    (void)build_longtail(cfg.world->num_classes(), cfg.longtail.n_max, cfg.longtail.imbalance_factor);
  } catch (const std::invalid_argument& e) {
    Fields::fail("longtail", e.what());
  }

  if (top.has("train")) {
    Fields f(top.raw("train"), "train");
    f.get("epochs", cfg.train.epochs);
    f.get_positive("batch_size", cfg.train.batch_size);
    f.get("lr", cfg.train.lr);
    f.get("momentum", cfg.train.momentum);
    f.get("weight_decay", cfg.train.weight_decay);
    f.get("mixup_beta_a", cfg.train.mixup_beta_a);
    f.get_enum("classifier", cfg.train.classifier, parse_classifier_kind);
    f.get("hidden", cfg.train.hidden);
    if (f.has("mixup_modes")) {
      const auto& m = f.raw("mixup_modes");
      if (!m.is_array() || m.empty()) Fields::fail("train.mixup_modes", "must be a non-empty array");
      cfg.mixup_modes.clear();
      for (const auto& v : m) {
        try {
          cfg.mixup_modes.push_back(parse_mixup_mode(v.get<std::string>()));
        } catch (const std::exception& e) {
          Fields::fail("train.mixup_modes", e.what());
        }
      }
    }
    f.finish();
  }
  try {
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    Fields::fail("train", e.what());
  }

  if (top.has("seeds")) {
    top.get("seeds", cfg.seeds);
    if (cfg.seeds.empty()) Fields::fail("seeds", "must be non-empty");
  }
  top.get("output_dir", cfg.output_dir);
  top.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string default_config_text() {
  return R"({
  "world": {"preset": "overlap5"},
  "schedule": {"num_train_steps": 1000, "beta_min": 0.0001, "beta_max": 0.02},
  "sampler": {"num_steps": 50, "stepper": "ddim", "init": "from_real", "strength": 0.8},
  "reference": {
    "per_class": 64,
    "policy": {"kind": "cads", "w": 2.0,
               "anneal": {"tau1": 0.5, "tau2": 0.9, "noise_scale": 0.1, "psi": 1.0}}
  },
  "policies": [
    {"name": "cfg", "kind": "cfg", "w": 2.0},
    {"name": "cads", "kind": "cads", "w": 2.0, "anneal": true},
    {"name": "ccfg", "kind": "ccfg", "w": 2.0, "tau": 0.8},
    {"name": "disc_ds", "kind": "disc_ds", "w": 2.0, "anneal": true, "tau": 0.8, "alpha": 0.8},
    {"name": "disc_ds_fixed_0.2", "kind": "disc_ds", "w": 2.0, "anneal": true, "tau": 0.2,
     "alpha": 0.8, "tau_mode": "fixed"},
    {"name": "disc_ds_fixed_0.5", "kind": "disc_ds", "w": 2.0, "anneal": true, "tau": 0.5,
     "alpha": 0.8, "tau_mode": "fixed"},
    {"name": "disc_ds_fixed_0.8", "kind": "disc_ds", "w": 2.0, "anneal": true, "tau": 0.8,
     "alpha": 0.8, "tau_mode": "fixed"}
  ],
  "longtail": {"n_max": 200, "imbalance_factor": 100, "test_per_class": 500, "head_threshold": 20},
  "train": {"epochs": 150, "batch_size": 32, "lr": 0.01, "momentum": 0.9,
            "mixup_modes": ["none", "all"], "mixup_beta_a": 1.0, "classifier": "linear"},
  "seeds": [1, 2, 3, 4, 5],
  "output_dir": "out"
}
)";
}

ExperimentConfig default_config() {
  static const ExperimentConfig cfg = parse_config(default_config_text());
  return cfg;
}

}  // namespace disc
