#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "disc/config.hpp"
#include "disc/errors.hpp"
#include "disc/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

struct Options {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  int threads = 0;
  std::string reference;
  std::string map_out;
};

int env_threads() {
  const char* v = std::getenv("DISC_THREADS");
  if (v == nullptr || *v == '\0') return 0;
  try {
    const int n = std::stoi(v);
    if (n < 1) throw std::invalid_argument("");
    return n;
  } catch (const std::exception&) {
    throw disc::ConfigError(std::string("DISC_THREADS must be a positive integer, got '") + v + "'");
  }
}

// Flag > environment > config file.
std::pair<disc::ExperimentConfig, disc::RunOptions> resolve(const Options& o) {
  auto cfg = o.config.empty() ? disc::default_config() : disc::load_config(o.config);
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  disc::RunOptions run;
  run.out_dir = cfg.output_dir;
  if (const char* env = std::getenv("DISC_OUT_DIR"); env != nullptr && *env != '\0') run.out_dir = env;
  if (!o.out.empty()) run.out_dir = o.out;
  run.threads = 1;
  if (int n = env_threads(); n > 0) run.threads = n;
  if (o.threads > 0) run.threads = o.threads;
  return {std::move(cfg), run};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage diffusion augmentation on Gaussian-mixture worlds"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (JSON); built-in default if omitted");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seeds, "Seeds to run (overrides the config)")->delimiter(',');
    sub->add_option("--threads", o.threads, "Worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
  };

  auto* gen_ref = app.add_subcommand("gen-ref", "Real splits and stage-1 reference sets");
  auto* select_neg = app.add_subcommand("select-neg", "Negative-prompt map from reference sets");
  select_neg->add_option("--reference", o.reference, "Reference file (file mode)");
  select_neg->add_option("--map-out", o.map_out, "Map output path (file mode)");
  auto* synth = app.add_subcommand("synth", "Stage-2 synthetic sets, one per policy");
  auto* train_eval = app.add_subcommand("train-eval", "Train and evaluate every run");
  auto* report = app.add_subcommand("report", "Aggregate run reports over seeds");
  auto* e2e = app.add_subcommand("e2e", "All stages, then a manifest");
  for (auto* sub : {gen_ref, select_neg, synth, train_eval, report, e2e}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    auto [cfg, run] = resolve(o);
    if (*gen_ref) {
      disc::cmd_gen_ref(cfg, run);
    } else if (*select_neg) {
      if (!o.reference.empty()) {
        const std::string out = o.map_out.empty() ? o.reference + ".negatives.json" : o.map_out;
        disc::select_negatives_file(o.reference, cfg.make_extractor(), out, cfg.hash());
      } else {
        disc::cmd_select_neg(cfg, run);
      }
    } else if (*synth) {
      disc::cmd_synth(cfg, run);
    } else if (*train_eval) {
      disc::cmd_train_eval(cfg, run);
    } else if (*report) {
      std::cout << disc::cmd_report(cfg, run);
    } else if (*e2e) {
      std::cout << disc::cmd_e2e(cfg, run);
    }
  } catch (const disc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const disc::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const disc::DegenerateInput& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return 0;
}
