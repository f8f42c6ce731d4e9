#include "disc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "disc/errors.hpp"

namespace disc {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kBaseline = "real_only";

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!first) first = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (first) std::rethrow_exception(first);
}

std::string samples_text(const LabeledSampleSet& set, const std::string& hash) {
  std::ostringstream os;
  write_samples(os, set, hash);
  return os.str();
}

LabeledSampleSet load_checked(const fs::path& path, const ExperimentConfig& cfg,
                              const std::string& hash) {
  if (!fs::exists(path)) throw DataError("missing input file: " + path.string());
  std::string file_hash;
  auto set = load_samples(path, &file_hash);
  if (file_hash != hash) {
    throw DataError(path.string() + ": written by config " + file_hash + ", current config is " +
                    hash);
  }
  if (set.dim() != cfg.world->dim() || set.num_classes() != cfg.world->num_classes()) {
    throw DataError(path.string() + ": dimension or class count differs from the config world");
  }
  return set;
}

NegativePromptMap load_map_checked(const fs::path& path, const std::string& hash) {
  std::ifstream is(path);
  if (!is) throw DataError("missing negative map: " + path.string());
  std::string file_hash;
  auto map = read_negative_map(is, &file_hash);
  if (file_hash != hash) {
    throw DataError(path.string() + ": written by config " + file_hash + ", current config is " +
                    hash);
  }
  return map;
}

SamplerConfig sampler_for(const ExperimentConfig& cfg, const RunOptions& opts, std::uint64_t seed) {
  SamplerConfig sc = cfg.sampler;
  sc.master_seed = seed;
  sc.threads = opts.threads;
  return sc;
}

std::vector<std::size_t> longtail_counts(const ExperimentConfig& cfg) {
  return build_longtail(cfg.world->num_classes(), cfg.longtail.n_max,
                        cfg.longtail.imbalance_factor);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double json_number(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

struct RunJob {
  std::uint64_t seed;
  std::string policy;  // kBaseline for the real-only run
  MixupMode mode;
};

std::vector<RunJob> run_jobs(const ExperimentConfig& cfg) {
  std::vector<RunJob> jobs;
  for (auto s : cfg.seeds) {
    for (auto mode : cfg.mixup_modes) {
      if (mode == MixupMode::None) {
        jobs.push_back({s, std::string(kBaseline), mode});
        continue;
      }
      for (const auto& p : cfg.policies) jobs.push_back({s, p.name, mode});
    }
  }
  return jobs;
}

// Row order of the aggregate table: baseline, then each mode's policies.
std::vector<std::pair<std::string, MixupMode>> table_rows(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, MixupMode>> rows;
  for (auto mode : cfg.mixup_modes) {
    if (mode == MixupMode::None) {
      rows.emplace_back(std::string(kBaseline), mode);
    } else {
      for (const auto& p : cfg.policies) rows.emplace_back(p.name, mode);
    }
  }
  return rows;
}

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample std, NaN for a single seed
};

Stat mean_std(const std::vector<double>& v) {
  Stat s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) {
    s.std = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return s;
}

std::string fmt_stat(const Stat& s) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  if (!std::isfinite(s.mean)) return "-";
  os << s.mean;
  if (std::isfinite(s.std)) os << " ± " << s.std;
  return os.str();
}

template <typename F>
auto in_stage(std::string_view stage, F&& f) {
  const std::string tag = "stage " + std::string(stage) + ": ";
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(tag + e.what());
  } catch (const DataError& e) {
    throw DataError(tag + e.what());
  } catch (const DegenerateInput& e) {
    throw DegenerateInput(tag + e.what());
  } catch (const InvariantViolation& e) {
    throw InvariantViolation(tag + e.what());
  }
}

}  // namespace

fs::path seed_dir(const fs::path& out, std::uint64_t seed) {
  return out / ("seed_" + std::to_string(seed));
}

std::string run_name(std::string_view policy, MixupMode mode) {
  return std::string(policy) + "__" + std::string(mixup_mode_name(mode));
}

std::uint64_t stage_seed(std::uint64_t seed, std::string_view purpose) {
  return mix_keys(seed, fnv1a64(purpose));
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + tmp.string());
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!os) throw DataError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void cmd_gen_ref(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto hash = cfg.hash();
  const auto schedule = cfg.make_schedule();
  const AnalyticDenoiser denoiser(*cfg.world, schedule);
  const auto counts = longtail_counts(cfg);
  const int C = cfg.world->num_classes();

  ordered_json resolved;
  resolved["format"] = "disc-resolved-config v1";
  resolved["config_hash"] = hash;
  resolved["config"] = cfg.resolved_json();
  write_file_atomic(opts.out_dir / "config.resolved.json", resolved.dump(2) + "\n");

  for (auto s : cfg.seeds) {
    const auto dir = seed_dir(opts.out_dir, s);
    LabeledSampleSet train(cfg.world->dim(), C), test(cfg.world->dim(), C);
    for (int c = 0; c < C; ++c) {
      train.append(cfg.world->sample_class_data(c, counts[static_cast<std::size_t>(c)],
                                                stage_seed(s, "train")));
      test.append(cfg.world->sample_class_data(c, cfg.longtail.test_per_class,
                                               stage_seed(s, "test")));
    }
    write_file_atomic(dir / "real_train.tsv", samples_text(train, hash));
    write_file_atomic(dir / "real_test.tsv", samples_text(test, hash));

    const auto sc = sampler_for(cfg, opts, stage_seed(s, "reference"));
    const auto ref = generate_reference_set(denoiser, cfg.reference.policy, cfg.reference.per_class,
                                            sc, schedule, &train);
    write_file_atomic(dir / "reference.tsv", samples_text(ref, hash));
  }
}

NegativePromptMap select_negatives_file(const fs::path& reference, const FeatureExtractor& extractor,
                                        const fs::path& out, const std::string& config_hash,
                                        const fs::path* extra_real) {
  if (!fs::exists(reference)) throw DataError("missing reference file: " + reference.string());
  auto ref = load_samples(reference);
  if (extra_real != nullptr) ref.append(load_samples(*extra_real));
  const auto counts = ref.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw DataError(reference.string() + ": no reference rows for class " + std::to_string(c));
    }
  }
  NegativePromptMap map;
  try {
    map = select_negatives(ref, extractor);
  } catch (const std::invalid_argument& e) {
    throw DataError(reference.string() + ": " + e.what());
  }
  std::ostringstream os;
  write_negative_map(os, map, config_hash);
  write_file_atomic(out, os.str());
  return map;
}

void cmd_select_neg(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto hash = cfg.hash();
  const auto extractor = cfg.make_extractor();
  for (auto s : cfg.seeds) {
    const auto dir = seed_dir(opts.out_dir, s);
    (void)load_checked(dir / "reference.tsv", cfg, hash);
    const fs::path real = dir / "real_train.tsv";
    select_negatives_file(dir / "reference.tsv", extractor, dir / "negatives.json", hash,
                          cfg.reference.mix_real ? &real : nullptr);
  }
}

void cmd_synth(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto hash = cfg.hash();
  const auto schedule = cfg.make_schedule();
  const AnalyticDenoiser denoiser(*cfg.world, schedule);
  const int C = cfg.world->num_classes();
  bool needs_map = false;
  for (const auto& p : cfg.policies) needs_map = needs_map || p.uses_negative();

  for (auto s : cfg.seeds) {
    const auto dir = seed_dir(opts.out_dir, s);
    const auto train = load_checked(dir / "real_train.tsv", cfg, hash);
    const auto quotas = uniformize_plan(train.class_counts());
    std::optional<NegativePromptMap> map;
    if (needs_map) {
      if (!fs::exists(dir / "negatives.json")) {
        throw DataError("policies with a negative class need " + (dir / "negatives.json").string() +
                        "; run select-neg first");
      }
      map = load_map_checked(dir / "negatives.json", hash);
      if (map->negative.size() != static_cast<std::size_t>(C)) {
        throw DataError((dir / "negatives.json").string() + ": class count differs from the config");
      }
    }
    for (const auto& policy : cfg.policies) {
      LabeledSampleSet synth(cfg.world->dim(), C);
      for (int c = 0; c < C; ++c) {
        const auto q = quotas[static_cast<std::size_t>(c)];
        if (q == 0) continue;
        SampleRequest req;
        req.pos_class = c;
        if (policy.uses_negative()) req.neg_class = map->negative[static_cast<std::size_t>(c)];
        req.count = q;
        req.init_pool = &train;
        req.source = Source::Synthetic;
        const auto sc = sampler_for(cfg, opts, mix_keys(stage_seed(s, "synth"), static_cast<std::uint64_t>(c)));
        synth.append(sample(denoiser, policy, req, sc, schedule));
      }
      write_file_atomic(dir / ("synth_" + policy.name + ".tsv"), samples_text(synth, hash));
    }
  }
}

void cmd_train_eval(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto hash = cfg.hash();
  const auto jobs = run_jobs(cfg);
  std::map<std::uint64_t, std::pair<LabeledSampleSet, LabeledSampleSet>> splits;
  std::map<std::pair<std::uint64_t, std::string>, LabeledSampleSet> synths;
  for (auto s : cfg.seeds) {
    const auto dir = seed_dir(opts.out_dir, s);
    splits.emplace(s, std::pair{load_checked(dir / "real_train.tsv", cfg, hash),
                                load_checked(dir / "real_test.tsv", cfg, hash)});
  }
  for (const auto& job : jobs) {
    if (job.policy == kBaseline || synths.count({job.seed, job.policy})) continue;
    const auto path = seed_dir(opts.out_dir, job.seed) / ("synth_" + job.policy + ".tsv");
    synths.emplace(std::pair{job.seed, job.policy}, load_checked(path, cfg, hash));
  }

  parallel_for(jobs.size(), opts.threads, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto& [train, test] = splits.at(job.seed);
    const LabeledSampleSet empty(cfg.world->dim(), cfg.world->num_classes());
    const bool baseline = job.policy == kBaseline;
    const auto& synth = baseline ? empty : synths.at({job.seed, job.policy});

    TrainConfig tc = cfg.train;
    tc.mixup_mode = job.mode;
    tc.seed = stage_seed(job.seed, "train");
    const auto result = train_classifier(train, synth, tc);
    const auto counts = train.class_counts();
    auto rep = evaluate(result.model, test, counts, cfg.longtail.head_threshold);
    rep.single_class_training = result.single_class;

    ordered_json j;
    j["format"] = "disc-run-report v1";
    j["config_hash"] = hash;
    j["seed"] = job.seed;
    j["policy"] = job.policy;
    j["mixup_mode"] = mixup_mode_name(job.mode);
    j["overall"] = number_or_null(rep.overall);
    j["head"] = number_or_null(rep.head);
    j["tail"] = number_or_null(rep.tail);
    j["per_class"] = rep.per_class;
    j["is_head"] = rep.is_head;
    j["train_counts"] = counts;
    j["synthetic_rows"] = synth.size();
    j["single_class_training"] = rep.single_class_training;
    j["final_loss"] = result.epoch_loss.empty() ? json(nullptr) : number_or_null(result.epoch_loss.back());
    if (!baseline && !synth.empty()) {
      std::vector<json> div;
      for (int c = 0; c < cfg.world->num_classes(); ++c) {
        const auto rows = synth.filter_class(c);
        div.push_back(rows.empty() ? json(nullptr) : json(diversity_score(rows, *cfg.world)));
      }
      j["synthetic_diversity"] = div;
      j["synthetic_confusion"] = oracle_confusion(synth, *cfg.world);
    }
    const auto dir = seed_dir(opts.out_dir, job.seed) / "runs";
    const auto name = run_name(job.policy, job.mode);
    write_file_atomic(dir / (name + ".json"), j.dump(2) + "\n");
    std::ostringstream model;
    result.model.save(model, hash);
    write_file_atomic(dir / (name + ".model.json"), model.str());
  });
}

std::string cmd_report(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto hash = cfg.hash();
  const int C = cfg.world->num_classes();
  ordered_json out;
  out["format"] = "disc-report v1";
  out["config_hash"] = hash;
  out["seeds"] = cfg.seeds;
  out["rows"] = ordered_json::array();

  std::ostringstream table;
  table << "# config " << hash << ", seeds";
  for (auto s : cfg.seeds) table << ' ' << s;
  table << ", top-1 % mean ± sample std\n";
  table << std::left << std::setw(24) << "method" << std::setw(8) << "mixup" << std::setw(18)
        << "overall" << std::setw(18) << "head" << std::setw(18) << "tail";
  for (int c = 0; c < C; ++c) table << std::setw(18) << ("class " + cfg.world->mixture(c).name);
  table << '\n';

  for (const auto& [policy, mode] : table_rows(cfg)) {
    std::vector<double> overall, head, tail;
    std::vector<std::vector<double>> per_class(static_cast<std::size_t>(C));
    for (auto s : cfg.seeds) {
      const auto path = seed_dir(opts.out_dir, s) / "runs" / (run_name(policy, mode) + ".json");
      if (!fs::exists(path)) throw DataError("missing run report: " + path.string());
      json j;
      try {
        j = json::parse(read_file(path));
      } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
      }
      if (j.value("config_hash", "") != hash) {
        throw DataError(path.string() + ": written by a different config");
      }
      overall.push_back(json_number(j.at("overall")));
      head.push_back(json_number(j.at("head")));
      tail.push_back(json_number(j.at("tail")));
      const auto pc = j.at("per_class").get<std::vector<double>>();
      if (pc.size() != per_class.size()) throw DataError(path.string() + ": class count mismatch");
      for (std::size_t c = 0; c < pc.size(); ++c) per_class[c].push_back(pc[c]);
    }
    const auto so = mean_std(overall), sh = mean_std(head), st = mean_std(tail);
    ordered_json row;
    row["method"] = policy;
    row["mixup_mode"] = mixup_mode_name(mode);
    row["overall"] = {{"mean", number_or_null(so.mean)}, {"std", number_or_null(so.std)}};
    row["head"] = {{"mean", number_or_null(sh.mean)}, {"std", number_or_null(sh.std)}};
    row["tail"] = {{"mean", number_or_null(st.mean)}, {"std", number_or_null(st.std)}};
    row["per_class"] = ordered_json::array();
    table << std::setw(24) << policy << std::setw(8) << mixup_mode_name(mode) << std::setw(18)
          << fmt_stat(so) << std::setw(18) << fmt_stat(sh) << std::setw(18) << fmt_stat(st);
    for (const auto& v : per_class) {
      const auto sc = mean_std(v);
      row["per_class"].push_back({{"mean", number_or_null(sc.mean)}, {"std", number_or_null(sc.std)}});
      table << std::setw(18) << fmt_stat(sc);
    }
    table << '\n';
    out["rows"].push_back(row);
  }
  write_file_atomic(opts.out_dir / "report.json", out.dump(2) + "\n");
  write_file_atomic(opts.out_dir / "report.txt", table.str());
  return table.str();
}

std::string cmd_e2e(const ExperimentConfig& cfg, const RunOptions& opts) {
  in_stage("gen-ref", [&] { cmd_gen_ref(cfg, opts); });
  in_stage("select-neg", [&] { cmd_select_neg(cfg, opts); });
  in_stage("synth", [&] { cmd_synth(cfg, opts); });
  in_stage("train-eval", [&] { cmd_train_eval(cfg, opts); });
  auto table = in_stage("report", [&] { return cmd_report(cfg, opts); });

  ordered_json manifest;
  manifest["format"] = "disc-manifest v1";
  manifest["config_hash"] = cfg.hash();
  manifest["config"] = cfg.resolved_json();
  manifest["seeds"] = cfg.seeds;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(opts.out_dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), opts.out_dir);
    if (rel == "manifest.json" || e.path().extension() == ".tmp") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  ordered_json entries = ordered_json::array();
  for (const auto& rel : files) {
    entries.push_back({{"path", rel.generic_string()},
                       {"fnv1a64", hex64(fnv1a64(read_file(opts.out_dir / rel)))}});
  }
  manifest["files"] = entries;
  write_file_atomic(opts.out_dir / "manifest.json", manifest.dump(2) + "\n");
  return table;
}

}  // namespace disc
