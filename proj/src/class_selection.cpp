#include "disc/class_selection.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <stdexcept>

#include "disc/errors.hpp"
#include "disc/rng.hpp"

namespace disc {

FeatureExtractor FeatureExtractor::identity(int dim) {
  if (dim < 1) throw std::invalid_argument("extractor dimension must be positive");
  return FeatureExtractor(ExtractorKind::Identity, dim, dim, 0, {});
}

FeatureExtractor FeatureExtractor::random_projection(int in_dim, int out_dim, std::uint64_t seed) {
  if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("extractor dimensions must be positive");
  Rng rng = Rng::stream(seed, 0, Stream::Projection);
  std::vector<double> m(static_cast<std::size_t>(in_dim) * static_cast<std::size_t>(out_dim));
  const double scale = 1.0 / std::sqrt(static_cast<double>(out_dim));
  for (double& v : m) v = scale * rng.normal();
  return FeatureExtractor(ExtractorKind::RandomProjection, in_dim, out_dim, seed, std::move(m));
}

std::vector<double> FeatureExtractor::extract(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(in_dim_)) {
    throw std::invalid_argument("feature extractor input dimension mismatch");
  }
  if (kind_ == ExtractorKind::Identity) return {x.begin(), x.end()};
  std::vector<double> v(static_cast<std::size_t>(out_dim_), 0.0);
  for (std::size_t o = 0; o < v.size(); ++o) {
    for (std::size_t i = 0; i < x.size(); ++i) v[o] += matrix_[o * x.size() + i] * x[i];
  }
  return v;
}

FeatureExtractor default_extractor(int dim) {
  return dim == 2 ? FeatureExtractor::identity(dim) : FeatureExtractor::random_projection(dim, 16, 7);
}

LabeledSampleSet generate_reference_set(const NoisePredictor& denoiser, const GuidancePolicy& policy,
                                        std::size_t per_class_n, const SamplerConfig& cfg,
                                        const NoiseSchedule& schedule,
                                        const LabeledSampleSet* real) {
  if (policy.kind != GuidanceKind::Cads) {
    throw std::invalid_argument("reference sets are generated with a CADS policy");
  }
  if (per_class_n < 1) throw std::invalid_argument("reference size per class must be >= 1");
  LabeledSampleSet out(denoiser.dim(), denoiser.num_classes());
  const auto counts = real ? real->class_counts() : std::vector<std::size_t>{};
  for (int c = 0; c < denoiser.num_classes(); ++c) {
    SamplerConfig class_cfg = cfg;
    class_cfg.master_seed = mix_keys(cfg.master_seed, static_cast<std::uint64_t>(c));
    SampleRequest req;
    req.pos_class = c;
    req.count = per_class_n;
    req.source = Source::Reference;
    const bool have_real = real && counts[static_cast<std::size_t>(c)] > 0;
    if (cfg.init == InitMode::FromReal && have_real) {
      req.init_pool = real;
    } else {
      class_cfg.init = InitMode::PureNoise;
    }
    out.append(sample(denoiser, policy, req, class_cfg, schedule));
  }
  return out;
}

std::vector<double> mean_feature(const LabeledSampleSet& samples, int c,
                                 const FeatureExtractor& extractor) {
  std::vector<double> mean(static_cast<std::size_t>(extractor.out_dim()), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples.label(i) != c) continue;
    const auto f = extractor.extract(samples.x(i));
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += f[j];
    ++n;
  }
  if (n == 0) throw DataError("class " + std::to_string(c) + " has no samples");
  for (double& v : mean) v /= static_cast<double>(n);
  return mean;
}

double cosine_similarity(std::span<const double> v, std::span<const double> v_prime) {
  if (v.size() != v_prime.size()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
  double dot = 0.0, nv = 0.0, nw = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    dot += v[i] * v_prime[i];
    nv += v[i] * v[i];
    nw += v_prime[i] * v_prime[i];
  }
  if (nv == 0.0 || nw == 0.0) throw DegenerateInput("cosine similarity of a zero-norm vector");
  const double s = dot / (std::sqrt(nv) * std::sqrt(nw));
  return std::clamp(s, -1.0, 1.0);
}

NegativePromptMap select_negatives(const LabeledSampleSet& reference,
                                   const FeatureExtractor& extractor) {
  const int classes = reference.num_classes();
  if (classes < 2) throw std::invalid_argument("negative selection needs at least 2 classes");
  std::vector<std::vector<double>> means;
  for (int c = 0; c < classes; ++c) means.push_back(mean_feature(reference, c, extractor));

  const auto C = static_cast<std::size_t>(classes);
  NegativePromptMap map;
  map.similarity.assign(C, std::vector<double>(C, 0.0));
  for (std::size_t a = 0; a < C; ++a) {
    map.similarity[a][a] = 1.0;
    for (std::size_t b = a + 1; b < C; ++b) {
      const double s = cosine_similarity(means[a], means[b]);
      map.similarity[a][b] = s;
      map.similarity[b][a] = s;
    }
  }
  map.negative.assign(C, -1);
  map.tie_broken.assign(C, false);
  for (std::size_t a = 0; a < C; ++a) {
    double best = -2.0;
    for (std::size_t b = 0; b < C; ++b) {
      if (b == a) continue;
      const double s = map.similarity[a][b];
      if (s > best) {
        best = s;
        map.negative[a] = static_cast<int>(b);
        map.tie_broken[a] = false;
      } else if (s == best) {
        map.tie_broken[a] = true;
      }
    }
  }
  return map;
}

void write_negative_map(std::ostream& os, const NegativePromptMap& map,
                        const std::string& config_hash) {
  nlohmann::ordered_json j;
  j["format"] = "disc-negative-map v1";
  j["config_hash"] = config_hash;
  j["classes"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < map.negative.size(); ++c) {
    nlohmann::ordered_json row;
    row["class"] = c;
    row["negative"] = map.negative[c];
    row["tie_broken"] = static_cast<bool>(map.tie_broken[c]);
    row["similarity"] = map.similarity[c];
    j["classes"].push_back(row);
  }
  os << j.dump(2) << '\n';
}

NegativePromptMap read_negative_map(std::istream& is, std::string* config_hash) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("negative map: ") + e.what());
  }
  try {
    if (j.at("format") != "disc-negative-map v1") throw DataError("negative map: unknown format");
    if (config_hash) *config_hash = j.at("config_hash").get<std::string>();
    NegativePromptMap map;
    const auto& rows = j.at("classes");
    const std::size_t C = rows.size();
    for (std::size_t c = 0; c < C; ++c) {
      const auto& row = rows.at(c);
      if (row.at("class").get<std::size_t>() != c) throw DataError("negative map: classes out of order");
      const int neg = row.at("negative").get<int>();
      if (neg < 0 || static_cast<std::size_t>(neg) >= C || static_cast<std::size_t>(neg) == c) {
        throw DataError("negative map: invalid negative for class " + std::to_string(c));
      }
      map.negative.push_back(neg);
      map.tie_broken.push_back(row.at("tie_broken").get<bool>());
      map.similarity.push_back(row.at("similarity").get<std::vector<double>>());
      if (map.similarity.back().size() != C) throw DataError("negative map: bad similarity row");
    }
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("negative map: ") + e.what());
  }
}

}  // namespace disc
