#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "disc/gm_world.hpp"
#include "disc/guidance.hpp"
#include "disc/sample_set.hpp"
#include "disc/sampler.hpp"

namespace disc {

enum class ExtractorKind { Identity, RandomProjection };

/// Deterministic map from data vectors to feature vectors.
class FeatureExtractor {
 public:
  static FeatureExtractor identity(int dim);
  /// Gaussian projection R^in -> R^out with entries N(0, 1/out), fixed by seed.
  static FeatureExtractor random_projection(int in_dim, int out_dim, std::uint64_t seed);

  ExtractorKind kind() const { return kind_; }
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  std::uint64_t seed() const { return seed_; }
  std::vector<double> extract(std::span<const double> x) const;

 private:
  FeatureExtractor(ExtractorKind kind, int in_dim, int out_dim, std::uint64_t seed,
                   std::vector<double> matrix)
      : kind_(kind), in_dim_(in_dim), out_dim_(out_dim), seed_(seed), matrix_(std::move(matrix)) {}

  ExtractorKind kind_;
  int in_dim_;
  int out_dim_;
  std::uint64_t seed_;
  std::vector<double> matrix_;  // out x in, row-major
};

/// IDENTITY for 2-D data, otherwise a fixed-seed random projection.
FeatureExtractor default_extractor(int dim);

struct NegativePromptMap {
  std::vector<int> negative;                    // chosen c- per class
  std::vector<std::vector<double>> similarity;  // full C x C cosine matrix
  std::vector<bool> tie_broken;                 // argmax was tied; smallest id chosen
};

/// CADS samples for every class; FromReal init uses real rows of the class
/// when `real` holds any (cycled, so scarce classes are oversampled).
LabeledSampleSet generate_reference_set(const NoisePredictor& denoiser, const GuidancePolicy& policy,
                                        std::size_t per_class_n, const SamplerConfig& cfg,
                                        const NoiseSchedule& schedule,
                                        const LabeledSampleSet* real = nullptr);

std::vector<double> mean_feature(const LabeledSampleSet& samples, int c,
                                 const FeatureExtractor& extractor);

double cosine_similarity(std::span<const double> v, std::span<const double> v_prime);

/// For each class, the most cosine-similar other class by mean feature.
NegativePromptMap select_negatives(const LabeledSampleSet& reference,
                                   const FeatureExtractor& extractor);

/// Structured key-value report (JSON): per class the chosen negative and the
/// full similarity row.
void write_negative_map(std::ostream& os, const NegativePromptMap& map,
                        const std::string& config_hash);
NegativePromptMap read_negative_map(std::istream& is, std::string* config_hash = nullptr);

}  // namespace disc
