#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "disc/gm_world.hpp"
#include "disc/rng.hpp"
#include "disc/sample_set.hpp"

namespace disc {

enum class MixupMode { None, Random, All };
enum class ClassifierKind { Linear, Mlp };

std::string_view mixup_mode_name(MixupMode m);
MixupMode parse_mixup_mode(std::string_view s);
std::string_view classifier_kind_name(ClassifierKind k);
ClassifierKind parse_classifier_kind(std::string_view s);

struct TrainConfig {
  int epochs = 150;
  std::size_t batch_size = 512;
  double lr = 0.01;  // peak rate, cosine-decayed per epoch
  double momentum = 0.9;
  double weight_decay = 0.0;
  MixupMode mixup_mode = MixupMode::None;
  double mixup_beta_a = 1.0;
  ClassifierKind classifier = ClassifierKind::Linear;
  int hidden = 32;  // MLP width
  std::uint64_t seed = 0;

  void validate() const;
};

/// Synthetic top-up per class so every class reaches the largest count.
std::vector<std::size_t> uniformize_plan(std::span<const std::size_t> counts);

/// x = lambda * x_r + (1 - lambda) * x_s and the same for labels.
std::pair<std::vector<double>, std::vector<double>> mixup(std::span<const double> x_r,
                                                          std::span<const double> y_r,
                                                          std::span<const double> x_s,
                                                          std::span<const double> y_s,
                                                          double lambda);

struct TrainBatch {
  bool is_mixup = false;
  std::size_t rows = 0;
  std::vector<double> x;       // rows * dim
  std::vector<double> target;  // rows * classes, each row on the simplex
  std::vector<std::size_t> real_index;
  std::vector<std::ptrdiff_t> synth_index;  // -1 for plain real rows
  std::vector<double> lambda;               // 1 for plain real rows
};

/// One epoch of batches.
///  None:   one shuffled pass over the real rows.
///  Random: of the ceil(|real| / B) batches, floor(half) become Mixup batches
///          pairing random synthetic rows with random real rows.
///  All:    ceil(|synth| / B) Mixup batches consume every synthetic row exactly
///          once, each paired with a real row drawn from reshuffled passes over
///          the real set (oversampling when it is smaller); plain batches cover
///          the real set and are at least as many as the Mixup batches.
/// Mixup weights are drawn per pair from Beta(a, a). Batch order is shuffled.
std::vector<TrainBatch> build_epoch_batches(const LabeledSampleSet& real,
                                            const LabeledSampleSet& synth, const TrainConfig& cfg,
                                            Rng& rng);

/// Softmax classifier: linear, or one tanh hidden layer.
class Classifier {
 public:
  Classifier(ClassifierKind kind, int dim, int classes, int hidden, std::uint64_t seed);

  ClassifierKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int num_classes() const { return classes_; }
  int hidden() const { return hidden_; }
  std::span<const double> params() const { return params_; }

  /// Inputs are mapped to (x - shift) / scale before the first layer.
  void set_input_normalization(std::vector<double> shift, std::vector<double> scale);
  std::span<const double> input_shift() const { return in_shift_; }
  std::span<const double> input_scale() const { return in_scale_; }

  std::vector<double> predict_proba(std::span<const double> x) const;
  int predict(std::span<const double> x) const;

  /// Mean cross-entropy of the batch against its soft targets; fills `grad`
  /// (same layout as params) with its gradient.
  double loss_and_grad(const TrainBatch& batch, std::vector<double>& grad) const;
  std::vector<double>& mutable_params() { return params_; }

  void save(std::ostream& os, std::string_view config_hash = {}) const;
  static Classifier load(std::istream& is);

 private:
  void normalize(std::span<const double> x, std::span<double> out) const;
  // Expects normalised input.
  void logits(std::span<const double> xn, std::span<double> out, std::span<double> hidden) const;
  std::size_t hidden_offset() const;

  ClassifierKind kind_;
  int dim_;
  int classes_;
  int hidden_;
  // Linear: W (C x D) then b (C).
  // Mlp:    W1 (H x D), b1 (H), W2 (C x H), b2 (C).
  std::vector<double> params_;
  std::vector<double> in_shift_;
  std::vector<double> in_scale_;
};

struct TrainResult {
  Classifier model;
  bool single_class = false;  // training data carried only one label
  std::vector<double> epoch_loss;
};

/// SGD with momentum and per-epoch cosine decay over freshly built epoch
/// batches; deterministic in cfg.seed. Inputs are standardised with the
/// per-feature mean and std of the real rows.
TrainResult train_classifier(const LabeledSampleSet& real, const LabeledSampleSet& synth,
                             const TrainConfig& cfg);

struct MetricsReport {
  std::vector<double> per_class;  // top-1 accuracy in percent
  std::vector<bool> is_head;
  double head = 0.0;     // NaN if no head classes
  double tail = 0.0;     // NaN if no tail classes
  double overall = 0.0;  // macro average
  std::vector<double> diversity;                // per class, empty if not measured
  std::vector<std::vector<double>> confusion;   // oracle confusion of synthetic rows
  bool single_class_training = false;
};

/// Classes with train count >= head_threshold are head, the rest tail.
MetricsReport evaluate(const Classifier& model, const LabeledSampleSet& test,
                       std::span<const std::size_t> train_counts, std::size_t head_threshold = 20);

/// exp(mean_x KL(p(.|x) || mean_x p(.|x))) under the oracle posterior.
double diversity_score(const LabeledSampleSet& samples, const GaussianMixtureWorld& world);

/// Fraction of samples whose oracle argmax is c_minus.
double confusion_rate(const LabeledSampleSet& samples, const GaussianMixtureWorld& world,
                      int c_minus);

/// Row c: fraction of samples labelled c assigned by the oracle to each class.
std::vector<std::vector<double>> oracle_confusion(const LabeledSampleSet& samples,
                                                  const GaussianMixtureWorld& world);

}  // namespace disc
