#include "disc/augment_train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <json.hpp>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "disc/errors.hpp"

namespace disc {

std::string_view mixup_mode_name(MixupMode m) {
  switch (m) {
    case MixupMode::None:
      return "none";
    case MixupMode::Random:
      return "random";
    case MixupMode::All:
      return "all";
  }
  return "?";
}

MixupMode parse_mixup_mode(std::string_view s) {
  if (s == "none") return MixupMode::None;
  if (s == "random") return MixupMode::Random;
  if (s == "all") return MixupMode::All;
  throw std::invalid_argument("unknown mixup mode '" + std::string(s) + "'");
}

std::string_view classifier_kind_name(ClassifierKind k) {
  return k == ClassifierKind::Linear ? "linear" : "mlp";
}

ClassifierKind parse_classifier_kind(std::string_view s) {
  if (s == "linear") return ClassifierKind::Linear;
  if (s == "mlp") return ClassifierKind::Mlp;
  throw std::invalid_argument("unknown classifier '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train.epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("train.lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train.momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train.weight_decay must be >= 0");
  if (!(mixup_beta_a > 0.0)) throw std::invalid_argument("train.mixup_beta_a must be > 0");
  if (classifier == ClassifierKind::Mlp && hidden < 1) {
    throw std::invalid_argument("train.hidden must be >= 1");
  }
}

std::vector<std::size_t> uniformize_plan(std::span<const std::size_t> counts) {
  if (counts.empty()) throw std::invalid_argument("uniformize_plan needs at least one class");
  const std::size_t top = *std::max_element(counts.begin(), counts.end());
  std::vector<std::size_t> quotas(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) quotas[c] = top - counts[c];
  return quotas;
}

std::pair<std::vector<double>, std::vector<double>> mixup(std::span<const double> x_r,
                                                          std::span<const double> y_r,
                                                          std::span<const double> x_s,
                                                          std::span<const double> y_s,
                                                          double lambda) {
  if (x_r.size() != x_s.size() || y_r.size() != y_s.size()) {
    throw std::invalid_argument("mixup: dimension mismatch");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("mixup: lambda outside [0, 1]");
  std::vector<double> x(x_r.size()), y(y_r.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = lambda * x_r[i] + (1.0 - lambda) * x_s[i];
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = lambda * y_r[i] + (1.0 - lambda) * y_s[i];
  return {std::move(x), std::move(y)};
}

namespace {

std::vector<double> hard_or_soft(const LabeledSampleSet& set, std::size_t i) {
  if (set.has_soft_labels()) {
    auto s = set.soft_label(i);
    return {s.begin(), s.end()};
  }
  std::vector<double> y(static_cast<std::size_t>(set.num_classes()), 0.0);
  y[static_cast<std::size_t>(set.label(i))] = 1.0;
  return y;
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::shuffle(p.begin(), p.end(), rng.engine());
  return p;
}

// Endless stream of real indices: successive independent shuffled passes.
class RealCycler {
 public:
  RealCycler(std::size_t n, Rng& rng) : n_(n), rng_(rng) {}
  std::size_t next() {
    if (pos_ == order_.size()) {
      order_ = permutation(n_, rng_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  std::size_t n_;
  Rng& rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

void push_plain(TrainBatch& b, const LabeledSampleSet& real, std::size_t r) {
  auto x = real.x(r);
  b.x.insert(b.x.end(), x.begin(), x.end());
  auto y = hard_or_soft(real, r);
  b.target.insert(b.target.end(), y.begin(), y.end());
  b.real_index.push_back(r);
  b.synth_index.push_back(-1);
  b.lambda.push_back(1.0);
  ++b.rows;
}

void push_mixed(TrainBatch& b, const LabeledSampleSet& real, std::size_t r,
                const LabeledSampleSet& synth, std::size_t s, double lambda) {
  auto [x, y] = mixup(real.x(r), hard_or_soft(real, r), synth.x(s), hard_or_soft(synth, s), lambda);
  b.x.insert(b.x.end(), x.begin(), x.end());
  b.target.insert(b.target.end(), y.begin(), y.end());
  b.real_index.push_back(r);
  b.synth_index.push_back(static_cast<std::ptrdiff_t>(s));
  b.lambda.push_back(lambda);
  ++b.rows;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

std::vector<TrainBatch> build_epoch_batches(const LabeledSampleSet& real,
                                            const LabeledSampleSet& synth, const TrainConfig& cfg,
                                            Rng& rng) {
  if (real.empty()) throw std::invalid_argument("training needs a non-empty real set");
  if (cfg.mixup_mode != MixupMode::None) {
    if (synth.empty()) throw std::invalid_argument("mixup requested with an empty synthetic set");
    if (synth.dim() != real.dim() || synth.num_classes() != real.num_classes()) {
      throw std::invalid_argument("real and synthetic sets differ in shape");
    }
  }
  const std::size_t B = cfg.batch_size;
  const std::size_t R = real.size();
  std::vector<TrainBatch> batches;

  auto plain_batches = [&](std::size_t count, RealCycler& cycler, std::size_t max_rows) {
    std::size_t emitted = 0;
    for (std::size_t k = 0; k < count; ++k) {
      TrainBatch b;
      const std::size_t rows = std::min(B, max_rows - emitted);
      for (std::size_t i = 0; i < rows; ++i) push_plain(b, real, cycler.next());
      emitted += rows;
      if (b.rows > 0) batches.push_back(std::move(b));
    }
  };

  RealCycler plain_cycler(R, rng);
  switch (cfg.mixup_mode) {
    case MixupMode::None:
      plain_batches(ceil_div(R, B), plain_cycler, R);
      break;

    case MixupMode::Random: {
      const std::size_t total = ceil_div(R, B);
      const std::size_t mixed = total / 2;
      plain_batches(total - mixed, plain_cycler, R);
      for (std::size_t k = 0; k < mixed; ++k) {
        TrainBatch b;
        b.is_mixup = true;
        for (std::size_t i = 0; i < B; ++i) {
          const std::size_t r = rng.index(R);
          const std::size_t s = rng.index(synth.size());
          push_mixed(b, real, r, synth, s, rng.beta_symmetric(cfg.mixup_beta_a));
        }
        batches.push_back(std::move(b));
      }
      break;
    }

    case MixupMode::All: {
      const std::size_t S = synth.size();
      const std::size_t mixed = ceil_div(S, B);
      const std::size_t plain = std::max(mixed, ceil_div(R, B));
      plain_batches(plain, plain_cycler, plain * B);
      const auto order = permutation(S, rng);
      RealCycler partners(R, rng);
      for (std::size_t k = 0; k < mixed; ++k) {
        TrainBatch b;
        b.is_mixup = true;
        const std::size_t end = std::min(S, (k + 1) * B);
        for (std::size_t i = k * B; i < end; ++i) {
          push_mixed(b, real, partners.next(), synth, order[i], rng.beta_symmetric(cfg.mixup_beta_a));
        }
        batches.push_back(std::move(b));
      }
      break;
    }
  }
  std::shuffle(batches.begin(), batches.end(), rng.engine());
  return batches;
}

Classifier::Classifier(ClassifierKind kind, int dim, int classes, int hidden, std::uint64_t seed)
    : kind_(kind), dim_(dim), classes_(classes), hidden_(kind == ClassifierKind::Mlp ? hidden : 0) {
  if (dim < 1 || classes < 1) throw std::invalid_argument("classifier needs positive dim and classes");
  const auto D = static_cast<std::size_t>(dim), C = static_cast<std::size_t>(classes);
  if (kind_ == ClassifierKind::Linear) {
    params_.assign(C * D + C, 0.0);
  } else {
    if (hidden < 1) throw std::invalid_argument("MLP needs a positive hidden width");
    const auto H = static_cast<std::size_t>(hidden);
    params_.assign(H * D + H + C * H + C, 0.0);
    // Random hidden layer, zero output layer: every class starts equally likely.
    Rng rng = Rng::stream(seed, 0, Stream::Weights);
    const double scale = 1.0 / std::sqrt(static_cast<double>(D));
    for (std::size_t i = 0; i < H * D; ++i) params_[i] = scale * rng.normal();
  }
  in_shift_.assign(D, 0.0);
  in_scale_.assign(D, 1.0);
}

void Classifier::set_input_normalization(std::vector<double> shift, std::vector<double> scale) {
  if (shift.size() != static_cast<std::size_t>(dim_) || scale.size() != shift.size()) {
    throw std::invalid_argument("normalisation vectors must match the input dimension");
  }
  for (double v : scale) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("normalisation scale must be positive");
  }
  in_shift_ = std::move(shift);
  in_scale_ = std::move(scale);
}

void Classifier::normalize(std::span<const double> x, std::span<double> out) const {
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = (x[j] - in_shift_[j]) / in_scale_[j];
}

std::size_t Classifier::hidden_offset() const {
  return static_cast<std::size_t>(hidden_) * static_cast<std::size_t>(dim_) +
         static_cast<std::size_t>(hidden_);
}

void Classifier::logits(std::span<const double> x, std::span<double> out,
                        std::span<double> hidden) const {
  const auto D = static_cast<std::size_t>(dim_), C = static_cast<std::size_t>(classes_);
  if (kind_ == ClassifierKind::Linear) {
    const double* W = params_.data();
    const double* b = W + C * D;
    for (std::size_t c = 0; c < C; ++c) {
      double acc = b[c];
      for (std::size_t j = 0; j < D; ++j) acc += W[c * D + j] * x[j];
      out[c] = acc;
    }
    return;
  }
  const auto H = static_cast<std::size_t>(hidden_);
  const double* W1 = params_.data();
  const double* b1 = W1 + H * D;
  const double* W2 = b1 + H;
  const double* b2 = W2 + C * H;
  for (std::size_t h = 0; h < H; ++h) {
    double acc = b1[h];
    for (std::size_t j = 0; j < D; ++j) acc += W1[h * D + j] * x[j];
    hidden[h] = std::tanh(acc);
  }
  for (std::size_t c = 0; c < C; ++c) {
    double acc = b2[c];
    for (std::size_t h = 0; h < H; ++h) acc += W2[c * H + h] * hidden[h];
    out[c] = acc;
  }
}

namespace {
void softmax_inplace(std::span<double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : z) v /= sum;
}
}  // namespace

std::vector<double> Classifier::predict_proba(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("classifier input dimension mismatch");
  std::vector<double> z(static_cast<std::size_t>(classes_));
  std::vector<double> h(static_cast<std::size_t>(hidden_));
  std::vector<double> xn(x.size());
  normalize(x, xn);
  logits(xn, z, h);
  softmax_inplace(z);
  return z;
}

int Classifier::predict(std::span<const double> x) const {
  const auto p = predict_proba(x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double Classifier::loss_and_grad(const TrainBatch& batch, std::vector<double>& grad) const {
  grad.assign(params_.size(), 0.0);
  if (batch.rows == 0) return 0.0;
  const auto D = static_cast<std::size_t>(dim_), C = static_cast<std::size_t>(classes_);
  const auto H = static_cast<std::size_t>(hidden_);
  std::vector<double> p(C), h(H), delta(C), dh(H), x(D);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.rows);
  for (std::size_t r = 0; r < batch.rows; ++r) {
    normalize(std::span<const double>(batch.x).subspan(r * D, D), x);
    const auto y = std::span<const double>(batch.target).subspan(r * C, C);
    logits(x, p, h);
    softmax_inplace(p);
    for (std::size_t c = 0; c < C; ++c) {
      if (y[c] > 0.0) loss -= y[c] * std::log(std::max(p[c], std::numeric_limits<double>::min()));
      delta[c] = (p[c] - y[c]) * inv_n;
    }
    if (kind_ == ClassifierKind::Linear) {
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t j = 0; j < D; ++j) grad[c * D + j] += delta[c] * x[j];
        grad[C * D + c] += delta[c];
      }
    } else {
      const double* W2 = params_.data() + hidden_offset();
      double* gW1 = grad.data();
      double* gb1 = gW1 + H * D;
      double* gW2 = gb1 + H;
      double* gb2 = gW2 + C * H;
      std::fill(dh.begin(), dh.end(), 0.0);
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t k = 0; k < H; ++k) {
          gW2[c * H + k] += delta[c] * h[k];
          dh[k] += delta[c] * W2[c * H + k];
        }
        gb2[c] += delta[c];
      }
      for (std::size_t k = 0; k < H; ++k) {
        const double pre = dh[k] * (1.0 - h[k] * h[k]);
        for (std::size_t j = 0; j < D; ++j) gW1[k * D + j] += pre * x[j];
        gb1[k] += pre;
      }
    }
  }
  return loss * inv_n;
}

void Classifier::save(std::ostream& os, std::string_view config_hash) const {
  nlohmann::ordered_json j;
  j["format"] = "disc-classifier v1";
  if (!config_hash.empty()) j["config_hash"] = std::string(config_hash);
  j["kind"] = classifier_kind_name(kind_);
  j["dim"] = dim_;
  j["classes"] = classes_;
  j["hidden"] = hidden_;
  std::vector<std::string> params;
  params.reserve(params_.size());
  for (double v : params_) params.push_back(format_double(v));
  j["params"] = params;
  std::vector<std::string> shift, scale;
  for (double v : in_shift_) shift.push_back(format_double(v));
  for (double v : in_scale_) scale.push_back(format_double(v));
  j["input_shift"] = shift;
  j["input_scale"] = scale;
  os << j.dump(1) << '\n';
}

Classifier Classifier::load(std::istream& is) {
  try {
    nlohmann::json j;
    is >> j;
    if (j.at("format") != "disc-classifier v1") throw DataError("classifier: unknown format");
    const auto kind = parse_classifier_kind(j.at("kind").get<std::string>());
    Classifier model(kind, j.at("dim").get<int>(), j.at("classes").get<int>(),
                     std::max(1, j.at("hidden").get<int>()), 0);
    auto parse_all = [](const nlohmann::json& arr, std::vector<double>& out) {
      const auto txts = arr.get<std::vector<std::string>>();
      if (txts.size() != out.size()) throw DataError("classifier: parameter count mismatch");
      for (std::size_t i = 0; i < txts.size(); ++i) {
        const auto& txt = txts[i];
        auto res = std::from_chars(txt.data(), txt.data() + txt.size(), out[i]);
        if (res.ec != std::errc() || res.ptr != txt.data() + txt.size()) {
          throw DataError("classifier: bad parameter '" + txt + "'");
        }
      }
    };
    parse_all(j.at("params"), model.params_);
    std::vector<double> shift(model.in_shift_.size()), scale(model.in_scale_.size());
    parse_all(j.at("input_shift"), shift);
    parse_all(j.at("input_scale"), scale);
    model.set_input_normalization(std::move(shift), std::move(scale));
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("classifier: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("classifier: ") + e.what());
  }
}

TrainResult train_classifier(const LabeledSampleSet& real, const LabeledSampleSet& synth,
                             const TrainConfig& cfg) {
  cfg.validate();
  if (real.empty()) throw std::invalid_argument("training needs a non-empty real set");
  Classifier model(cfg.classifier, real.dim(), real.num_classes(), cfg.hidden, cfg.seed);
  {
    const auto D = static_cast<std::size_t>(real.dim());
    std::vector<double> mean(D, 0.0), sd(D, 0.0);
    const double n = static_cast<double>(real.size());
    for (std::size_t i = 0; i < real.size(); ++i) {
      for (std::size_t j = 0; j < D; ++j) mean[j] += real.x(i)[j] / n;
    }
    for (std::size_t i = 0; i < real.size(); ++i) {
      for (std::size_t j = 0; j < D; ++j) sd[j] += (real.x(i)[j] - mean[j]) * (real.x(i)[j] - mean[j]) / n;
    }
    for (double& v : sd) v = v > 0.0 ? std::sqrt(v) : 1.0;
    model.set_input_normalization(std::move(mean), std::move(sd));
  }

  const auto counts_real = real.class_counts();
  std::size_t labels_seen = 0;
  for (std::size_t c = 0; c < counts_real.size(); ++c) {
    const bool in_synth = cfg.mixup_mode != MixupMode::None && !synth.empty() &&
                          synth.class_counts()[c] > 0;
    if (counts_real[c] > 0 || in_synth) ++labels_seen;
  }

  TrainResult result{std::move(model), labels_seen < 2, {}};
  auto& params = result.model.mutable_params();
  std::vector<double> velocity(params.size(), 0.0), grad;
  for (int e = 0; e < cfg.epochs; ++e) {
    const double lr =
        0.5 * cfg.lr * (1.0 + std::cos(std::numbers::pi * e / static_cast<double>(cfg.epochs)));
    Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(e), Stream::Batches);
    const auto batches = build_epoch_batches(real, synth, cfg, rng);
    double epoch_loss = 0.0;
    std::size_t rows = 0;
    for (const auto& b : batches) {
      epoch_loss += result.model.loss_and_grad(b, grad) * static_cast<double>(b.rows);
      rows += b.rows;
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i] + cfg.weight_decay * params[i];
        velocity[i] = cfg.momentum * velocity[i] + g;
        params[i] -= lr * velocity[i];
      }
    }
    result.epoch_loss.push_back(rows ? epoch_loss / static_cast<double>(rows) : 0.0);
  }
  return result;
}

MetricsReport evaluate(const Classifier& model, const LabeledSampleSet& test,
                       std::span<const std::size_t> train_counts, std::size_t head_threshold) {
  const auto C = static_cast<std::size_t>(test.num_classes());
  if (train_counts.size() != C) throw std::invalid_argument("train counts must cover every class");
  std::vector<std::size_t> total(C, 0), correct(C, 0);
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto c = static_cast<std::size_t>(test.label(i));
    ++total[c];
    if (model.predict(test.x(i)) == test.label(i)) ++correct[c];
  }
  MetricsReport rep;
  rep.per_class.resize(C);
  rep.is_head.resize(C);
  double head_sum = 0.0, tail_sum = 0.0, all_sum = 0.0;
  std::size_t n_head = 0, n_tail = 0;
  for (std::size_t c = 0; c < C; ++c) {
    if (total[c] == 0) throw DataError("test set has no samples of class " + std::to_string(c));
    rep.per_class[c] = 100.0 * static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    rep.is_head[c] = train_counts[c] >= head_threshold;
    all_sum += rep.per_class[c];
    if (rep.is_head[c]) {
      head_sum += rep.per_class[c];
      ++n_head;
    } else {
      tail_sum += rep.per_class[c];
      ++n_tail;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.head = n_head ? head_sum / static_cast<double>(n_head) : nan;
  rep.tail = n_tail ? tail_sum / static_cast<double>(n_tail) : nan;
  rep.overall = all_sum / static_cast<double>(C);
  return rep;
}

double diversity_score(const LabeledSampleSet& samples, const GaussianMixtureWorld& world) {
  if (samples.empty()) throw std::invalid_argument("diversity_score of an empty set");
  const auto C = static_cast<std::size_t>(world.num_classes());
  std::vector<std::vector<double>> post;
  post.reserve(samples.size());
  std::vector<double> marginal(C, 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    post.push_back(world.oracle_posterior(samples.x(i)));
    for (std::size_t c = 0; c < C; ++c) marginal[c] += post.back()[c];
  }
  for (double& m : marginal) m /= static_cast<double>(samples.size());
  double kl_sum = 0.0;
  for (const auto& p : post) {
    for (std::size_t c = 0; c < C; ++c) {
      if (p[c] > 0.0) kl_sum += p[c] * (std::log(p[c]) - std::log(marginal[c]));
    }
  }
  return std::exp(kl_sum / static_cast<double>(samples.size()));
}

double confusion_rate(const LabeledSampleSet& samples, const GaussianMixtureWorld& world,
                      int c_minus) {
  if (samples.empty()) throw std::invalid_argument("confusion_rate of an empty set");
  if (c_minus < 0 || c_minus >= world.num_classes()) throw std::out_of_range("class out of range");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (world.oracle_argmax(samples.x(i)) == c_minus) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

std::vector<std::vector<double>> oracle_confusion(const LabeledSampleSet& samples,
                                                  const GaussianMixtureWorld& world) {
  const auto C = static_cast<std::size_t>(world.num_classes());
  std::vector<std::vector<double>> m(C, std::vector<double>(C, 0.0));
  std::vector<std::size_t> n(C, 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto c = static_cast<std::size_t>(samples.label(i));
    m[c][static_cast<std::size_t>(world.oracle_argmax(samples.x(i)))] += 1.0;
    ++n[c];
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (n[c] == 0) continue;
    for (double& v : m[c]) v /= static_cast<double>(n[c]);
  }
  return m;
}

}  // namespace disc
