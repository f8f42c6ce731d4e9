#include "disc/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "disc/simd/kernels.hpp"

namespace disc {

std::string_view stepper_name(Stepper s) {
  switch (s) {
    case Stepper::Ancestral:
      return "ancestral";
    case Stepper::Ddim:
      return "ddim";
    case Stepper::Multistep2:
      return "multistep2";
  }
  return "?";
}

Stepper parse_stepper(std::string_view s) {
  if (s == "ancestral") return Stepper::Ancestral;
  if (s == "ddim") return Stepper::Ddim;
  if (s == "multistep2") return Stepper::Multistep2;
  throw std::invalid_argument("unknown stepper '" + std::string(s) + "'");
}

std::string_view init_mode_name(InitMode m) { return m == InitMode::PureNoise ? "pure_noise" : "from_real"; }

InitMode parse_init_mode(std::string_view s) {
  if (s == "pure_noise") return InitMode::PureNoise;
  if (s == "from_real") return InitMode::FromReal;
  throw std::invalid_argument("unknown init mode '" + std::string(s) + "'");
}

void SamplerConfig::validate(const NoiseSchedule& schedule) const {
  if (num_steps < 1) throw std::invalid_argument("sampler.num_steps must be >= 1");
  if (num_steps > schedule.num_train_steps()) {
    throw std::invalid_argument("sampler.num_steps exceeds the schedule's train steps");
  }
  if (init == InitMode::FromReal && !(strength > 0.0 && strength <= 1.0)) {
    throw std::invalid_argument("sampler.strength must lie in (0, 1]");
  }
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (chunk_rows < 1) throw std::invalid_argument("chunk_rows must be >= 1");
}

int start_step_for_strength(const InferenceGrid& grid, double strength) {
  if (!(strength > 0.0 && strength <= 1.0)) {
    throw std::invalid_argument("strength must lie in (0, 1]");
  }
  for (int k = 0; k < grid.num_steps(); ++k) {
    if (grid.normalized_time(k) <= strength) return k;
  }
  return grid.num_steps() - 1;
}

InitResult init_from_real(std::span<const double> x0, double strength, const InferenceGrid& grid,
                          const NoiseSchedule& schedule, Rng& rng) {
  const int start = start_step_for_strength(grid, strength);
  std::vector<double> eps(x0.size());
  rng.fill_normal(eps);
  return {forward_diffuse(x0, grid.train_timestep(start), eps, schedule), start};
}

ReverseStepper::ReverseStepper(Stepper kind, const InferenceGrid& grid,
                               const NoiseSchedule& schedule)
    : kind_(kind), grid_(grid), schedule_(schedule) {}

void ReverseStepper::ddim(std::span<double> x, std::span<const double> eps, double ab_t,
                          double ab_prev) {
  simd::unnoise(std::sqrt(ab_t), std::sqrt(1.0 - ab_t), x, eps, x0_);
  simd::axpby(std::sqrt(ab_prev), x0_, std::sqrt(1.0 - ab_prev), eps, x);
}

void ReverseStepper::step(std::span<double> x, std::span<const double> eps, int step,
                          std::span<const double> z) {
  if (x.size() != eps.size()) throw std::invalid_argument("reverse_step: dimension mismatch");
  x0_.resize(x.size());
  const int t = grid_.train_timestep(step);
  const int t_prev = grid_.next_timestep(step);
  const bool final_step = t_prev < 0;
  const double ab_t = schedule_.alpha_bar(t);
  const double ab_prev = final_step ? 1.0 : schedule_.alpha_bar(t_prev);

  switch (kind_) {
    case Stepper::Ddim:
      ddim(x, eps, ab_t, ab_prev);
      break;

    case Stepper::Ancestral: {
      simd::unnoise(std::sqrt(ab_t), std::sqrt(1.0 - ab_t), x, eps, x0_);
      const double a_step = ab_t / ab_prev;
      const double b_step = 1.0 - a_step;
      const double c_x0 = std::sqrt(ab_prev) * b_step / (1.0 - ab_t);
      const double c_xt = std::sqrt(a_step) * (1.0 - ab_prev) / (1.0 - ab_t);
      if (final_step) {
        simd::axpby(c_x0, x0_, c_xt, x, x);
      } else {
        if (z.size() != x.size()) throw std::invalid_argument("ancestral step needs noise");
        const double sigma = std::sqrt((1.0 - ab_prev) / (1.0 - ab_t) * b_step);
        simd::axpbypcz(c_x0, x0_, c_xt, x, sigma, z, x);
      }
      break;
    }

    case Stepper::Multistep2: {
      const double lambda_t = 0.5 * std::log(ab_t / (1.0 - ab_t));
      if (!has_history_ || final_step) {
        ddim(x, eps, ab_t, ab_prev);
      } else {
        simd::unnoise(std::sqrt(ab_t), std::sqrt(1.0 - ab_t), x, eps, x0_);
        const double lambda_prev = 0.5 * std::log(ab_prev / (1.0 - ab_prev));
        const double h = lambda_prev - lambda_t;
        const double r = (lambda_t - prev_lambda_) / h;
        std::vector<double> d(x.size());
        simd::axpby(1.0 + 0.5 / r, x0_, -0.5 / r, prev_x0_, d);
        const double sigma_ratio = std::sqrt((1.0 - ab_prev) / (1.0 - ab_t));
        const double c_d = -std::sqrt(ab_prev) * std::expm1(-h);
        simd::axpby(sigma_ratio, x, c_d, d, x);
      }
      prev_x0_ = x0_;
      prev_lambda_ = lambda_t;
      has_history_ = true;
      break;
    }
  }
}

std::vector<double> reverse_step(std::span<const double> x_t, std::span<const double> eps_hat,
                                 int step, const InferenceGrid& grid, const NoiseSchedule& schedule,
                                 Stepper stepper, Rng& rng) {
  std::vector<double> x(x_t.begin(), x_t.end());
  std::vector<double> z(x.size(), 0.0);
  if (stepper == Stepper::Ancestral) rng.fill_normal(z);
  ReverseStepper rs(stepper, grid, schedule);
  rs.step(x, eps_hat, step, z);
  return x;
}

namespace {

// Runs rows [begin, end) of a request through the full reverse process.
class ChunkRunner {
 public:
  ChunkRunner(const NoisePredictor& denoiser, const GuidancePolicy& policy,
              const SampleRequest& request, const SamplerConfig& cfg,
              const NoiseSchedule& schedule, const InferenceGrid& grid,
              std::span<const std::size_t> pool_rows)
      : denoiser_(denoiser),
        policy_(policy),
        request_(request),
        cfg_(cfg),
        schedule_(schedule),
        grid_(grid),
        pool_rows_(pool_rows),
        dim_(static_cast<std::size_t>(denoiser.dim())),
        classes_(denoiser.num_classes()) {}

  // Writes the final rows into `out` (rows * dim). If `trace_row` is set,
  // records that row's state before every step and at the end.
  void run(std::size_t begin, std::size_t end, std::span<double> out,
           std::optional<std::size_t> trace_row = std::nullopt, Trajectory* trace = nullptr) const {
    const std::size_t rows = end - begin;
    const std::size_t n = rows * dim_;
    std::vector<double> x(n);
    std::vector<Rng> pos_rng, neg_rng, step_rng;
    pos_rng.reserve(rows);
    neg_rng.reserve(rows);
    step_rng.reserve(rows);

    int start = 0;
    if (cfg_.init == InitMode::FromReal) start = start_step_for_strength(grid_, cfg_.strength);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t i = begin + r;
      Rng init = Rng::stream(cfg_.master_seed, i, Stream::Init);
      auto xr = std::span<double>(x).subspan(r * dim_, dim_);
      if (cfg_.init == InitMode::FromReal) {
        const auto x0 = request_.init_pool->x(pool_rows_[i % pool_rows_.size()]);
        auto res = init_from_real(x0, cfg_.strength, grid_, schedule_, init);
        std::copy(res.x.begin(), res.x.end(), xr.begin());
      } else {
        init.fill_normal(xr);
      }
      pos_rng.push_back(Rng::stream(cfg_.master_seed, i, Stream::PositiveAnneal));
      neg_rng.push_back(Rng::stream(cfg_.master_seed, i, Stream::NegativeAnneal));
      step_rng.push_back(Rng::stream(cfg_.master_seed, i, Stream::StepNoise));
    }

    const ConditionVector null = ConditionVector::null();
    const ConditionVector y_pos = ConditionVector::one_hot(request_.pos_class, classes_);
    const ConditionVector y_neg = request_.neg_class
                                      ? ConditionVector::one_hot(*request_.neg_class, classes_)
                                      : ConditionVector{};
    const VectorMoments clean = moments(y_pos.values);
    const bool negative = policy_.uses_negative();
    const bool annealed = policy_.anneal.has_value();

    std::vector<double> eps_null(n), eps_pos(n), eps_neg(negative ? n : 0), eps(n);
    std::vector<double> eps_cfg(n), eps_ccfg(negative ? n : 0);
    std::vector<double> d_plus(rows), d_minus(rows), w_plus(rows), w_minus(rows);
    std::vector<double> wp_elem(negative ? n : 0), wm_elem(negative ? n : 0);
    std::vector<double> z(cfg_.stepper == Stepper::Ancestral ? n : 0);
    ReverseStepper stepper(cfg_.stepper, grid_, schedule_);

    auto prepare = [&](const ConditionVector& y, Rng& rng, double t_norm) {
      if (!annealed) return y;
      ConditionVector y_hat = anneal_condition(y, t_norm, *policy_.anneal, rng);
      return rescale_condition(y_hat, clean.mean, clean.std, policy_.anneal->psi);
    };

    for (int k = start; k < grid_.num_steps(); ++k) {
      if (trace_row && *trace_row >= begin && *trace_row < end) {
        auto xr = std::span<const double>(x).subspan((*trace_row - begin) * dim_, dim_);
        trace->states.emplace_back(xr.begin(), xr.end());
      }
      const int t = grid_.train_timestep(k);
      const double t_norm = grid_.normalized_time(k);
      const double g = annealed ? gamma(t_norm, *policy_.anneal) : 1.0;

      for (std::size_t r = 0; r < rows; ++r) {
        const auto xr = std::span<const double>(x).subspan(r * dim_, dim_);
        denoiser_.predict(null, xr, t, std::span<double>(eps_null).subspan(r * dim_, dim_));
        denoiser_.predict(prepare(y_pos, pos_rng[r], t_norm), xr, t,
                          std::span<double>(eps_pos).subspan(r * dim_, dim_));
        if (negative) {
          denoiser_.predict(prepare(y_neg, neg_rng[r], t_norm), xr, t,
                            std::span<double>(eps_neg).subspan(r * dim_, dim_));
        }
      }

      switch (policy_.kind) {
        case GuidanceKind::Cfg:
        case GuidanceKind::Cads:
          cfg_combine(eps_null, eps_pos, policy_.w, eps);
          break;
        case GuidanceKind::Ccfg:
        case GuidanceKind::DiscDs: {
          const bool need_cfg = policy_.kind == GuidanceKind::DiscDs ||
                                policy_.distance_source == DistanceSource::CfgOutput;
          if (need_cfg) cfg_combine(eps_null, eps_pos, policy_.w, eps_cfg);
          const auto& pos_ref =
              policy_.distance_source == DistanceSource::CfgOutput ? eps_cfg : eps_pos;
          simd::row_sq_dist(eps_null, pos_ref, dim_, d_plus);
          simd::row_sq_dist(eps_null, eps_neg, dim_, d_minus);
          const double tau_eff = effective_tau(policy_, g);
          for (std::size_t r = 0; r < rows; ++r) {
            const auto cw = ccfg_weights_from_distances(d_plus[r], d_minus[r], policy_.w, tau_eff);
            w_plus[r] = cw.plus;
            w_minus[r] = cw.minus;
          }
          simd::expand_rows(w_plus, dim_, wp_elem);
          simd::expand_rows(w_minus, dim_, wm_elem);
          auto& target = policy_.kind == GuidanceKind::Ccfg ? eps : eps_ccfg;
          simd::combine2(eps_null, wp_elem, eps_pos, wm_elem, eps_neg, target);
          if (policy_.kind == GuidanceKind::DiscDs) disc_ds_noise(eps_cfg, eps_ccfg, *policy_.alpha, eps);
          break;
        }
      }

      const bool final_step = k + 1 == grid_.num_steps();
      if (!z.empty() && !final_step) {
        for (std::size_t r = 0; r < rows; ++r) {
          step_rng[r].fill_normal(std::span<double>(z).subspan(r * dim_, dim_));
        }
      }
      stepper.step(x, eps, k, z);
    }
    if (trace_row && *trace_row >= begin && *trace_row < end) {
      auto xr = std::span<const double>(x).subspan((*trace_row - begin) * dim_, dim_);
      trace->states.emplace_back(xr.begin(), xr.end());
    }
    std::copy(x.begin(), x.end(), out.begin());
  }

 private:
  const NoisePredictor& denoiser_;
  const GuidancePolicy& policy_;
  const SampleRequest& request_;
  const SamplerConfig& cfg_;
  const NoiseSchedule& schedule_;
  const InferenceGrid& grid_;
  std::span<const std::size_t> pool_rows_;
  std::size_t dim_;
  int classes_;
};

void validate_request(const NoisePredictor& denoiser, const GuidancePolicy& policy,
                      const SampleRequest& request, const SamplerConfig& cfg,
                      const NoiseSchedule& schedule) {
  policy.validate();
  cfg.validate(schedule);
  const int classes = denoiser.num_classes();
  if (request.pos_class < 0 || request.pos_class >= classes) {
    throw std::out_of_range("positive class out of range");
  }
  if (policy.uses_negative()) {
    if (!request.neg_class) {
      throw std::invalid_argument("policy '" + policy.name + "' needs a negative class");
    }
    if (*request.neg_class < 0 || *request.neg_class >= classes) {
      throw std::out_of_range("negative class out of range");
    }
    if (*request.neg_class == request.pos_class) {
      throw std::invalid_argument("negative class must differ from the positive class");
    }
  } else if (request.neg_class) {
    throw std::invalid_argument("policy '" + policy.name + "' takes no negative class");
  }
  if (cfg.init == InitMode::FromReal) {
    if (request.init_pool == nullptr) throw std::invalid_argument("from_real init needs real samples");
    if (request.init_pool->dim() != denoiser.dim()) {
      throw std::invalid_argument("init pool dimension mismatch");
    }
  }
}

std::vector<std::size_t> pool_rows_for(const SampleRequest& request, const SamplerConfig& cfg) {
  std::vector<std::size_t> rows;
  if (cfg.init != InitMode::FromReal) return rows;
  for (std::size_t i = 0; i < request.init_pool->size(); ++i) {
    if (request.init_pool->label(i) == request.pos_class) rows.push_back(i);
  }
  if (rows.empty()) {
    throw std::invalid_argument("no real samples of class " + std::to_string(request.pos_class) +
                                " for from_real init");
  }
  return rows;
}

}  // namespace

LabeledSampleSet sample(const NoisePredictor& denoiser, const GuidancePolicy& policy,
                        const SampleRequest& request, const SamplerConfig& cfg,
                        const NoiseSchedule& schedule) {
  validate_request(denoiser, policy, request, cfg, schedule);
  const InferenceGrid grid(schedule, cfg.num_steps);
  const auto pool_rows = pool_rows_for(request, cfg);
  const auto dim = static_cast<std::size_t>(denoiser.dim());
  const ChunkRunner runner(denoiser, policy, request, cfg, schedule, grid, pool_rows);

  std::vector<double> coords(request.count * dim);
  const std::size_t chunks = (request.count + cfg.chunk_rows - 1) / cfg.chunk_rows;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      const std::size_t begin = c * cfg.chunk_rows;
      const std::size_t end = std::min(request.count, begin + cfg.chunk_rows);
      try {
        runner.run(begin, end, std::span<double>(coords).subspan(begin * dim, (end - begin) * dim));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(chunks);
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), chunks);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  LabeledSampleSet out(denoiser.dim(), denoiser.num_classes());
  out.reserve(request.count);
  const Provenance prov{request.source, policy.name, request.neg_class.value_or(-1)};
  for (std::size_t i = 0; i < request.count; ++i) {
    out.add(std::span<const double>(coords).subspan(i * dim, dim), request.pos_class, prov,
            cfg.master_seed);
  }
  return out;
}

LabeledSampleSet sample(const NoisePredictor& denoiser, const GuidancePolicy& policy, int pos_class,
                        std::optional<int> neg_class, const SamplerConfig& cfg,
                        const NoiseSchedule& schedule, std::size_t n) {
  SampleRequest req;
  req.pos_class = pos_class;
  req.neg_class = neg_class;
  req.count = n;
  return sample(denoiser, policy, req, cfg, schedule);
}

Trajectory trace(const NoisePredictor& denoiser, const GuidancePolicy& policy,
                 const SampleRequest& request, const SamplerConfig& cfg,
                 const NoiseSchedule& schedule, std::size_t row) {
  validate_request(denoiser, policy, request, cfg, schedule);
  if (row >= request.count) throw std::out_of_range("trace row out of range");
  const InferenceGrid grid(schedule, cfg.num_steps);
  const auto pool_rows = pool_rows_for(request, cfg);
  const ChunkRunner runner(denoiser, policy, request, cfg, schedule, grid, pool_rows);
  Trajectory tr;
  std::vector<double> out(static_cast<std::size_t>(denoiser.dim()));
  runner.run(row, row + 1, out, row, &tr);
  return tr;
}

}  // namespace disc
