#include "fluxcal/optimizers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>

namespace fluxcal {

Algorithm algorithm_from_string(std::string_view s) {
  if (s == "bayes") return Algorithm::bayes;
  if (s == "spsa") return Algorithm::spsa;
  throw DimensionError("unknown optimizer '" + std::string(s) + "'");
}

std::string to_string(Algorithm a) { return a == Algorithm::bayes ? "bayes" : "spsa"; }

OptimizerConfig OptimizerConfig::with_bounds(std::size_t dim, double bound) {
  OptimizerConfig c;
  c.bounds.assign(dim, Bounds{-bound, bound});
  return c;
}

void OptimizerConfig::validate() const {
  if (n_init > n_total) throw DimensionError("n_init exceeds n_total");
  if (n_total == 0) throw DimensionError("n_total must be positive");
  for (const auto& b : bounds) {
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.lo < b.hi)) {
      throw DimensionError("bounds must be finite and non-empty");
    }
  }
  if (!start.empty() && start.size() != bounds.size()) throw DimensionError("start point has the wrong dimension");
  if (!(gp.length_scale > 0.0 && gp.signal_sd > 0.0 && gp.noise_sd >= 0.0)) {
    throw DimensionError("invalid GP hyperparameters");
  }
  if (!(spsa.a > 0.0 && spsa.c > 0.0)) throw DimensionError("SPSA gains a and c must be positive");
  if (candidates == 0) throw DimensionError("need at least one EI candidate");
}

GpModel::GpModel(std::size_t dim, GpSettings settings) : dim_(dim), settings_(settings) {}

void GpModel::fit(const std::vector<std::vector<double>>& inputs, const std::vector<double>& targets) {
  if (inputs.empty() || inputs.size() != targets.size()) throw DimensionError("GP needs matching inputs and targets");
  const auto n = static_cast<Index>(inputs.size());
  train_.assign(inputs.size() * dim_, 0.0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].size() != dim_) throw DimensionError("GP input has the wrong dimension");
    std::copy(inputs[i].begin(), inputs[i].end(), train_.begin() + static_cast<std::ptrdiff_t>(i * dim_));
  }
  prior_mean_ = 0.0;
  for (double y : targets) prior_mean_ += y;
  prior_mean_ /= static_cast<double>(targets.size());
  best_target_ = *std::max_element(targets.begin(), targets.end());

  const double sf2 = settings_.signal_sd * settings_.signal_sd;
  const double inv2l2 = 0.5 / (settings_.length_scale * settings_.length_scale);
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) {
        const double diff = train_[static_cast<std::size_t>(i) * dim_ + d] - train_[static_cast<std::size_t>(j) * dim_ + d];
        d2 += diff * diff;
      }
      k(i, j) = k(j, i) = sf2 * std::exp(-d2 * inv2l2);
    }
  }
  k.diagonal().array() += settings_.noise_sd * settings_.noise_sd;

  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success) {
    k.diagonal().array() += 1e-8;
    llt.compute(k);
    if (llt.info() != Eigen::Success) throw FitError("GP kernel matrix is not positive definite");
  }
  Vector resid(n);
  for (Index i = 0; i < n; ++i) resid[i] = targets[static_cast<std::size_t>(i)] - prior_mean_;
  const Vector alpha = llt.solve(resid);
  alpha_.assign(alpha.data(), alpha.data() + n);
  const Matrix l = llt.matrixL();
  chol_.assign(l.data(), l.data() + n * n);
  count_ = inputs.size();
}

kernels::GpPosteriorInputs GpModel::inputs() const {
  kernels::GpPosteriorInputs in;
  in.train = train_;
  in.train_count = count_;
  in.dim = dim_;
  in.alpha = alpha_;
  in.chol = chol_;
  in.length_scale = settings_.length_scale;
  in.signal_variance = settings_.signal_sd * settings_.signal_sd;
  in.prior_mean = prior_mean_;
  return in;
}

Posterior gp_posterior(const GpModel& model, std::span<const double> x) {
  if (model.size() == 0) throw DimensionError("GP has no training data");
  if (x.size() != model.dim()) throw DimensionError("query has the wrong dimension");
  double mean = 0.0;
  double var = 0.0;
  kernels::gp_posterior_serial(model.inputs(), x, {&mean, 1}, {&var, 1});
  return {mean, var};
}

double expected_improvement(double mean, double variance, double best) {
  return kernels::expected_improvement(mean, variance, best);
}

namespace {

std::vector<double> uniform_point(std::span<const Bounds> bounds, std::mt19937_64& rng) {
  std::vector<double> x(bounds.size());
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    x[d] = std::uniform_real_distribution<double>(bounds[d].lo, bounds[d].hi)(rng);
  }
  return x;
}

double clamp_to(double x, const Bounds& b) { return std::clamp(x, b.lo, b.hi); }

}  // namespace

std::vector<double> propose_next(const GpModel& model, const EvaluationHistory& history,
                                 std::span<const Bounds> bounds, std::mt19937_64& rng, std::size_t count,
                                 kernels::Exec exec, double local_fraction) {
  if (history.empty() || model.size() == 0) throw DimensionError("propose_next needs a trained model");
  if (bounds.size() != model.dim()) throw DimensionError("bounds do not match the model dimension");
  const std::size_t dim = model.dim();
  std::vector<double> cand(count * dim);
  const auto& incumbent = history[*history.best_index()].params;
  // Local candidates are Gaussian around the incumbent at shrinking fractions
  // of the box width.
  constexpr std::array<double, 3> kLocalScale{0.05, 0.01, 0.0025};
  const auto uniform_count =
      count - static_cast<std::size_t>(std::llround(std::clamp(local_fraction, 0.0, 1.0) * static_cast<double>(count)));
  for (std::size_t c = 0; c < count; ++c) {
    const bool local = c >= uniform_count;
    const double scale = kLocalScale[c % kLocalScale.size()];
    for (std::size_t d = 0; d < dim; ++d) {
      const auto& b = bounds[d];
      cand[c * dim + d] =
          local ? clamp_to(incumbent[d] + std::normal_distribution<double>(0.0, scale * (b.hi - b.lo))(rng), b)
                : std::uniform_real_distribution<double>(b.lo, b.hi)(rng);
    }
  }
  std::vector<double> mean(count);
  std::vector<double> var(count);
  std::vector<double> ei(count);
  const double best = model.best_target();
  if (exec == kernels::Exec::parallel) {
    kernels::gp_posterior_parallel(model.inputs(), cand, mean, var);
    kernels::expected_improvement_parallel(mean, var, best, ei);
  } else {
    kernels::gp_posterior_serial(model.inputs(), cand, mean, var);
    kernels::expected_improvement_serial(mean, var, best, ei);
  }
  const auto pick = static_cast<std::size_t>(std::max_element(ei.begin(), ei.end()) - ei.begin());
  return {cand.begin() + static_cast<std::ptrdiff_t>(pick * dim),
          cand.begin() + static_cast<std::ptrdiff_t>((pick + 1) * dim)};
}

SpsaState spsa_step(const SpsaState& state, const Objective& objective, std::span<const Bounds> bounds,
                    std::mt19937_64& rng, EvaluationHistory* history, const Clock& clock) {
  const std::size_t dim = state.iterate.size();
  if (bounds.size() != dim) throw DimensionError("bounds do not match the SPSA iterate");
  const auto& g = state.gains;
  const double k = static_cast<double>(state.k);
  const double ak = g.a / std::pow(k + 1.0 + g.big_a, g.alpha);
  const double ck = g.c / std::pow(k + 1.0, g.gamma);

  std::vector<double> delta(dim);
  std::bernoulli_distribution coin(0.5);
  for (auto& d : delta) d = coin(rng) ? 1.0 : -1.0;
  std::vector<double> plus(dim);
  std::vector<double> minus(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    plus[d] = state.iterate[d] + ck * delta[d];
    minus[d] = state.iterate[d] - ck * delta[d];
  }
  auto record = [&](const std::vector<double>& x, double y) {
    if (history) history->append({history->size(), x, y, clock ? clock() : history->size()});
  };
  const double yp = objective(plus);
  record(plus, yp);
  const double ym = objective(minus);
  record(minus, ym);

  SpsaState next = state;
  for (std::size_t d = 0; d < dim; ++d) {
    const double grad = (yp - ym) / (2.0 * ck * delta[d]);
    next.iterate[d] = clamp_to(state.iterate[d] + ak * grad, bounds[d]);
  }
  next.k = state.k + 1;
  return next;
}

namespace {

OptimizeResult run_bayes(const Objective& objective, const OptimizerConfig& cfg, const Clock& clock,
                         std::mt19937_64& rng, EvaluationHistory& history) {
  const std::size_t dim = cfg.bounds.size();
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  auto evaluate = [&](std::vector<double> x) {
    const double y = objective(x);
    history.append({history.size(), x, y, clock ? clock() : history.size()});
    xs.push_back(std::move(x));
    ys.push_back(cfg.gp.log_gap ? -std::log10(std::max(1.0 - y, 0.0) + cfg.gp.log_gap_floor) : y);
  };
  for (std::size_t i = 0; i < std::max<std::size_t>(cfg.n_init, 1) && history.size() < cfg.n_total; ++i) {
    evaluate(uniform_point(cfg.bounds, rng));
  }
  GpModel model(dim, cfg.gp);
  while (history.size() < cfg.n_total) {
    model.fit(xs, ys);
    evaluate(propose_next(model, history, cfg.bounds, rng, cfg.candidates, cfg.exec, cfg.local_fraction));
  }
  const auto& best = history[*history.best_index()];
  return {best.params, best.value, {}};
}

OptimizeResult run_spsa(const Objective& objective, const OptimizerConfig& cfg, const Clock& clock,
                        std::mt19937_64& rng, EvaluationHistory& history) {
  SpsaState state;
  state.gains = cfg.spsa;
  if (cfg.start.empty()) {
    for (const auto& b : cfg.bounds) state.iterate.push_back(0.5 * (b.lo + b.hi));
  } else {
    state.iterate = cfg.start;
    for (std::size_t d = 0; d < state.iterate.size(); ++d) state.iterate[d] = clamp_to(state.iterate[d], cfg.bounds[d]);
  }
  while (history.size() + 2 <= cfg.n_total) state = spsa_step(state, objective, cfg.bounds, rng, &history, clock);
  // An odd budget leaves one call for the final iterate itself.
  if (history.size() < cfg.n_total) {
    history.append({history.size(), state.iterate, objective(state.iterate), clock ? clock() : history.size()});
  }
  return {state.iterate, history[*history.best_index()].value, {}};
}

}  // namespace

OptimizeResult optimize(const Objective& objective, const OptimizerConfig& config, const Clock& clock) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  EvaluationHistory history;
  OptimizeResult result;
  try {
    if (config.bounds.empty()) {
      // Nothing to optimize: a single evaluation of the empty parameter set.
      history.append({0, {}, objective({}), clock ? clock() : 0});
      result = {{}, history[0].value, {}};
    } else if (config.algorithm == Algorithm::bayes) {
      result = run_bayes(objective, config, clock, rng, history);
    } else {
      result = run_spsa(objective, config, clock, rng, history);
    }
  } catch (const OptimizationAborted&) {
    throw;
  } catch (const std::exception& e) {
    throw OptimizationAborted(std::string("objective failed: ") + e.what(), std::move(history));
  }
  result.history = std::move(history);
  return result;
}

}  // namespace fluxcal
