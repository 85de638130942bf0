#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fluxcal/errors.hpp"
#include "fluxcal/history.hpp"
#include "fluxcal/kernels.hpp"
#include "fluxcal/types.hpp"

namespace fluxcal {

enum class Algorithm { bayes, spsa };

Algorithm algorithm_from_string(std::string_view s);
std::string to_string(Algorithm a);

struct Bounds {
  double lo = -0.2;
  double hi = 0.2;
};

struct GpSettings {
  double length_scale = 0.02;
  double signal_sd = 0.5;
  double noise_sd = 0.01;
  // Fit the GP to -log10(1 - y + floor) instead of y.
  bool log_gap = false;
  double log_gap_floor = 1e-6;
};

struct SpsaGains {
  double a = 0.05;
  double c = 0.02;
  double big_a = 10.0;
  double alpha = 0.602;
  double gamma = 0.101;
};

struct OptimizerConfig {
  std::vector<Bounds> bounds;
  std::size_t n_init = 20;
  std::size_t n_total = 80;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::bayes;
  GpSettings gp;
  SpsaGains spsa;
  std::size_t candidates = 1024;
  // Share of EI candidates drawn around the incumbent instead of uniformly.
  double local_fraction = 0.0;
  // SPSA starting point; the box centre when empty.
  std::vector<double> start;
  kernels::Exec exec = kernels::Exec::parallel;

  // Uniform bounds for `dim` parameters.
  static OptimizerConfig with_bounds(std::size_t dim, double bound);
  // Throws DimensionError.
  void validate() const;
};

using Objective = std::function<double(std::span<const double>)>;
// Logical timestamp attached to each evaluation.
using Clock = std::function<std::uint64_t()>;

// Squared-exponential GP with fixed hyperparameters. The prior mean is the
// mean of the training targets.
class GpModel {
 public:
  GpModel(std::size_t dim, GpSettings settings);

  // Throws FitError when the kernel matrix stays indefinite after jitter.
  void fit(const std::vector<std::vector<double>>& inputs, const std::vector<double>& targets);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return count_; }
  const GpSettings& settings() const { return settings_; }
  double prior_mean() const { return prior_mean_; }
  double best_target() const { return best_target_; }
  kernels::GpPosteriorInputs inputs() const;

 private:
  std::size_t dim_;
  GpSettings settings_;
  std::size_t count_ = 0;
  std::vector<double> train_;
  std::vector<double> alpha_;
  std::vector<double> chol_;
  double prior_mean_ = 0.0;
  double best_target_ = 0.0;
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

Posterior gp_posterior(const GpModel& model, std::span<const double> x);

double expected_improvement(double mean, double variance, double best);

// Argmax of EI over `count` candidates drawn from `rng`: a `local_fraction`
// share is Gaussian around the incumbent, the rest uniform. Ties go to the
// lowest candidate index.
std::vector<double> propose_next(const GpModel& model, const EvaluationHistory& history,
                                 std::span<const Bounds> bounds, std::mt19937_64& rng, std::size_t count = 1024,
                                 kernels::Exec exec = kernels::Exec::parallel, double local_fraction = 0.0);

struct SpsaState {
  std::vector<double> iterate;
  std::size_t k = 0;
  SpsaGains gains;
};

// One two-sided SPSA ascent step. Both evaluations are appended to
// `history` when given.
SpsaState spsa_step(const SpsaState& state, const Objective& objective, std::span<const Bounds> bounds,
                    std::mt19937_64& rng, EvaluationHistory* history = nullptr, const Clock& clock = {});

struct OptimizeResult {
  std::vector<double> best;
  double best_value = 0.0;
  EvaluationHistory history;
};

// Thrown when the objective fails; carries everything evaluated so far.
struct OptimizationAborted : OptimizerAbort {
  OptimizationAborted(const std::string& what, EvaluationHistory partial)
      : OptimizerAbort(what), history(std::move(partial)) {}
  EvaluationHistory history;
};

// Maximizes `objective` within n_total calls. Bayes returns the best
// evaluated point. SPSA returns its final iterate, with best_value the history
// maximum.
OptimizeResult optimize(const Objective& objective, const OptimizerConfig& config, const Clock& clock = {});

}  // namespace fluxcal
