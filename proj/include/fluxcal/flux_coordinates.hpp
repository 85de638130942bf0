#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fluxcal/history.hpp"
#include "fluxcal/types.hpp"

namespace fluxcal {

// Trial compensation parameters Omega_{j,i} for one target loop i. The
// expanded matrix O' carries them in column i with a zero diagonal.
class TrialCompensation {
 public:
  TrialCompensation(Index loops, Index target);
  // `free_params` lists Omega_{j,i} for j != target in ascending j.
  TrialCompensation(Index loops, Index target, std::span<const double> free_params);

  Index loop_count() const { return omega_.size(); }
  Index target_loop() const { return target_; }
  Index parameter_count() const { return omega_.size() - 1; }

  // Omega_{j,target}; zero for j == target.
  double operator[](Index j) const { return omega_[j]; }
  void set(Index j, double value);

  std::vector<double> free_params() const;
  Matrix expand() const;
  bool within_bounds(double bound) const;

 private:
  Index target_;
  Vector omega_;
};

struct LoopCalibrationResult {
  TrialCompensation compensation;
  // Period of the response along f'_i, in units of f'_i.
  double period = 0.0;
  double score = 0.0;
  EvaluationHistory history;
};

struct Residual {
  CrosstalkMatrix matrix;
  FluxVector offsets;
};

// f = C V + f0
FluxVector apply_flux_map(const CrosstalkMatrix& c, const FluxVector& f0, const VoltageVector& v);

// f' = (I - O') C_init V + f0_init
FluxVector trial_flux_for_voltages(const CrosstalkMatrix& c_init, const FluxVector& f0_init,
                                   const TrialCompensation& omega, const VoltageVector& v);

// Inverse of trial_flux_for_voltages.
VoltageVector voltages_for_trial_flux(const CrosstalkMatrix& c_init, const FluxVector& f0_init,
                                      const TrialCompensation& omega, const FluxVector& f_trial);

// Compensation that makes loop i the only one moving along f'_i.
TrialCompensation optimum_compensation(const CrosstalkMatrix& c_res, Index loop);

// Rebuild C_res' from per-loop optima and periods. `results[i]` must target loop i.
CrosstalkMatrix assemble_residual_estimate(std::span<const LoopCalibrationResult> results);

Residual residual_of(const CrosstalkMatrix& c_true, const FluxVector& f0_true,
                     const CrosstalkMatrix& c_init, const FluxVector& f0_init);

// Sum of squared parameter differences (no square root).
double compensation_distance(const TrialCompensation& a, const TrialCompensation& b);

// Off-diagonal entries scaled by (1 + u), u uniform in [-relative, relative].
CrosstalkMatrix perturb_off_diagonal(const CrosstalkMatrix& c, double relative, std::uint64_t seed);

// C_init -> C_res' C_init
CrosstalkMatrix update_estimate(const CrosstalkMatrix& c_init, const CrosstalkMatrix& c_res_estimate);

}  // namespace fluxcal
