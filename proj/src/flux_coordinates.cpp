#include "fluxcal/flux_coordinates.hpp"

#include <random>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fluxcal/errors.hpp"

namespace fluxcal {

namespace {

Eigen::PartialPivLU<Matrix> checked_lu(const Matrix& m, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(m);
  const double rcond = lu.rcond();
  if (!std::isfinite(rcond) || rcond < CrosstalkMatrix::kSingularRcond) {
    throw SingularMatrixError(std::string(what) + " is numerically singular (rcond=" +
                              std::to_string(rcond) + ")");
  }
  return lu;
}

void require_size(Index got, Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace

CrosstalkMatrix::CrosstalkMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
    throw DimensionError("crosstalk matrix must be square and non-empty");
  }
  if (!entries_.allFinite()) throw DimensionError("crosstalk matrix has non-finite entries");
  checked_lu(entries_, "crosstalk matrix");
}

CrosstalkMatrix CrosstalkMatrix::identity(Index n) { return CrosstalkMatrix(Matrix::Identity(n, n)); }

Matrix CrosstalkMatrix::inverse() const { return checked_lu(entries_, "crosstalk matrix").inverse(); }

TrialCompensation::TrialCompensation(Index loops, Index target) : target_(target), omega_(Vector::Zero(loops)) {
  if (loops < 1 || target < 0 || target >= loops) throw DimensionError("target loop out of range");
}

TrialCompensation::TrialCompensation(Index loops, Index target, std::span<const double> free_params)
    : TrialCompensation(loops, target) {
  require_size(static_cast<Index>(free_params.size()), loops - 1, "compensation parameters");
  Index k = 0;
  for (Index j = 0; j < loops; ++j) {
    if (j != target) omega_[j] = free_params[k++];
  }
}

void TrialCompensation::set(Index j, double value) {
  if (j < 0 || j >= omega_.size()) throw DimensionError("compensation index out of range");
  if (j == target_) throw DimensionError("the target loop has no compensation parameter");
  omega_[j] = value;
}

std::vector<double> TrialCompensation::free_params() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(parameter_count()));
  for (Index j = 0; j < omega_.size(); ++j) {
    if (j != target_) out.push_back(omega_[j]);
  }
  return out;
}

Matrix TrialCompensation::expand() const {
  Matrix o = Matrix::Zero(omega_.size(), omega_.size());
  o.col(target_) = omega_;
  o(target_, target_) = 0.0;
  return o;
}

bool TrialCompensation::within_bounds(double bound) const {
  return (omega_.array().abs() <= bound).all();
}

FluxVector apply_flux_map(const CrosstalkMatrix& c, const FluxVector& f0, const VoltageVector& v) {
  require_size(f0.size(), c.size(), "flux offsets");
  require_size(v.size(), c.size(), "voltages");
  return FluxVector(c.entries() * v.values() + f0.values());
}

FluxVector trial_flux_for_voltages(const CrosstalkMatrix& c_init, const FluxVector& f0_init,
                                   const TrialCompensation& omega, const VoltageVector& v) {
  const Index n = c_init.size();
  require_size(f0_init.size(), n, "flux offsets");
  require_size(omega.loop_count(), n, "compensation");
  require_size(v.size(), n, "voltages");
  const Matrix map = (Matrix::Identity(n, n) - omega.expand()) * c_init.entries();
  return FluxVector(map * v.values() + f0_init.values());
}

VoltageVector voltages_for_trial_flux(const CrosstalkMatrix& c_init, const FluxVector& f0_init,
                                      const TrialCompensation& omega, const FluxVector& f_trial) {
  const Index n = c_init.size();
  require_size(f0_init.size(), n, "flux offsets");
  require_size(omega.loop_count(), n, "compensation");
  require_size(f_trial.size(), n, "trial fluxes");
  const Matrix map = (Matrix::Identity(n, n) - omega.expand()) * c_init.entries();
  const auto lu = checked_lu(map, "(I - O') C_init");
  return VoltageVector(lu.solve(f_trial.values() - f0_init.values()));
}

TrialCompensation optimum_compensation(const CrosstalkMatrix& c_res, Index loop) {
  const Matrix inv = c_res.inverse();
  const Index n = c_res.size();
  if (loop < 0 || loop >= n) throw DimensionError("loop index out of range");
  const double diag = inv(loop, loop);
  if (std::abs(diag) <= std::numeric_limits<double>::epsilon() * inv.cwiseAbs().maxCoeff()) {
    throw SingularMatrixError("diagonal of the inverse residual vanishes for loop " + std::to_string(loop));
  }
  TrialCompensation omega(n, loop);
  for (Index j = 0; j < n; ++j) {
    if (j != loop) omega.set(j, inv(j, loop) / diag);
  }
  return omega;
}

CrosstalkMatrix assemble_residual_estimate(std::span<const LoopCalibrationResult> results) {
  const auto n = static_cast<Index>(results.size());
  if (n == 0) throw DimensionError("no loop results to assemble");
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto& r = results[static_cast<std::size_t>(i)];
    if (r.compensation.target_loop() != i || r.compensation.loop_count() != n) {
      throw DimensionError("results must be ordered by target loop and cover every loop");
    }
    if (!(r.period > 0.0) || !std::isfinite(r.period)) {
      throw DimensionError("loop " + std::to_string(i) + " has a non-positive period");
    }
    for (Index j = 0; j < n; ++j) a(j, i) = (j == i) ? r.period : r.compensation[j] * r.period;
  }
  const auto lu = checked_lu(a, "assembled inverse residual");
  return CrosstalkMatrix(lu.inverse());
}

Residual residual_of(const CrosstalkMatrix& c_true, const FluxVector& f0_true,
                     const CrosstalkMatrix& c_init, const FluxVector& f0_init) {
  const Index n = c_true.size();
  require_size(c_init.size(), n, "initial crosstalk");
  require_size(f0_true.size(), n, "flux offsets");
  require_size(f0_init.size(), n, "initial flux offsets");
  const Matrix c_res = c_true.entries() * c_init.inverse();
  const Vector offsets = f0_true.values() - c_res * f0_init.values();
  return {CrosstalkMatrix(c_res), FluxVector(offsets)};
}

double compensation_distance(const TrialCompensation& a, const TrialCompensation& b) {
  if (a.target_loop() != b.target_loop() || a.loop_count() != b.loop_count()) {
    throw DimensionError("compensations target different loops");
  }
  double sum = 0.0;
  for (Index j = 0; j < a.loop_count(); ++j) {
    if (j == a.target_loop()) continue;
    const double d = a[j] - b[j];
    sum += d * d;
  }
  return sum;
}

CrosstalkMatrix update_estimate(const CrosstalkMatrix& c_init, const CrosstalkMatrix& c_res_estimate) {
  require_size(c_res_estimate.size(), c_init.size(), "residual estimate");
  return CrosstalkMatrix(c_res_estimate.entries() * c_init.entries());
}

CrosstalkMatrix perturb_off_diagonal(const CrosstalkMatrix& c, double relative, std::uint64_t seed) {
  if (!(relative >= 0.0)) throw DimensionError("perturbation size must be non-negative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-relative, relative);
  Matrix m = c.entries();
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index k = 0; k < m.cols(); ++k) {
      if (r != k) m(r, k) *= 1.0 + u(rng);
    }
  }
  return CrosstalkMatrix(m);
}

}  // namespace fluxcal
