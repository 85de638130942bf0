#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <utility>

namespace fluxcal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Dense vector tagged with its physical meaning so fluxes and voltages
// cannot be mixed up at call sites.
template <class Tag>
class TaggedVector {
 public:
  TaggedVector() = default;
  explicit TaggedVector(Vector values) : values_(std::move(values)) {}
  TaggedVector(std::initializer_list<double> xs) : values_(static_cast<Index>(xs.size())) {
    Index i = 0;
    for (double x : xs) values_[i++] = x;
  }

  static TaggedVector zero(Index n) { return TaggedVector(Vector::Zero(n)); }

  Index size() const { return values_.size(); }
  const Vector& values() const { return values_; }
  double operator[](Index i) const { return values_[i]; }
  double& operator[](Index i) { return values_[i]; }

  friend bool operator==(const TaggedVector& a, const TaggedVector& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Vector values_;
};

struct FluxTag {};
struct VoltageTag {};

// Reduced fluxes in units of the flux quantum.
using FluxVector = TaggedVector<FluxTag>;
// Bias source voltages.
using VoltageVector = TaggedVector<VoltageTag>;

// Square, numerically invertible coupling matrix (C, C_init, C_res, ...).
// Construction rejects matrices whose reciprocal condition estimate falls
// below kSingularRcond.
class CrosstalkMatrix {
 public:
  static constexpr double kSingularRcond = 1e-10;

  explicit CrosstalkMatrix(Matrix entries);
  static CrosstalkMatrix identity(Index n);

  Index size() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  double operator()(Index i, Index j) const { return entries_(i, j); }
  Matrix inverse() const;

  friend bool operator==(const CrosstalkMatrix& a, const CrosstalkMatrix& b) {
    return a.entries_ == b.entries_;
  }

 private:
  Matrix entries_;
};

}  // namespace fluxcal
