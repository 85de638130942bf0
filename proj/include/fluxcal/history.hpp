#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace fluxcal {

struct Evaluation {
  std::size_t step = 0;
  std::vector<double> params;
  double value = 0.0;
  // Logical clock supplied by the objective's owner (backend measurement
  // count for device objectives); keeps persisted histories reproducible.
  std::uint64_t timestamp = 0;
};

class EvaluationHistory {
 public:
  void append(Evaluation e);

  const std::vector<Evaluation>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Evaluation& operator[](std::size_t i) const { return entries_[i]; }

  // Index of the first evaluation attaining the maximum value.
  std::optional<std::size_t> best_index() const { return best_; }
  // Best value among the first `count` evaluations.
  double best_so_far(std::size_t count) const;

 private:
  std::vector<Evaluation> entries_;
  std::optional<std::size_t> best_;
};

}  // namespace fluxcal
