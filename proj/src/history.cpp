#include "fluxcal/history.hpp"

#include <algorithm>
#include <limits>

namespace fluxcal {

void EvaluationHistory::append(Evaluation e) {
  if (!best_ || e.value > entries_[*best_].value) best_ = entries_.size();
  entries_.push_back(std::move(e));
}

double EvaluationHistory::best_so_far(std::size_t count) const {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < std::min(count, entries_.size()); ++k) best = std::max(best, entries_[k].value);
  return best;
}

}  // namespace fluxcal
