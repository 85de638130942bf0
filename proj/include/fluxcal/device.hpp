#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fluxcal/types.hpp"

namespace fluxcal {

// Behavioral contract for anything that can be biased and read out.
// Implementations may be noisy and stateful, so callers must serialize
// access and keep the call order meaningful.
class DeviceBackend {
 public:
  virtual ~DeviceBackend() = default;

  virtual Index loop_count() const = 0;
  virtual std::size_t channel_count() const = 0;

  virtual void set_voltages(const VoltageVector& v) = 0;
  // One readout per requested channel, in request order. Throws DeviceError
  // for unknown channels.
  virtual std::vector<double> measure(std::span<const std::size_t> channels) = 0;

  // Number of measure() calls so far; used as a logical clock.
  virtual std::uint64_t measurement_count() const = 0;

  std::vector<double> measure_all() {
    std::vector<std::size_t> all(channel_count());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
    return measure(all);
  }
};

}  // namespace fluxcal
