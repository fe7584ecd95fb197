#pragma once

#include <stdexcept>
#include <string>

namespace ffsim {

// Invalid user-supplied configuration (bad key, out-of-range value, bad geometry).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken internal invariant during a simulation run, e.g. double occupancy.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ffsim
