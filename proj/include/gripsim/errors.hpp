#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gripsim {

// Malformed or out-of-contract arguments.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Misuse of a stateful object (stale tape, wrong call order).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class SimulationDiverged : public std::runtime_error {
 public:
  SimulationDiverged(std::size_t step, const std::string& what)
      : std::runtime_error("simulation diverged at step " + std::to_string(step) + ": " + what),
        step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace gripsim
