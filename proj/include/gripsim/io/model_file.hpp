#pragma once

#include <iosfwd>
#include <string>

#include "gripsim/learn/estimator.hpp"
#include "gripsim/learn/surrogate.hpp"

namespace gripsim {

/// Trained networks without optimiser state: what eval and grad-compare load.
struct ModelFile {
  std::string label;  // training mode, e.g. "deepsim-s"
  PoseGenerator generator;
  bool has_surrogate = false;
  StabilityNet surrogate;
};

void write_model(std::ostream& os, const ModelFile& m);
ModelFile read_model(std::istream& is);
void save_model(const std::string& path, const ModelFile& m);
ModelFile load_model(const std::string& path);

}  // namespace gripsim
