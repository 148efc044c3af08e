#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gripsim/errors.hpp"
#include "gripsim/geometry/hand.hpp"
#include "gripsim/learn/dataset.hpp"
#include "gripsim/learn/trainer.hpp"
#include "gripsim/sim/scene.hpp"
#include "gripsim/sim/simulator.hpp"

namespace gripsim {

/// Malformed configuration text. `line` and `column` are 1-based; 0 when unknown.
class ConfigError : public InputError {
 public:
  ConfigError(const std::string& source, int line, int column, const std::string& message);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// A hand holding one object, as described by a scene file.
struct SceneFile {
  HandModel hand;  // palm and finger chains; samples regenerated from hand_samples
  int hand_samples = 64;
  HandPose hand_pose;
  Shape object_shape = Sphere{0.03};
  double density = 1000.0;
  int object_samples = 96;
  std::vector<SymmetryAxis> symmetry;
  Pose object_pose;
  SimParams sim;
  std::uint64_t seed = 0;

  Configuration configuration() const;
};

bool operator==(const SceneFile& a, const SceneFile& b);

/// Strict parser: unknown keys, wrong types and out-of-range values are
/// rejected with the offending key and its position.
SceneFile parse_scene(const std::string& text, const std::string& source = "<scene>");
std::string emit_scene(const SceneFile& scene);

/// Optional overrides on top of the defaults; the same strictness applies.
SimParams parse_sim_params(const std::string& text, const std::string& source = "<sim>");
DatasetConfig parse_dataset_config(const std::string& text, const std::string& source = "<dataset config>");
TrainConfig parse_train_config(const std::string& text, const std::string& source = "<train config>");

std::string read_text_file(const std::string& path);

}  // namespace gripsim
