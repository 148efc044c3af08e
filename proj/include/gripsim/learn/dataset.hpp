#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "gripsim/learn/estimator.hpp"
#include "gripsim/rng.hpp"
#include "gripsim/sim/simulator.hpp"

namespace gripsim {

struct ObservationNoise {
  double angles = 0.1;  // rad
  double rotation = 0.1;  // per 6D entry
  double translation = 0.01;  // m
  double dropout = 0.2;  // per block
};

struct DatasetConfig {
  int count = 200;  // stable scenes wanted
  std::uint64_t seed = 1;
  double test_fraction = 0.25;
  double wrap_margin = 0.08;  // rad added past first contact
  int hand_samples = 64;
  int object_samples = 96;
  double density_min = 500;
  double density_max = 1500;
  ObservationNoise noise;
  SimParams sim;  // loss horizon used for the stable flag

  void validate() const;
};

struct Dataset {
  std::shared_ptr<const HandModel> hand;
  std::vector<SceneSample> train;
  std::vector<SceneSample> test;
  std::uint64_t seed = 0;
  int requested = 0;
  int attempts = 0;
  int stable = 0;
  int diverged = 0;

  double stable_fraction() const { return attempts ? static_cast<double>(stable) / attempts : 0.0; }
  bool partial() const { return stable < requested; }
};

/// Random convex object in its canonical frame, with its symmetry set.
std::shared_ptr<const ObjectTemplate> random_object(Rng& rng, int surface_samples, double density_min,
                                                    double density_max);

/// Closest distance between a capsule segment and the posed object (negative
/// when they overlap), from the object SDF along the capsule axis.
double capsule_object_distance(const CapsuleSegment& c, const ObjectTemplate& object, const Pose& pose);

/// Curls each finger joint, proximal first, until the finger first touches
/// the object, then advances the touching joint by `margin`.
HandPose close_fingers(const HandModel& hand, HandPose pose, const ObjectTemplate& object, const Pose& object_pose,
                       double margin);

/// Rests the object on the palm face at a palm-frame offset (x, z) with the
/// given palm-frame orientation.
Pose place_on_palm(const HandModel& hand, const Pose& root, const ObjectTemplate& object, const Mat3d& palm_rotation,
                   double x, double z);

Eigen::VectorXd make_observation(const HandPose& hand, const Pose& object, const ObservationNoise& noise, Rng& rng);

SceneSample make_scene_sample(std::shared_ptr<const HandModel> hand, std::shared_ptr<const ObjectTemplate> object,
                              const HandPose& hand_pose, const Pose& object_pose);

/// Draws attempts until `count` scenes are stable (or 10 * count attempts).
/// The first test_fraction of stable scenes go to the test split.
Dataset generate_dataset(const DatasetConfig& cfg);

void write_dataset(std::ostream& os, const Dataset& ds);
Dataset read_dataset(std::istream& is);
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

void write_shape(std::ostream& os, const Shape& shape);
Shape read_shape(std::istream& is);

}  // namespace gripsim
