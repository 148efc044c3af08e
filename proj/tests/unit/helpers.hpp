#pragma once

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>

#include "gripsim/geometry/hand.hpp"
#include "gripsim/io/config_files.hpp"
#include "gripsim/rng.hpp"
#include "gripsim/sim/scene.hpp"

namespace testutil {

using namespace gripsim;

inline std::string fixture(const std::string& name) { return std::string(FIXTURE_DIR) + "/" + name; }

inline SceneFile load_fixture(const std::string& name) {
  const std::string path = fixture(name);
  return parse_scene(read_text_file(path), path);
}

inline std::shared_ptr<const HandModel> default_hand() {
  static const auto hand = std::make_shared<const HandModel>(make_default_hand(64));
  return hand;
}

/// Hand made of a single wide palm, for contact geometry that must not see fingers.
inline std::shared_ptr<const HandModel> slab_hand(const Vec3d& half_extents, int samples = 64) {
  HandModel h;
  h.palm.half_extents = half_extents;
  resample_hand_surface(h, samples);
  return std::make_shared<const HandModel>(std::move(h));
}

inline Pose random_pose(Rng& rng, double spread) {
  const Vec3d axis = uniform_unit_vector(rng);
  const double angle = uniform(rng, 0, M_PI);
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis)),
              Vec3d(uniform(rng, -spread, spread), uniform(rng, -spread, spread), uniform(rng, -spread, spread)));
}

inline Eigen::VectorXd random_angles(Rng& rng, const HandModel& hand, double inset = 0.05) {
  const Eigen::VectorXd lo = hand.lower_limits(), hi = hand.upper_limits();
  Eigen::VectorXd a(lo.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = uniform(rng, lo[i] + inset, hi[i] - inset);
  return a;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

/// Runs the CLI and captures stdout+stderr.
struct RunResult {
  int code = -1;
  std::string output;
};

inline RunResult run_cli(const std::string& args) {
  RunResult r;
  const std::string cmd = std::string(CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string temp_dir(const std::string& name) {
  const std::string dir = std::string("/tmp/gripsim_test_") + name;
  std::string cmd = "rm -rf '" + dir + "' && mkdir -p '" + dir + "'";
  if (std::system(cmd.c_str()) != 0) throw std::runtime_error("cannot create " + dir);
  return dir;
}

inline std::string file_bytes(const std::string& path) { return read_text_file(path); }

}  // namespace testutil
