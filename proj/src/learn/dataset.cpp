#include "gripsim/learn/dataset.hpp"

#include <cmath>
#include <fstream>

#include "gripsim/errors.hpp"
#include "gripsim/geometry/sdf.hpp"
#include "gripsim/io/binary.hpp"

namespace gripsim {

namespace {
constexpr std::uint32_t kDatasetMagic = 0x53445247;  // "GRDS"
constexpr std::uint32_t kDatasetVersion = 1;

Mat3d random_rotation(Rng& rng) {
  // Uniform on SO(3) via a normalised 4D Gaussian.
  Eigen::Quaterniond q(gaussian(rng), gaussian(rng), gaussian(rng), gaussian(rng));
  return q.normalized().toRotationMatrix();
}
}  // namespace

void DatasetConfig::validate() const {
  if (count < 1) throw InputError("dataset: count must be >= 1");
  if (!(test_fraction >= 0 && test_fraction < 1)) throw InputError("dataset: test_fraction must be in [0, 1)");
  if (!(wrap_margin >= 0)) throw InputError("dataset: wrap_margin must be >= 0");
  if (hand_samples < 1 || object_samples < 1) throw InputError("dataset: sample counts must be positive");
  if (!(density_min > 0) || density_max < density_min) throw InputError("dataset: bad density range");
  if (noise.angles < 0 || noise.rotation < 0 || noise.translation < 0 || !(noise.dropout >= 0 && noise.dropout <= 1))
    throw InputError("dataset: bad observation noise");
  sim.validate();
}

std::shared_ptr<const ObjectTemplate> random_object(Rng& rng, int surface_samples, double density_min,
                                                    double density_max) {
  const double density = uniform(rng, density_min, density_max);
  const int kind = static_cast<int>(uniform_index(rng, 4));
  switch (kind) {
    case 0:
      return make_object(Sphere{uniform(rng, 0.02, 0.035)}, density, surface_samples,
                         {{Vec3d::UnitX(), 4}, {Vec3d::UnitY(), 4}, {Vec3d::UnitZ(), 4}});
    case 1: {
      const Vec3d h(uniform(rng, 0.015, 0.03), uniform(rng, 0.015, 0.03), uniform(rng, 0.015, 0.03));
      return make_object(Box{h}, density, surface_samples,
                         {{Vec3d::UnitX(), 2}, {Vec3d::UnitY(), 2}, {Vec3d::UnitZ(), 2}});
    }
    case 2:
      return make_object(Capsule{uniform(rng, 0.015, 0.025), uniform(rng, 0.01, 0.03)}, density, surface_samples,
                         {{Vec3d::UnitZ(), 8}, {Vec3d::UnitX(), 2}});
    default: {
      const int sides = std::array<int, 3>{5, 6, 8}[uniform_index(rng, 3)];
      return make_object(make_prism(sides, uniform(rng, 0.02, 0.035), uniform(rng, 0.015, 0.03)), density,
                         surface_samples, {{Vec3d::UnitZ(), sides}, {Vec3d::UnitX(), 2}});
    }
  }
}

double capsule_object_distance(const CapsuleSegment& c, const ObjectTemplate& object, const Pose& pose) {
  const Mat3d R = pose.matrix();
  double best = std::numeric_limits<double>::infinity();
  constexpr int kProbes = 17;
  for (int i = 0; i < kProbes; ++i) {
    const Vec3d p = c.a + (c.b - c.a) * (static_cast<double>(i) / (kProbes - 1));
    best = std::min(best, signed_distance_local(object.shape, R.transpose() * (p - pose.translation)).distance);
  }
  return best - c.radius;
}

HandPose close_fingers(const HandModel& hand, HandPose pose, const ObjectTemplate& object, const Pose& object_pose,
                       double margin) {
  const Eigen::VectorXd upper = hand.upper_limits();
  int offset = 0;
  for (const auto& finger : hand.fingers) {
    const int n = static_cast<int>(finger.segments.size());
    // Distance from segments j..n-1 of this finger to the object.
    auto gap = [&](int j, double angle) {
      HandPose trial = pose;
      trial.angles[offset + j] = angle;
      const HandKinematics kin = forward_kinematics(hand, trial);
      double d = std::numeric_limits<double>::infinity();
      for (int k = j; k < n; ++k) d = std::min(d, capsule_object_distance(kin.capsules[offset + k], object, object_pose));
      return d;
    };
    for (int j = 0; j < n; ++j) {
      const int q = offset + j;
      const double start = pose.angles[q];
      if (gap(j, start) <= 0) continue;
      constexpr double kStep = 0.05;
      double free = start, hit = start;
      bool touched = false;
      for (double a = start + kStep;; a += kStep) {
        const double ac = std::min(a, upper[q]);
        if (gap(j, ac) <= 0) {
          hit = ac;
          touched = true;
          break;
        }
        free = ac;
        if (ac >= upper[q]) break;
      }
      if (!touched) {
        pose.angles[q] = upper[q];
        continue;
      }
      for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (free + hit);
        (gap(j, mid) <= 0 ? hit : free) = mid;
      }
      pose.angles[q] = std::min(hit + margin, upper[q]);
    }
    offset += n;
  }
  return pose;
}

Pose place_on_palm(const HandModel& hand, const Pose& root, const ObjectTemplate& object, const Mat3d& palm_rotation,
                   double x, double z) {
  const double top = hand.palm.half_extents.y();
  const double below = support(object.shape, palm_rotation.transpose() * (-Vec3d::UnitY()));
  const Vec3d local(x, top + below, z);
  return Pose(Eigen::Quaterniond(root.matrix() * palm_rotation), root * local);
}

Eigen::VectorXd make_observation(const HandPose& hand, const Pose& object, const ObservationNoise& noise, Rng& rng) {
  const PoseEncoding L{static_cast<int>(hand.angles.size())};
  Eigen::VectorXd e = encode_pose(hand, object);
  auto jitter = [&](int start, int len, double sigma) {
    for (int i = 0; i < len; ++i) e[start + i] += sigma * gaussian(rng);
  };
  jitter(L.angles(), L.joints, noise.angles);
  jitter(L.root_rotation(), 6, noise.rotation);
  jitter(L.root_translation(), 3, noise.translation);
  jitter(L.object_rotation(), 6, noise.rotation);
  jitter(L.object_offset(), 3, noise.translation);
  Eigen::VectorXd obs = normalise_encoding(e);
  const std::array<std::pair<int, int>, 5> blocks{{{L.angles(), L.joints},
                                                   {L.root_rotation(), 6},
                                                   {L.root_translation(), 3},
                                                   {L.object_rotation(), 6},
                                                   {L.object_offset(), 3}}};
  for (const auto& [start, len] : blocks)
    if (uniform01(rng) < noise.dropout) obs.segment(start, len).setZero();
  return obs;
}

SceneSample make_scene_sample(std::shared_ptr<const HandModel> hand, std::shared_ptr<const ObjectTemplate> object,
                              const HandPose& hand_pose, const Pose& object_pose) {
  SceneSample s;
  s.hand_model = std::move(hand);
  s.object = std::move(object);
  const HandKinematics kin = forward_kinematics(*s.hand_model, hand_pose);
  s.hand = kin.pose;
  s.object_pose = object_pose;
  s.joints = kin.keypoints;
  s.surface = kin.surface_points;
  return s;
}

Dataset generate_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.hand = std::make_shared<const HandModel>(make_default_hand(cfg.hand_samples));
  ds.seed = cfg.seed;
  ds.requested = cfg.count;
  std::vector<SceneSample> stable;
  const int max_attempts = 10 * cfg.count;
  while (static_cast<int>(stable.size()) < cfg.count && ds.attempts < max_attempts) {
    Rng rng = derive_rng(cfg.seed, static_cast<std::uint64_t>(ds.attempts));
    ++ds.attempts;
    auto object = random_object(rng, cfg.object_samples, cfg.density_min, cfg.density_max);
    HandPose hp = rest_pose(*ds.hand);
    Vec3d root_t;
    for (int k = 0; k < 3; ++k) root_t[k] = uniform(rng, -0.1, 0.1);
    hp.root = Pose(Eigen::Quaterniond(random_rotation(rng)), root_t);
    const Mat3d palm_rotation = random_rotation(rng);
    const double x = uniform(rng, -0.008, 0.008), z = uniform(rng, -0.008, 0.008);
    const Pose object_pose = place_on_palm(*ds.hand, hp.root, *object, palm_rotation, x, z);
    hp = close_fingers(*ds.hand, hp, *object, object_pose, cfg.wrap_margin);

    SceneSample s = make_scene_sample(ds.hand, object, hp, object_pose);
    s.observation = make_observation(s.hand, s.object_pose, cfg.noise, rng);
    try {
      s.gt_loss = stability_loss(simulate(s.configuration(), cfg.sim));
    } catch (const SimulationDiverged&) {
      ++ds.diverged;
      continue;
    }
    s.stable = s.gt_loss < 0.01;
    if (s.stable) stable.push_back(std::move(s));
  }
  ds.stable = static_cast<int>(stable.size());
  const auto n_test = static_cast<std::size_t>(std::floor(cfg.test_fraction * static_cast<double>(stable.size())));
  ds.test.assign(stable.begin(), stable.begin() + static_cast<std::ptrdiff_t>(n_test));
  ds.train.assign(stable.begin() + static_cast<std::ptrdiff_t>(n_test), stable.end());
  return ds;
}

void write_shape(std::ostream& os, const Shape& shape) {
  std::visit(Overloaded{
                 [&](const Sphere& s) {
                   bin::write<std::uint32_t>(os, 0);
                   bin::write(os, s.radius);
                 },
                 [&](const Box& b) {
                   bin::write<std::uint32_t>(os, 1);
                   bin::write_doubles(os, b.half_extents.data(), 3);
                 },
                 [&](const Capsule& c) {
                   bin::write<std::uint32_t>(os, 2);
                   bin::write(os, c.radius);
                   bin::write(os, c.half_length);
                 },
                 [&](const ConvexMesh& m) {
                   bin::write<std::uint32_t>(os, 3);
                   bin::write<std::uint64_t>(os, m.vertices.size());
                   for (const auto& v : m.vertices) bin::write_doubles(os, v.data(), 3);
                   bin::write<std::uint64_t>(os, m.faces.size());
                   for (const auto& f : m.faces)
                     for (int i : f) bin::write<std::int32_t>(os, i);
                 },
             },
             shape);
}

Shape read_shape(std::istream& is) {
  const auto tag = bin::read<std::uint32_t>(is);
  switch (tag) {
    case 0: return Sphere{bin::read<double>(is)};
    case 1: {
      Box b;
      bin::read_doubles(is, b.half_extents.data(), 3);
      return b;
    }
    case 2: {
      Capsule c;
      c.radius = bin::read<double>(is);
      c.half_length = bin::read<double>(is);
      return c;
    }
    case 3: {
      const auto nv = bin::read<std::uint64_t>(is);
      if (nv > (1u << 20)) throw InputError("dataset: mesh too large");
      std::vector<Vec3d> v(nv);
      for (auto& p : v) bin::read_doubles(is, p.data(), 3);
      const auto nf = bin::read<std::uint64_t>(is);
      if (nf > (1u << 21)) throw InputError("dataset: mesh too large");
      std::vector<std::array<int, 3>> f(nf);
      for (auto& t : f)
        for (int& i : t) i = bin::read<std::int32_t>(is);
      return make_convex_mesh(std::move(v), std::move(f));
    }
    default: throw InputError("dataset: unknown shape tag");
  }
}

namespace {

void write_pose(std::ostream& os, const Pose& p) {
  const Eigen::Vector4d q = p.rotation.coeffs();
  bin::write_doubles(os, q.data(), 4);
  bin::write_doubles(os, p.translation.data(), 3);
}

Pose read_pose(std::istream& is) {
  Eigen::Vector4d q;
  Vec3d t;
  bin::read_doubles(is, q.data(), 4);
  bin::read_doubles(is, t.data(), 3);
  Pose p;
  p.rotation.coeffs() = q;
  p.translation = t;
  return p;
}

void write_samples(std::ostream& os, const std::vector<SceneSample>& samples) {
  bin::write<std::uint64_t>(os, samples.size());
  for (const auto& s : samples) {
    write_shape(os, s.object->shape);
    bin::write(os, s.object->density);
    bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(s.object->surface.size()));
    bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(s.object->symmetry_axes.size()));
    for (const auto& a : s.object->symmetry_axes) {
      bin::write_doubles(os, a.axis.data(), 3);
      bin::write<std::int32_t>(os, a.order);
    }
    bin::write_vector(os, s.hand.angles);
    write_pose(os, s.hand.root);
    write_pose(os, s.object_pose);
    bin::write_vector(os, s.observation);
    bin::write<std::uint8_t>(os, s.stable ? 1 : 0);
    bin::write(os, s.gt_loss);
  }
}

std::vector<SceneSample> read_samples(std::istream& is, const std::shared_ptr<const HandModel>& hand) {
  const auto n = bin::read<std::uint64_t>(is);
  if (n > (1u << 24)) throw InputError("dataset: sample count out of range");
  std::vector<SceneSample> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Shape shape = read_shape(is);
    const double density = bin::read<double>(is);
    const auto vo = bin::read<std::uint32_t>(is);
    const auto na = bin::read<std::uint32_t>(is);
    if (na > 64) throw InputError("dataset: too many symmetry axes");
    std::vector<SymmetryAxis> axes(na);
    for (auto& a : axes) {
      bin::read_doubles(is, a.axis.data(), 3);
      a.order = bin::read<std::int32_t>(is);
    }
    auto object = make_object(std::move(shape), density, static_cast<int>(vo), std::move(axes));
    HandPose hp;
    hp.angles = bin::read_vector(is);
    if (hp.angles.size() != hand->joint_count()) throw InputError("dataset: joint count mismatch");
    hp.root = read_pose(is);
    const Pose object_pose = read_pose(is);
    SceneSample s = make_scene_sample(hand, std::move(object), hp, object_pose);
    s.observation = bin::read_vector(is);
    s.stable = bin::read<std::uint8_t>(is) != 0;
    s.gt_loss = bin::read<double>(is);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

void write_dataset(std::ostream& os, const Dataset& ds) {
  bin::write(os, kDatasetMagic);
  bin::write(os, kDatasetVersion);
  bin::write<std::uint64_t>(os, ds.seed);
  bin::write<std::int32_t>(os, ds.requested);
  bin::write<std::int32_t>(os, ds.attempts);
  bin::write<std::int32_t>(os, ds.stable);
  bin::write<std::int32_t>(os, ds.diverged);
  bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(ds.hand->samples.size()));
  write_samples(os, ds.train);
  write_samples(os, ds.test);
}

Dataset read_dataset(std::istream& is) {
  bin::expect_magic(is, kDatasetMagic, kDatasetVersion, "dataset");
  Dataset ds;
  ds.seed = bin::read<std::uint64_t>(is);
  ds.requested = bin::read<std::int32_t>(is);
  ds.attempts = bin::read<std::int32_t>(is);
  ds.stable = bin::read<std::int32_t>(is);
  ds.diverged = bin::read<std::int32_t>(is);
  const auto vh = bin::read<std::uint32_t>(is);
  if (vh == 0 || vh > (1u << 20)) throw InputError("dataset: bad hand sample count");
  ds.hand = std::make_shared<const HandModel>(make_default_hand(static_cast<int>(vh)));
  ds.train = read_samples(is, ds.hand);
  ds.test = read_samples(is, ds.hand);
  return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path);
  write_dataset(os, ds);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read " + path);
  return read_dataset(is);
}

}  // namespace gripsim
