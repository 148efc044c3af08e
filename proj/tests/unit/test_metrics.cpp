#include <sstream>

#include "doctest.h"
#include "gripsim/geometry/sdf.hpp"
#include "gripsim/learn/dataset.hpp"
#include "gripsim/learn/metrics.hpp"
#include "gripsim/learn/trainer.hpp"
#include "helpers.hpp"

using namespace gripsim;
using namespace testutil;

namespace {

std::shared_ptr<const HandModel> slab() {
  static const auto hand = slab_hand(Vec3d(0.04, 0.01, 0.045), 64);
  return hand;
}

// Hand sample on the top face closest to the palm centre.
Vec3d central_sample() {
  const auto kin = forward_kinematics(*slab(), rest_pose(*slab()));
  Eigen::Index best = 0;
  (kin.surface_points.rowwise() - Eigen::RowVector3d(0, 0.01, 0)).rowwise().squaredNorm().minCoeff(&best);
  return kin.surface_points.row(best).transpose();
}

// Sphere resting on the central hand sample with signed gap `gap` (negative = penetration).
Configuration sphere_over_palm(double radius, double gap) {
  const Vec3d p = central_sample();
  const auto obj = make_object(Sphere{radius}, 1000.0);
  return make_configuration(slab(), rest_pose(*slab()), obj, Pose::Translation(p + Vec3d(0, radius + gap, 0)));
}

PoseGenerator echo_generator(int size) {
  PoseGenerator g;
  g.mlp = Mlp({Layer{Eigen::MatrixXd::Identity(size, size), Eigen::VectorXd::Zero(size), Activation::Identity}});
  return g;
}

const Dataset& clean_dataset() {
  static const Dataset ds = [] {
    DatasetConfig c;
    c.count = 8;
    c.seed = 5;
    c.noise = ObservationNoise{0, 0, 0, 0};
    return generate_dataset(c);
  }();
  return ds;
}

std::array<Vec3d, 8> box_corners(const Vec3d& h) {
  std::array<Vec3d, 8> c;
  for (int i = 0; i < 8; ++i) c[i] = Vec3d(i & 1 ? h.x() : -h.x(), i & 2 ? h.y() : -h.y(), i & 4 ? h.z() : -h.z());
  return c;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("success rate counts strictly below the threshold") {
    CHECK(success_rate({0.005, 0.02}) == 50.0);
    CHECK(success_rate({0.005, 0.005, 0.005}) == 100.0);
    CHECK(success_rate({0.01}) == 0.0);
    CHECK_THROWS_AS(success_rate({}), InputError);
    Rng rng(1);
    std::vector<double> d;
    for (int i = 0; i < 200; ++i) d.push_back(uniform(rng, 0, 0.05));
    double prev = 101;
    for (double t = 0.05; t > 0; t -= 0.001) {
      const double sr = success_rate(d, t);
      CHECK(sr <= prev);
      prev = sr;
    }
  }

  TEST_CASE("contact percentage with the inclusive boundary") {
    const Configuration touching = sphere_over_palm(0.02, -0.001), apart = sphere_over_palm(0.02, 1.0);
    CHECK(contact_percentage({touching, touching, apart, touching}, 1e-3) == 75.0);
    CHECK(contact_percentage({apart, apart}, 1e-3) == 0.0);
    // gap measured by the same distance query the detector uses
    const Configuration grazing = sphere_over_palm(0.02, 0.0015);
    const double gap =
        signed_distance(Sphere{0.02}, grazing.object_pose, grazing.kin.surface_points.row(0).transpose()).distance;
    double nearest = 1e300;
    for (int i = 0; i < grazing.kin.surface_points.rows(); ++i)
      nearest = std::min(nearest, signed_distance(Sphere{0.02}, grazing.object_pose,
                                                  grazing.kin.surface_points.row(i).transpose())
                                      .distance);
    CHECK(gap >= nearest);
    CHECK(in_contact(grazing, nearest));
    CHECK_FALSE(in_contact(grazing, std::nextafter(nearest, 0.0)));
  }

  TEST_CASE("penetration depth examples") {
    const auto pd = max_penetration(sphere_over_palm(0.02, -0.013), 1e-3);
    REQUIRE(pd.has_value());
    CHECK(*pd == doctest::Approx(0.013).epsilon(1e-12));
    const auto kiss = max_penetration(sphere_over_palm(0.02, 0.0005), 1e-3);
    REQUIRE(kiss.has_value());
    CHECK(*kiss == 0.0);
    CHECK_FALSE(max_penetration(sphere_over_palm(0.02, 1.0), 1e-3).has_value());
    const auto mean = penetration_depth({sphere_over_palm(0.02, -0.01), sphere_over_palm(0.04, -0.03)}, 1e-3);
    REQUIRE(mean.has_value());
    CHECK(*mean == doctest::Approx(0.02).epsilon(1e-12));
    CHECK_FALSE(penetration_depth({sphere_over_palm(0.02, 1.0)}, 1e-3).has_value());
  }

  TEST_CASE("mean joint error examples") {
    Rng rng(2);
    PointSet gt(16, 3);
    for (int i = 0; i < gt.size(); ++i) gt.data()[i] = gaussian(rng);
    CHECK(mean_joint_error(gt, gt) == 0.0);
    PointSet shifted = gt.rowwise() + Eigen::RowVector3d(0.3, -0.1, 2.0);
    CHECK(mean_joint_error(shifted, gt) < 1e-15);
    PointSet one = gt;
    one(7, 1) += 0.02;
    CHECK(mean_joint_error(one, gt) == doctest::Approx(0.00125).epsilon(1e-12));
    // common translation of both sets
    const PointSet a = one.rowwise() + Eigen::RowVector3d(1, 2, 3), b = gt.rowwise() + Eigen::RowVector3d(1, 2, 3);
    CHECK(mean_joint_error(a, b) == doctest::Approx(mean_joint_error(one, gt)).epsilon(1e-12));
  }

  TEST_CASE("corner error examples") {
    const auto corners = box_corners(Vec3d(0.03, 0.02, 0.01));
    const Mat3d I = Mat3d::Identity();
    CHECK(corner_error(I, Vec3d::Zero(), I, Vec3d::Zero(), corners) == 0.0);
    CHECK(corner_error(I, Vec3d(0, 0.05, 0), I, Vec3d::Zero(), corners) == doctest::Approx(0.05).epsilon(1e-14));
    const auto syms = make_symmetry_set({{Vec3d::UnitZ(), 2}, {Vec3d::UnitX(), 2}});
    const Mat3d flip = Eigen::AngleAxisd(M_PI, Vec3d::UnitZ()).toRotationMatrix();
    CHECK(corner_error(flip, Vec3d::Zero(), I, Vec3d::Zero(), corners) > 0.0);
    CHECK(corner_error(flip, Vec3d::Zero(), I, Vec3d::Zero(), corners, &syms) < 1e-15);
  }

  TEST_CASE("symmetric corner error never exceeds the plain one") {
    const auto syms = make_symmetry_set({{Vec3d::UnitZ(), 6}, {Vec3d::UnitX(), 2}});
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
      const auto corners = box_corners(Vec3d(uniform(rng, 0.01, 0.04), uniform(rng, 0.01, 0.04), uniform(rng, 0.01, 0.04)));
      const Pose a = random_pose(rng, 0.1), b = random_pose(rng, 0.1);
      CHECK(corner_error(a.matrix(), a.translation, b.matrix(), b.translation, corners, &syms) <=
            corner_error(a.matrix(), a.translation, b.matrix(), b.translation, corners));
    }
  }

  TEST_CASE("displacement at the metric horizon") {
    const SceneFile fall = load_fixture("free_fall.yaml");
    const Configuration c = fall.configuration();
    const double d = simulation_displacement(c, fall.sim.with_steps(10));
    CHECK(d == doctest::Approx(0.5 * 9.8 * 0.2 * 0.22).epsilon(1e-9));
    CHECK(simulation_displacement(c, fall.sim.with_steps(10)) == d);
    const SceneFile caged = load_fixture("caged.yaml");
    CHECK(simulation_displacement(caged.configuration(), caged.sim) ==
          stability_loss(simulate(caged.configuration(), caged.sim)));
    CHECK(simulation_displacement(caged.configuration(), caged.sim) < 0.01);
  }

  TEST_CASE("free-fall gradient probe is flat sideways and the surrogate column is fixed") {
    const SceneFile fall = load_fixture("free_fall.yaml");
    const Configuration c = fall.configuration();
    const StabilityNet net(assemble_input(c).size(), TargetMode::S, {16}, 3);
    const GradProbe probe = grad_compare(c, net, fall.sim, {1e-3, 1e-4, 1e-5, 1e-6});
    REQUIRE(probe.entries.size() == 4u);
    for (const auto& e : probe.entries) {
      CHECK(std::abs(e.fd.x()) < 1e-6);
      CHECK(std::abs(e.fd.z()) < 1e-6);
      CHECK_FALSE(e.diverged);
    }
    std::ostringstream os;
    write_probe_csv(os, {probe});
    std::istringstream is(os.str());
    std::string line, last_col;
    std::getline(is, line);
    CHECK(line == "probe,epsilon,fd_norm,surrogate_norm");
    int rows = 0;
    while (std::getline(is, line)) {
      const std::string col = line.substr(line.rfind(',') + 1);
      if (rows++ > 0) CHECK(col == last_col);
      last_col = col;
    }
    CHECK(rows == 4);
  }

  TEST_CASE("echoing the ground truth is perfect") {
    const Dataset& ds = clean_dataset();
    REQUIRE(!ds.test.empty());
    const PoseGenerator gen = echo_generator(static_cast<int>(ds.test[0].observation.size()));
    const MetricsRecord m = evaluate(ds.test, gen, EvalParams{});
    CHECK(m.mje < 1e-12);
    CHECK(m.mce < 1e-12);
    CHECK(m.smce < 1e-12);
    CHECK(m.sr == 100.0);
    CHECK(m.samples == static_cast<int>(ds.test.size()));
    const MetricsRecord again = evaluate(ds.test, gen, EvalParams{});
    CHECK(again.sd == m.sd);
    CHECK(again.mje == m.mje);
  }

  TEST_CASE("object pushed far away is never in contact and falls freely") {
    const Dataset& ds = clean_dataset();
    const int size = static_cast<int>(ds.test[0].observation.size());
    PoseGenerator gen = echo_generator(size);
    const PoseEncoding L{size - 18};
    gen.mlp.mutable_layers()[0].bias[L.object_offset()] = 10.0 / kTranslationUnit;
    const MetricsRecord m = evaluate(ds.test, gen, EvalParams{});
    CHECK(m.cp == 0.0);
    CHECK_FALSE(m.pd.has_value());
    CHECK(m.sd == doctest::Approx(100 * 0.5 * 9.8 * 0.2 * 0.22).epsilon(1e-6));
    CHECK(m.sr == 0.0);
  }

  TEST_CASE("metrics csv layout") {
    std::ostringstream os;
    write_metrics_csv_header(os);
    MetricsRecord m;
    m.samples = 3;
    write_metrics_csv_row(os, "test", m);
    const std::string s = os.str();
    CHECK(s.find("split") == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 2);
  }
}
