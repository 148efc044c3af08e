#include <sstream>

#include "doctest.h"
#include "gripsim/learn/dataset.hpp"
#include "gripsim/learn/features.hpp"
#include "gripsim/learn/surrogate.hpp"
#include "helpers.hpp"

using namespace gripsim;
using namespace testutil;

namespace {

void zero_out(StabilityNet& net) {
  for (auto& l : net.mlp.mutable_layers()) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

Configuration loose_grasp(Rng& rng) {
  const auto hand = default_hand();
  HandPose hp = rest_pose(*hand);
  hp.root = random_pose(rng, 0.05);
  const auto obj = make_object(Sphere{uniform(rng, 0.02, 0.035)}, 900.0);
  Pose op = place_on_palm(*hand, hp.root, *obj, Mat3d::Identity(), uniform(rng, -0.01, 0.01), uniform(rng, -0.01, 0.01));
  hp = close_fingers(*hand, hp, *obj, op, uniform(rng, 0.0, 0.06));
  return make_configuration(hand, hp, obj, op);
}

std::vector<LabelledSample> labelled_set(std::uint64_t seed, int n, int steps) {
  Rng rng(seed);
  std::vector<LabelledSample> out;
  const SimParams p = SimParams{}.with_steps(steps);
  while (static_cast<int>(out.size()) < n) {
    auto s = label(loose_grasp(rng), p, Provenance::GroundTruth);
    if (s) out.push_back(std::move(*s));
  }
  return out;
}

LabelledSample tagged(Provenance p, double loss) {
  LabelledSample s;
  s.input = Eigen::VectorXd::Constant(4, loss);
  s.loss = loss;
  s.provenance = p;
  return s;
}

}  // namespace

TEST_SUITE("surrogate") {
  TEST_CASE("head sizes follow the mode") {
    CHECK(head_size(TargetMode::S) == 1);
    CHECK(head_size(TargetMode::T) == 3);
    CHECK(head_size(TargetMode::RT) == 9);
    CHECK(StabilityNet(10, TargetMode::RT, {8}, 1).mlp.output_size() == 9);
  }

  TEST_CASE("zeroed scalar head reads ln 2 with zero gradient") {
    StabilityNet net(12, TargetMode::S, {8, 8}, 3);
    zero_out(net);
    Rng rng(1);
    for (int i = 0; i < 5; ++i) {
      Eigen::VectorXd x(12);
      for (auto& v : x) v = gaussian(rng);
      CHECK(replicate_stability(net, x).loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
      CHECK(surrogate_input_gradient(net, x).isZero(0));
    }
  }

  TEST_CASE("zero predicted displacement reads zero") {
    for (TargetMode m : {TargetMode::T, TargetMode::RT}) {
      StabilityNet net(6, m, {5}, 2);
      zero_out(net);
      CHECK(replicate_stability(net, Eigen::VectorXd::Ones(6)).loss == 0.0);
    }
  }

  TEST_CASE("wrong input size is rejected") {
    const StabilityNet net(6, TargetMode::S, {5}, 2);
    CHECK_THROWS_AS(replicate_stability(net, Eigen::VectorXd::Zero(5)), InputError);
  }

  TEST_CASE("scalar head never goes negative") {
    const StabilityNet net(8, TargetMode::S, {16, 16}, 4);
    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
      Eigen::VectorXd x(8);
      for (auto& v : x) v = 20 * gaussian(rng);
      CHECK(replicate_stability(net, x).loss >= 0.0);
    }
  }

  TEST_CASE("input gradient matches central differences in every mode") {
    Rng rng(6);
    const double h = 1e-6;
    int probes = 0;
    for (TargetMode m : {TargetMode::S, TargetMode::T, TargetMode::RT}) {
      StabilityNet net(10, m, {16, 16}, 10 + static_cast<int>(m));
      for (auto& l : net.mlp.mutable_layers())
        for (auto& b : l.bias) b = 0.2 * gaussian(rng);
      for (int t = 0; t < 20; ++t, ++probes) {
        Eigen::VectorXd x(10);
        for (auto& v : x) v = gaussian(rng);
        const Eigen::VectorXd g = surrogate_input_gradient(net, x);
        for (int i = 0; i < 10; ++i) {
          Eigen::VectorXd up = x, dn = x;
          up[i] += h;
          dn[i] -= h;
          const double fd = (replicate_stability(net, up).loss - replicate_stability(net, dn).loss) / (2 * h);
          CHECK(std::abs(fd - g[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
        }
        CHECK(surrogate_input_gradient(net, x) == g);
      }
    }
    CHECK(probes >= 50);
  }

  TEST_CASE("batch gradient matches per-sample calls") {
    const StabilityNet net(7, TargetMode::T, {9}, 5);
    Rng rng(2);
    Eigen::MatrixXd X(7, 4);
    for (int i = 0; i < X.size(); ++i) X.data()[i] = gaussian(rng);
    const auto [loss, grad] = surrogate_batch_gradient(net, X);
    for (int c = 0; c < 4; ++c) {
      CHECK(loss[c] == doctest::Approx(replicate_stability(net, X.col(c)).loss).epsilon(1e-14));
      CHECK((grad.col(c) - surrogate_input_gradient(net, X.col(c))).norm() < 1e-14);
    }
  }

  TEST_CASE("labelling reproduces the simulator oracles") {
    const SceneFile caged = load_fixture("caged.yaml"), loose = load_fixture("one_sided.yaml"),
                    fall = load_fixture("free_fall.yaml");
    const auto a = label(caged.configuration(), caged.sim, Provenance::GroundTruth);
    const auto b = label(loose.configuration(), loose.sim, Provenance::GroundTruth);
    const auto c = label(fall.configuration(), fall.sim, Provenance::GroundTruth);
    REQUIRE((a && b && c));
    CHECK(a->loss < 0.01);
    CHECK(b->loss > 0.1);
    CHECK(c->loss == doctest::Approx(19.796).epsilon(1e-9));
    for (const auto* s : {&*a, &*b, &*c}) {
      CHECK(std::abs(s->loss - s->displacement.norm()) <= 1e-9);
      CHECK(s->input.size() == 640);
    }
  }

  TEST_CASE("diverged labels are dropped and counted") {
    const SceneFile fall = load_fixture("free_fall.yaml");
    SimParams p = fall.sim;
    p.gravity = Vec3d(0, -1.7e308, 0);
    int diverged = 0;
    CHECK_FALSE(label(fall.configuration(), p, Provenance::Generator, &diverged).has_value());
    CHECK(diverged == 1);
  }

  TEST_CASE("perturbation contract") {
    Rng rng(3);
    const Configuration c = loose_grasp(rng);
    const Configuration same = perturb(c, 99, PerturbParams{0, 0, 0});
    CHECK(same.object_pose.translation == c.object_pose.translation);
    CHECK(same.object_pose.rotation.coeffs() == c.object_pose.rotation.coeffs());
    CHECK(same.hand_pose().angles == c.hand_pose().angles);
    const Configuration p1 = perturb(c, 7), p2 = perturb(c, 7);
    CHECK(p1.object_pose.translation == p2.object_pose.translation);
    CHECK(p1.hand_pose().angles == p2.hand_pose().angles);
    Vec3d sum = Vec3d::Zero();
    for (std::uint64_t s = 0; s < 1000; ++s) {
      const Configuration p = perturb(c, 1000 + s);
      const Vec3d d = p.object_pose.translation - c.object_pose.translation;
      CHECK(d.cwiseAbs().maxCoeff() <= 0.02);
      const double angle = Eigen::AngleAxisd(p.object_pose.rotation * c.object_pose.rotation.conjugate()).angle();
      CHECK(angle <= 10.0 * M_PI / 180.0 + 1e-12);
      sum += d;
    }
    const double sigma = 0.02 / std::sqrt(3.0);
    CHECK((sum / 1000).cwiseAbs().maxCoeff() <= 3 * sigma / std::sqrt(1000.0));
  }

  TEST_CASE("approximation loss and masking") {
    CHECK(approximation_loss(4.0, 4.0) == 0.0);
    CHECK(approximation_loss(2.0, 5.0) == 3.0);
    CHECK(approximation_loss(5.0, 2.0) == approximation_loss(2.0, 5.0));
    CHECK(approximation_loss(Eigen::VectorXd(Eigen::Vector2d(0, 0)), Eigen::VectorXd(Eigen::Vector2d(3, 4))) == 5.0);
    CHECK(mask_check(0.005, 0.007));
    CHECK_FALSE(mask_check(0.005, 0.2));
    CHECK_FALSE(mask_check(0.01, 0.0099));
    CHECK(stability_bin(0.0) == 0);
    CHECK(stability_bin(0.01) == 1);
    CHECK(stability_bin(0.05) == 2);
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
      const double a = std::exp(uniform(rng, -8, 1)), b = std::exp(uniform(rng, -8, 1));
      CHECK(mask_check(a, b) == mask_check(b, a));
      CHECK(mask_check(a, a));
    }
  }

  TEST_CASE("replay buffer evicts first-in first-out") {
    ReplayBuffer buf(10);
    for (int i = 0; i < 13; ++i) buf.push(tagged(Provenance::Generator, i));
    CHECK(buf.size() == 10u);
    CHECK(buf.inserted() == 13u);
    for (std::size_t i = 0; i < buf.size(); ++i) CHECK(buf[i].loss == static_cast<double>(i + 3));
    std::stringstream ss;
    buf.write(ss);
    const ReplayBuffer back = ReplayBuffer::read(ss);
    CHECK(back.size() == buf.size());
    CHECK(back.inserted() == buf.inserted());
    for (std::size_t i = 0; i < buf.size(); ++i) CHECK(back[i].input == buf[i].input);
  }

  TEST_CASE("batches follow the two-one-one provenance ratio") {
    ReplayBuffer buf(1000);
    for (int i = 0; i < 300; ++i) {
      buf.push(tagged(Provenance::Generator, 0.1));
      buf.push(tagged(Provenance::Perturbed, 0.2));
      buf.push(tagged(Provenance::GroundTruth, 0.3));
    }
    Rng rng(8);
    for (int n : {4, 8, 33, 64}) {
      const auto idx = sample_batch(buf, n, rng);
      REQUIRE(static_cast<int>(idx.size()) == n);
      std::array<int, 3> counts{};
      for (auto i : idx) ++counts[static_cast<int>(buf[i].provenance)];
      CHECK(std::abs(counts[0] - n / 2.0) <= 1);
      CHECK(std::abs(counts[1] - n / 4.0) <= 1);
      CHECK(std::abs(counts[2] - n / 4.0) <= 1);
    }
    ReplayBuffer only_gt(10);
    only_gt.push(tagged(Provenance::GroundTruth, 0.3));
    for (auto i : sample_batch(only_gt, 6, rng)) CHECK(i == 0u);
  }

  TEST_CASE("training step edge cases") {
    StabilityNet net(4, TargetMode::S, {6}, 1);
    const StabilityNet before = net;
    AdamState opt(net.mlp, 0.0);
    Rng rng(1);
    ReplayBuffer empty(4);
    CHECK_FALSE(surrogate_train_step(net, empty, 8, opt, rng).ran);
    ReplayBuffer buf(4);
    buf.push(tagged(Provenance::Generator, 0.5));
    const auto rep = surrogate_train_step(net, buf, 8, opt, rng);
    CHECK(rep.ran);
    CHECK(net.mlp == before.mlp);
  }

  TEST_CASE("overfitting one sample never increases the loss") {
    StabilityNet net(4, TargetMode::S, {16}, 2);
    AdamState opt(net.mlp, 1e-3);
    Rng rng(2);
    ReplayBuffer buf(4);
    buf.push(tagged(Provenance::Generator, 0.05));
    double prev = 1e300, first = 0;
    for (int i = 0; i < 100; ++i) {
      const auto rep = surrogate_train_step(net, buf, 4, opt, rng);
      CHECK(rep.loss <= prev + 1e-12);
      if (i == 0) first = rep.loss;
      prev = rep.loss;
    }
    CHECK(prev < 0.5 * first);
  }

  TEST_CASE("warm-up training fits and generalises") {
    const auto train = labelled_set(31, 160, 50);
    const auto held = labelled_set(32, 40, 50);
    StabilityNet net(640, TargetMode::S, {64, 64}, 7);
    ReplayBuffer buf(1000);
    for (const auto& s : train) buf.push(s);
    auto mse = [&] {
      double acc = 0;
      for (const auto& s : train) acc += std::pow(replicate_stability(net, s.input).loss - s.loss, 2);
      return acc / train.size();
    };
    const double mse0 = mse(), ae0 = approximation_error(net, held);
    AdamState opt(net.mlp, 1e-3);
    Rng rng(3);
    for (int i = 0; i < 600; ++i) surrogate_train_step(net, buf, 32, opt, rng);
    CHECK(mse() * 10 <= mse0);
    CHECK(approximation_error(net, held) <= 0.5 * ae0);
    // gradients stay exact after training
    const Eigen::VectorXd x = held[0].input;
    const Eigen::VectorXd g = surrogate_input_gradient(net, x);
    for (int i = 0; i < 640; i += 37) {
      Eigen::VectorXd up = x, dn = x;
      up[i] += 1e-6;
      dn[i] -= 1e-6;
      const double fd = (replicate_stability(net, up).loss - replicate_stability(net, dn).loss) / 2e-6;
      CHECK(std::abs(fd - g[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }

  TEST_CASE("stability net round trip") {
    const StabilityNet net(5, TargetMode::RT, {4}, 9);
    std::stringstream ss;
    write_stability_net(ss, net);
    const StabilityNet back = read_stability_net(ss);
    CHECK(back.mode == TargetMode::RT);
    CHECK(back.mlp == net.mlp);
  }
}
