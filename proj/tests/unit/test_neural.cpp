#include <sstream>

#include "doctest.h"
#include "gripsim/errors.hpp"
#include "gripsim/learn/mlp.hpp"
#include "gripsim/rng.hpp"

using namespace gripsim;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int r, int c, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * gaussian(rng);
  return m;
}

// sum(G .* f(X)) for a fixed upstream weight G.
double probe(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& g) {
  return (mlp_forward(net, x).array() * g.array()).sum();
}

Mlp& with_random_biases(Mlp& net, Rng& rng) {
  for (auto& l : net.mutable_layers()) l.bias = random_matrix(rng, static_cast<int>(l.bias.size()), 1, 0.3);
  return net;
}

}  // namespace

TEST_SUITE("neural") {
  TEST_CASE("identity layer passes the input through") {
    Layer l{Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4), Activation::Identity};
    const Mlp net({l});
    const Eigen::VectorXd x(Eigen::Vector4d(1, -2, 3.5, 0));
    CHECK(mlp_forward(net, x) == x);
  }

  TEST_CASE("relu clamps negatives") {
    Layer l{Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), Activation::Relu};
    const Mlp net({l});
    CHECK(mlp_forward(net, Eigen::VectorXd(Eigen::Vector3d(-1, -1, -1))).isZero(0));
  }

  TEST_CASE("two tanh layers match hand evaluation") {
    Eigen::MatrixXd W1(2, 3), W2(1, 2);
    W1 << 0.5, -0.25, 1.0, -1.5, 0.75, 0.125;
    W2 << 2.0, -0.5;
    Eigen::VectorXd b1(2), b2(1);
    b1 << 0.1, -0.2;
    b2 << 0.05;
    const Mlp net({Layer{W1, b1, Activation::Tanh}, Layer{W2, b2, Activation::Tanh}});
    const double x0 = 0.3, x1 = -0.7, x2 = 1.1;
    const double h0 = std::tanh(0.5 * x0 - 0.25 * x1 + 1.0 * x2 + 0.1);
    const double h1 = std::tanh(-1.5 * x0 + 0.75 * x1 + 0.125 * x2 - 0.2);
    const double y = std::tanh(2.0 * h0 - 0.5 * h1 + 0.05);
    const Eigen::VectorXd out = mlp_forward(net, Eigen::VectorXd(Eigen::Vector3d(x0, x1, x2)));
    CHECK(std::abs(out[0] - y) < 1e-12);
  }

  TEST_CASE("input size mismatch is rejected") {
    const Mlp net({3, 4, 1}, Activation::Tanh, Activation::Identity, 1);
    CHECK_THROWS_AS(mlp_forward(net, Eigen::VectorXd(Eigen::VectorXd::Zero(2))), InputError);
  }

  TEST_CASE("linear net input gradient is the transpose product") {
    Rng rng(3);
    const Eigen::MatrixXd W = random_matrix(rng, 3, 5);
    const Mlp net({Layer{W, Eigen::VectorXd::Zero(3), Activation::Identity}});
    Tape tape;
    mlp_forward(net, Eigen::MatrixXd(random_matrix(rng, 5, 1)), &tape);
    const Eigen::MatrixXd g = random_matrix(rng, 3, 1);
    const auto r = mlp_backward(net, tape, g);
    CHECK((r.input - W.transpose() * g).norm() == 0.0);
  }

  TEST_CASE("zero upstream gradient gives zero gradients") {
    const Mlp net({4, 8, 8, 2}, Activation::Tanh, Activation::Softplus, 5);
    Rng rng(1);
    Tape tape;
    mlp_forward(net, random_matrix(rng, 4, 3), &tape);
    const auto r = mlp_backward(net, tape, Eigen::MatrixXd::Zero(2, 3));
    CHECK(r.input.isZero(0));
    CHECK(r.params.squared_norm() == 0.0);
  }

  TEST_CASE("stale tapes are refused") {
    Mlp net({2, 3, 1}, Activation::Relu, Activation::Identity, 2);
    Tape tape;
    mlp_forward(net, Eigen::VectorXd(Eigen::VectorXd::Ones(2)), &tape);
    net.mutable_layers()[0].bias[0] = 0.1;
    CHECK_THROWS_AS(mlp_backward(net, tape, Eigen::MatrixXd::Ones(1, 1)), UsageError);
  }

  TEST_CASE("gradients match central differences for every activation") {
    Rng rng(7);
    const double h = 1e-6;
    struct Arch {
      std::vector<int> sizes;
      Activation hidden, out;
    };
    const std::vector<Arch> archs{{{6, 16, 16, 1}, Activation::Relu, Activation::Softplus},
                                  {{6, 12, 3}, Activation::Tanh, Activation::Identity},
                                  {{5, 10, 10, 9}, Activation::Softplus, Activation::Identity},
                                  {{4, 8, 2}, Activation::Tanh, Activation::Tanh}};
    int probes = 0;
    for (const auto& a : archs) {
      Mlp net(a.sizes, a.hidden, a.out, 100 + probes);
      with_random_biases(net, rng);
      for (int t = 0; t < 15; ++t, ++probes) {
        const Eigen::MatrixXd x = random_matrix(rng, a.sizes.front(), 2);
        const Eigen::MatrixXd g = random_matrix(rng, a.sizes.back(), 2);
        Tape tape;
        mlp_forward(net, x, &tape);
        const auto r = mlp_backward(net, tape, g);
        for (int i = 0; i < x.rows(); ++i)
          for (int j = 0; j < x.cols(); ++j) {
            Eigen::MatrixXd up = x, dn = x;
            up(i, j) += h;
            dn(i, j) -= h;
            const double fd = (probe(net, up, g) - probe(net, dn, g)) / (2 * h);
            CHECK(std::abs(fd - r.input(i, j)) <= 1e-4 * std::max(1.0, std::abs(fd)));
          }
        // a handful of weights and biases per layer
        for (std::size_t l = 0; l < net.layers().size(); ++l)
          for (int k = 0; k < 3; ++k) {
            Mlp up = net, dn = net;
            const int rr = static_cast<int>(uniform_index(rng, net.layers()[l].weight.rows()));
            const int cc = static_cast<int>(uniform_index(rng, net.layers()[l].weight.cols()));
            up.mutable_layers()[l].weight(rr, cc) += h;
            dn.mutable_layers()[l].weight(rr, cc) -= h;
            double fd = (probe(up, x, g) - probe(dn, x, g)) / (2 * h);
            CHECK(std::abs(fd - r.params.weight[l](rr, cc)) <= 1e-4 * std::max(1.0, std::abs(fd)));
            up = net;
            dn = net;
            up.mutable_layers()[l].bias[rr] += h;
            dn.mutable_layers()[l].bias[rr] -= h;
            fd = (probe(up, x, g) - probe(dn, x, g)) / (2 * h);
            CHECK(std::abs(fd - r.params.bias[l][rr]) <= 1e-4 * std::max(1.0, std::abs(fd)));
          }
      }
    }
    CHECK(probes >= 50);
  }

  TEST_CASE("initialisation and passes are deterministic") {
    const Mlp a({6, 16, 1}, Activation::Relu, Activation::Softplus, 42), b({6, 16, 1}, Activation::Relu,
                                                                            Activation::Softplus, 42);
    CHECK(a == b);
    const Mlp c({6, 16, 1}, Activation::Relu, Activation::Softplus, 43);
    CHECK_FALSE(a == c);
    Rng rng(0);
    const Eigen::MatrixXd x = random_matrix(rng, 6, 4);
    Tape ta, tb;
    CHECK(mlp_forward(a, x, &ta) == mlp_forward(b, x, &tb));
    const Eigen::MatrixXd g = Eigen::MatrixXd::Ones(1, 4);
    CHECK(mlp_backward(a, ta, g).input == mlp_backward(b, tb, g).input);
  }

  TEST_CASE("first Adam step has the closed form") {
    Mlp net({Layer{Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::VectorXd::Zero(1), Activation::Identity}});
    AdamState opt(net, 0.01);
    MlpGradients g = MlpGradients::zeros_like(net);
    g.weight[0](0, 0) = 0.3;
    const auto rep = adam_step(opt, net, g, 0.0);
    CHECK(rep.applied);
    const double expect = 0.5 - 0.01 * 0.3 / (0.3 + opt.epsilon);
    CHECK(net.layers()[0].weight(0, 0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(opt.step == 1u);
  }

  TEST_CASE("global norm clipping scales the gradient") {
    Mlp a({Layer{Eigen::MatrixXd::Zero(1, 2), Eigen::VectorXd::Zero(1), Activation::Identity}});
    Mlp b = a;
    AdamState oa(a, 0.1), ob(b, 0.1);
    oa.beta1 = ob.beta1 = 0.0;
    MlpGradients g = MlpGradients::zeros_like(a);
    g.weight[0] << 6.0, 8.0;  // norm 10
    MlpGradients scaled = g;
    scaled *= 0.1;
    const auto ra = adam_step(oa, a, g, 1.0);
    adam_step(ob, b, scaled, 0.0);
    CHECK(ra.grad_norm == doctest::Approx(10.0));
    CHECK(oa.v.weight[0].isApprox(ob.v.weight[0], 1e-14));
    CHECK(a.layers()[0].weight.isApprox(b.layers()[0].weight, 1e-14));
  }

  TEST_CASE("zero gradients leave parameters fixed and non-finite ones are skipped") {
    Mlp net({3, 4, 1}, Activation::Tanh, Activation::Identity, 9);
    const Mlp before = net;
    AdamState opt(net, 0.1);
    CHECK(adam_step(opt, net, MlpGradients::zeros_like(net), 1.0).applied);
    CHECK(net == before);
    MlpGradients bad = MlpGradients::zeros_like(net);
    bad.bias[0][0] = std::nan("");
    const auto rep = adam_step(opt, net, bad, 1.0);
    CHECK_FALSE(rep.applied);
    CHECK(net == before);
  }

  TEST_CASE("frozen layers do not move") {
    Mlp net({3, 4, 1}, Activation::Tanh, Activation::Identity, 9);
    const Mlp before = net;
    AdamState opt(net, 0.1);
    MlpGradients g = MlpGradients::zeros_like(net);
    g.weight[0].setOnes();
    g.weight[1].setOnes();
    const std::vector<bool> frozen{true, false};
    adam_step(opt, net, g, 0.0, &frozen);
    CHECK(net.layers()[0].weight == before.layers()[0].weight);
    CHECK(net.layers()[1].weight != before.layers()[1].weight);
  }

  TEST_CASE("fitting a sine drops the error tenfold") {
    Mlp net({1, 32, 32, 1}, Activation::Tanh, Activation::Identity, 77);
    AdamState opt(net, 3e-3);
    Eigen::MatrixXd x(1, 64), y(1, 64);
    for (int i = 0; i < 64; ++i) {
      x(0, i) = -3.0 + 6.0 * i / 63.0;
      y(0, i) = std::sin(x(0, i));
    }
    auto mse = [&] { return (mlp_forward(net, x) - y).squaredNorm() / 64; };
    const double start = mse();
    for (int s = 0; s < 2000; ++s) {
      Tape tape;
      const Eigen::MatrixXd out = mlp_forward(net, x, &tape);
      auto r = mlp_backward(net, tape, (out - y) * (2.0 / 64));
      adam_step(opt, net, r.params, 1.0);
    }
    CHECK(mse() * 10 <= start);
  }

  TEST_CASE("checkpoint round trip is exact") {
    const Mlp net({5, 7, 3}, Activation::Softplus, Activation::Identity, 123);
    std::stringstream ss;
    write_mlp(ss, net);
    const Mlp back = read_mlp(ss);
    CHECK(back == net);
    CHECK(back.seed() == 123u);
    std::stringstream bad("not a network");
    CHECK_THROWS(read_mlp(bad));
  }

  TEST_CASE("optimiser state round trip is exact") {
    Mlp net({3, 4, 1}, Activation::Tanh, Activation::Identity, 9);
    AdamState opt(net, 0.05);
    MlpGradients g = MlpGradients::zeros_like(net);
    g.weight[0].setConstant(0.2);
    adam_step(opt, net, g, 1.0);
    std::stringstream ss;
    write_adam(ss, opt);
    const AdamState back = read_adam(ss, net);
    CHECK(back.step == opt.step);
    CHECK(back.learning_rate == opt.learning_rate);
    CHECK(back.m.weight[0] == opt.m.weight[0]);
    CHECK(back.v.weight[0] == opt.v.weight[0]);
  }
}
