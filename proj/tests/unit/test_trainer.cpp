#include <cmath>
#include <sstream>

#include "doctest.h"
#include "gripsim/learn/trainer.hpp"
#include "helpers.hpp"

using namespace gripsim;
using namespace testutil;

namespace {

const Dataset& small_dataset() {
  static const Dataset ds = [] {
    DatasetConfig c;
    c.count = 12;
    c.seed = 11;
    return generate_dataset(c);
  }();
  return ds;
}

TrainConfig tiny(bool surrogate = true) {
  TrainConfig c;
  c.generator_warmup = 6;
  c.surrogate_warmup = 4;
  c.joint_steps = 5;
  c.generator_batch = 4;
  c.surrogate_batch = 4;
  c.label_batch = 2;
  c.initial_perturbations = 1;
  c.generator_hidden = {16, 16};
  c.surrogate_hidden = {16};
  c.hp.stability = 10.0;
  c.joint_generator_lr = 1e-2;
  c.surrogate = surrogate;
  if (!surrogate) c.hp.stability = 0;
  return c;
}

std::string state_bytes(const Trainer& t) {
  std::ostringstream os;
  t.save(os);
  return os.str();
}

bool same_params(const Mlp& a, const Mlp& b) {
  if (a.layers().size() != b.layers().size()) return false;
  for (std::size_t i = 0; i < a.layers().size(); ++i)
    if (a.layers()[i].weight != b.layers()[i].weight || a.layers()[i].bias != b.layers()[i].bias) return false;
  return true;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("one report row per global step with phase-specific columns") {
    Trainer t(small_dataset(), tiny());
    t.run();
    CHECK(t.done());
    const auto& rows = t.report().rows;
    REQUIRE(rows.size() == 15u);
    for (long s = 0; s < 15; ++s) CHECK(rows[s].step == s);
    CHECK(std::isfinite(rows[0].hand));
    CHECK(std::isnan(rows[0].approximation));
    CHECK(std::isnan(rows[7].hand));
    CHECK(std::isfinite(rows[7].approximation));
    CHECK(std::isfinite(rows[12].hand));
    CHECK(std::isfinite(rows[12].stability));
    CHECK(rows[12].masked >= 0.0);
    CHECK(rows[12].masked <= 1.0);
    CHECK(t.buffer().size() > 0u);
  }

  TEST_CASE("zero stability weight reproduces the baseline generator") {
    TrainConfig with = tiny();
    with.hp.stability = 0;
    Trainer a(small_dataset(), with), b(small_dataset(), tiny(false));
    a.run();
    b.run();
    CHECK(same_params(a.generator().mlp, b.generator().mlp));
  }

  TEST_CASE("without joint steps the result is the warm-up generator") {
    TrainConfig joint = tiny(), base = tiny(false);
    joint.joint_steps = base.joint_steps = 0;
    Trainer a(small_dataset(), joint), b(small_dataset(), base);
    a.run();
    b.run();
    CHECK(same_params(a.generator().mlp, b.generator().mlp));
  }

  TEST_CASE("baseline and joint training agree until the first stability update") {
    Trainer a(small_dataset(), tiny()), b(small_dataset(), tiny(false));
    const long joint_start = 10;
    a.run(joint_start);
    b.run(joint_start);
    CHECK(same_params(a.generator().mlp, b.generator().mlp));
    a.advance();
    b.advance();
    CHECK_FALSE(same_params(a.generator().mlp, b.generator().mlp));
  }

  TEST_CASE("stability-bearing updates leave the frozen prefix untouched") {
    Trainer t(small_dataset(), tiny());
    t.run(10);
    const Mlp before = t.generator().mlp;
    t.run();
    const auto& x = before.layers();
    const auto& y = t.generator().mlp.layers();
    CHECK(x[0].weight == y[0].weight);
    CHECK(x[0].bias == y[0].bias);
    CHECK(x.back().weight != y.back().weight);
  }

  TEST_CASE("identical seeds give identical state bytes") {
    Trainer a(small_dataset(), tiny()), b(small_dataset(), tiny());
    a.run();
    b.run();
    CHECK(state_bytes(a) == state_bytes(b));
    TrainConfig other = tiny();
    other.seed = 8;
    Trainer c(small_dataset(), other);
    c.run();
    CHECK(state_bytes(a) != state_bytes(c));
  }

  TEST_CASE("resuming from a mid-run checkpoint matches an uninterrupted run") {
    for (long cut : {3L, 10L, 12L}) {
      Trainer full(small_dataset(), tiny());
      full.run();
      Trainer first(small_dataset(), tiny());
      first.run(cut);
      std::stringstream ss;
      first.save(ss);
      Trainer second(small_dataset(), tiny());
      second.load(ss);
      CHECK(second.step() == cut);
      second.run();
      CHECK(state_bytes(second) == state_bytes(full));
      CHECK(second.report().rows.size() == full.report().rows.size());
    }
  }

  TEST_CASE("checkpoint from another configuration is rejected") {
    Trainer a(small_dataset(), tiny());
    a.run(2);
    std::stringstream ss;
    a.save(ss);
    TrainConfig other = tiny();
    other.seed = 99;
    Trainer b(small_dataset(), other);
    CHECK_THROWS_AS(b.load(ss), InputError);
  }

  TEST_CASE("periodic evaluation during the joint phase") {
    TrainConfig c = tiny();
    c.eval_every = 2;
    Trainer t(small_dataset(), c);
    t.run();
    REQUIRE(t.report().evals.size() == 2u);
    CHECK(t.report().evals[0].step == 12);
    CHECK(t.report().evals[1].step == 14);
    CHECK(t.report().evals[0].test.samples == static_cast<int>(small_dataset().test.size()));
  }

  TEST_CASE("config validation") {
    TrainConfig c = tiny();
    c.ratio = 0;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = tiny();
    c.generator_lr = -1;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = tiny();
    c.generator_batch = 0;
    CHECK_THROWS_AS(Trainer(small_dataset(), c), InputError);
  }

  TEST_CASE("report csv has one line per row") {
    Trainer t(small_dataset(), tiny());
    t.run();
    std::ostringstream os;
    write_report_csv(os, t.report());
    const std::string s = os.str();
    CHECK(std::count(s.begin(), s.end(), '\n') == 16);
  }
}
