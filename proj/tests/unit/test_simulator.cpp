#include <doctest.h>

#include "bfctl/pgf_solver.hpp"
#include "bfctl/simulator.hpp"

using namespace bfctl;

TEST_CASE("generator streams") {
  Xoshiro256pp a(42), b(42), c(43);
  CHECK(a.next() == b.next());
  CHECK(a.state() == b.state());
  CHECK(a.state() != c.state());
  Xoshiro256pp j(42);
  j.jump();
  CHECK(j.state() != Xoshiro256pp(42).state());
  for (int k = 0; k < 1000; ++k) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("t interval") {
  const Estimate e = t_interval({1.0, 2.0, 3.0});
  CHECK(e.mean == doctest::Approx(2.0));
  // t(0.975, 2) = 4.302653
  CHECK(e.hi - e.mean == doctest::Approx(4.302653 / std::sqrt(3.0)).epsilon(1e-6));
  CHECK(e.contains(2.0));
}

TEST_CASE("simulation is reproducible and independent of the worker count") {
  const auto model = validate_config(ModelConfig::uniform(2, 4, 4, 1, 0.6, 1.0, 0.39));
  SimOptions o;
  o.cycles = 2000;
  o.runs = 8;
  o.seed = 99;
  o.workers = 1;
  const SimReport a = simulate(model, o);
  o.workers = 3;
  const SimReport b = simulate(model, o);
  REQUIRE(a.per_slot_mean.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(a.per_slot_mean[i].mean == b.per_slot_mean[i].mean);
    CHECK(a.per_slot_mean[i].lo == b.per_slot_mean[i].lo);
    CHECK(a.per_slot_mean[i].lo <= a.per_slot_mean[i].mean);
    CHECK(a.per_slot_mean[i].mean <= a.per_slot_mean[i].hi);
  }
  CHECK(a.overflow_mean.mean == a.per_slot_mean[5].mean);
  o.seed = 100;
  CHECK(simulate(model, o).per_slot_mean[0].mean != a.per_slot_mean[0].mean);
}

TEST_CASE("confidence intervals narrow with more runs") {
  const auto model = validate_config(ModelConfig::uniform(0, 5, 5, 1, 0.0, 0.0, 0.3));
  SimOptions o;
  o.cycles = 1000;
  o.runs = 10;
  const SimReport few = simulate(model, o);
  o.runs = 160;
  const SimReport many = simulate(model, o);
  const double wf = few.overflow_mean.hi - few.overflow_mean.lo;
  const double wm = many.overflow_mean.hi - many.overflow_mean.lo;
  CHECK(wm < wf / 2.0);
}

TEST_CASE("fixed-cycle queue estimates match the exact solution") {
  const auto model = validate_config(ModelConfig::uniform(0, 5, 5, 1, 0.0, 0.0, 0.3));
  const auto s = solve(model);
  SimOptions o;
  o.cycles = 5000;
  o.runs = 40;
  const SimReport rep = simulate(model, o);
  int inside = 0;
  for (int i = 1; i <= 10; ++i) {
    const Estimate& e = rep.per_slot_mean[static_cast<std::size_t>(i - 1)];
    inside += e.contains(slot_mean(s, i));
    CHECK(std::abs(e.mean - slot_mean(s, i)) < 0.05);
  }
  CHECK(inside >= 7);
}

TEST_CASE("degenerate inputs") {
  const auto empty = validate_config(ModelConfig::uniform(2, 3, 3, 1, 0.5, 0.5, 0.0));
  SimOptions o;
  o.cycles = 100;
  o.runs = 2;
  const SimReport rep = simulate(empty, o);
  for (const auto& e : rep.per_slot_mean) {
    CHECK(e.mean == 0.0);
    CHECK(e.lo == 0.0);
    CHECK(e.hi == 0.0);
  }
  o.cycles = 99;
  CHECK_THROWS_AS(simulate(empty, o), Error);
  o.cycles = 100;
  o.runs = 1;
  CHECK_THROWS_AS(simulate(empty, o), Error);
}
