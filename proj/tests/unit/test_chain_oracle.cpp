#include <doctest.h>

#include "bfctl/chain_oracle.hpp"
#include "bfctl/pgf_solver.hpp"

using namespace bfctl;

TEST_CASE("one-cycle kernel is stochastic") {
  const auto model = validate_config(ModelConfig::uniform(2, 4, 4, 1, 0.6, 1.0, 0.39));
  const Eigen::MatrixXd P = one_cycle_kernel(model, 80);
  CHECK(P.rows() == 81);
  CHECK((P.array() >= 0.0).all());
  for (int x = 0; x < 40; ++x) CHECK(P.row(x).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("oracle agrees with the transform solution") {
  auto cfg = ModelConfig::uniform(3, 2, 3, 2, 1.0, 0.5, 0.5);
  cfg.q = {0.9, 0.2, 0.6};
  const auto model = validate_config(cfg);
  const OracleResult o = stationary(model);
  const auto s = solve(model);
  const auto pmfs = queue_pmfs(s, 200);
  double sup = 0.0;
  for (int i = 0; i < model.c(); ++i)
    for (int x = 0; x <= 200; ++x)
      sup = std::max(sup, std::abs(pmfs[static_cast<std::size_t>(i)].at(static_cast<std::size_t>(x)) -
                                   o.slot_pmfs[static_cast<std::size_t>(i)].at(static_cast<std::size_t>(x))));
  CHECK(sup < 1e-9);
  CHECK(o.departures_per_cycle == doctest::Approx(o.arrivals_per_cycle).epsilon(1e-9));
  CHECK(o.tv_change < 1e-12);
  CHECK(o.truncation_mass < 1e-12);
}

TEST_CASE("oracle preconditions") {
  const auto model = validate_config(ModelConfig::uniform(2, 4, 4, 1, 0.6, 1.0, 0.39));
  try {
    stationary(model, {20, 1e-12});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PreconditionUnmet);
  }
  const auto unstable = validate_config(ModelConfig::uniform(2, 4, 4, 1, 1.0, 1.0, 0.5));
  CHECK_THROWS_AS(stationary(unstable), UnstableError);
}
