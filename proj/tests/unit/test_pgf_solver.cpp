#include <doctest.h>

#include <cmath>
#include <random>

#include "bfctl/capacity.hpp"
#include "bfctl/pgf_solver.hpp"

using namespace bfctl;

namespace {

SolvedModel solve_uniform(int g1, int g2, int r, int m, double p, double q, double mu) {
  return solve(validate_config(ModelConfig::uniform(g1, g2, r, m, p, q, mu)));
}

}  // namespace

TEST_CASE("per-slot means of the shared-lane reference configuration") {
  // Frozen from the exact solution; the printed three-decimal values match.
  const double p0[] = {1.2973, 0.9257, 0.6569, 0.4652, 0.3294, 0.2334, 0.6234, 1.0134, 1.4034, 1.7934};
  const double p6[] = {3.9011, 4.1484, 3.6101, 3.1260, 2.6985, 2.3253, 2.7153, 3.1053, 3.4953, 3.8853};
  const auto a = solve_uniform(2, 4, 4, 1, 0.0, 1.0, 0.39);
  const auto b = solve_uniform(2, 4, 4, 1, 0.6, 1.0, 0.39);
  for (int i = 1; i <= 10; ++i) {
    CHECK(std::abs(slot_mean(a, i) - p0[i - 1]) < 6e-5);
    CHECK(std::abs(slot_mean(b, i) - p6[i - 1]) < 6e-5);
  }
  const Metrics mb = aggregate_metrics(b);
  double sum = 0.0;
  for (double x : p6) sum += x;
  CHECK(mb.mean_delay == doctest::Approx(sum / 10 / 0.39).epsilon(1e-4));
}

TEST_CASE("multi-lane fixed-cycle queue without blocking") {
  // g = 5, r = 5, Poisson arrivals.
  struct Row {
    int m;
    double mu, mean, var, delay;
  };
  for (const Row& row : {Row{1, 0.2, 0.0217, 0.0384, 2.021}, Row{2, 0.4, 0.00324, -1, 1.778},
                         Row{1, 0.4, 1.097, 4.181, 5.063}, Row{5, 2.0, 0.359, -1, 2.354},
                         Row{1, 0.49, 23.22, 614.8, 49.88}}) {
    const auto s = solve_uniform(0, 5, 5, row.m, 0.0, 0.0, row.mu);
    const Metrics met = aggregate_metrics(s);
    CHECK(met.overflow_mean == doctest::Approx(row.mean).epsilon(2e-3));
    if (row.var > 0) CHECK(met.overflow_variance == doctest::Approx(row.var).epsilon(2e-3));
    CHECK(met.mean_delay == doctest::Approx(row.delay).epsilon(1e-3));
  }
  const auto s = solve_uniform(0, 5, 5, 1, 0.0, 0.0, 0.4);
  const Pmf pmf = queue_pmf(s, 5, 200);
  double tail = 1.0;
  for (int k = 0; k < 10; ++k) tail -= pmf.weights[static_cast<std::size_t>(k)];
  CHECK(tail == doctest::Approx(0.00842).epsilon(2e-3));
}

TEST_CASE("unknown catalogue") {
  const auto model = validate_config(ModelConfig::uniform(2, 3, 1, 2, 1.0, 0.5, 0.3));
  const auto ix = UnknownIndex::of(model);
  CHECK(ix.size() == 2 * 5 + 2);
  std::vector<int> seen(static_cast<std::size_t>(ix.size()), 0);
  for (int i = 1; i <= 2; ++i)
    for (int l = 0; l < 2; ++l) ++seen[static_cast<std::size_t>(ix.unblocked(i, l))];
  for (int i = 1; i <= 2; ++i) ++seen[static_cast<std::size_t>(ix.blocked(i, 1))];
  for (int slot : {3, 4, 6})
    for (int l = 0; l < 2; ++l) ++seen[static_cast<std::size_t>(ix.plain(slot, l))];
  for (int v : seen) CHECK(v == 1);
  CHECK(ix.label(ix.unblocked(1, 0)) == "P(X_1=0,S=u)");
  CHECK(ix.label(ix.plain(6, 1)) == "P(X_6=1)");
}

TEST_CASE("cleared denominator reduces to the closed forms") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (double p : {0.0, 0.35, 0.8, 1.0}) {
    const auto model = validate_config(ModelConfig::uniform(3, 4, 2, 1, p, 1.0, 0.4));
    for (int k = 0; k < 8; ++k) {
      const cplx z = std::polar(std::sqrt(U(rng)), 2 * M_PI * U(rng));
      const cplx Y = std::exp(0.4 * (z - 1.0));
      cplx s = 0.0;
      for (int i = 0; i < 3; ++i) s += std::pow((1.0 - p) / z, i);
      const cplx closed = std::pow(z, 7) - (std::pow(1.0 - p, 3) + p * std::pow(z, 3) * s) * std::pow(Y, 9);
      CHECK(std::abs(denominator(model, z) - closed) < 1e-10);
    }
  }
  const auto fctl = validate_config(ModelConfig::uniform(0, 4, 3, 2, 0.0, 0.0, 0.7));
  const cplx z(0.3, -0.6);
  CHECK(std::abs(denominator(fctl, z) - (std::pow(z, 8) - std::pow(std::exp(0.7 * (z - 1.0)), 7))) < 1e-12);
}

TEST_CASE("root set is certified") {
  const auto model = validate_config(ModelConfig::uniform(2, 3, 2, 2, 1.0, 0.6, 0.6));
  const RootSet rs = find_roots(model);
  int total = 0;
  for (const auto& r : rs.roots) {
    total += r.multiplicity;
    CHECK(std::abs(r.z) <= 1.0 + 1e-6);
    CHECK(std::abs(denominator(model, r.z)) < 1e-8);
  }
  CHECK(total == 10);
  CHECK(rs.winding == 10);
  CHECK_FALSE(rs.fixed_point);

  const auto poisson = validate_config(ModelConfig::uniform(0, 4, 4, 1, 0.0, 0.0, 0.3));
  CHECK(find_roots(poisson).fixed_point);
}

TEST_CASE("linear system shape") {
  const auto model = validate_config(ModelConfig::uniform(2, 3, 2, 1, 0.4, 0.7, 0.3));
  const LinearSystem sys = assemble_system(model, find_roots(model));
  const int n = UnknownIndex::of(model).size();
  CHECK(sys.matrix.rows() == n);
  CHECK(sys.matrix.cols() == n);
  CHECK(std::count(sys.row_kinds.begin(), sys.row_kinds.end(), "normalization") == 1);
}

TEST_CASE("solved distributions are proper") {
  auto cfg = ModelConfig::uniform(3, 2, 3, 1, 0.5, 0.5, 0.3);
  cfg.p = {0.2, 0.9, 0.5};
  cfg.q = {1.0, 0.4, 0.7};
  const auto s = solve(validate_config(cfg));
  CHECK(s.residual() <= 1e-8);
  for (double u : s.unknowns()) {
    CHECK(u >= 0.0);
    CHECK(u <= 1.0);
  }
  InversionInfo info;
  const auto pmfs = queue_pmfs(s, 150, &info);
  CHECK(info.points > 0);
  for (int i = 1; i <= s.model().c(); ++i) {
    const Pmf& pmf = pmfs[static_cast<std::size_t>(i - 1)];
    CHECK(std::abs(pmf.mass() + pmf.tail_eps - 1.0) < 1e-10);
    double mean = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) mean += static_cast<double>(k) * pmf.weights[k];
    CHECK(mean == doctest::Approx(s.moments(i).mean).epsilon(1e-8));
    // z = 1 is a removable singularity; approach it from inside the disk.
    CHECK(std::abs(s.slot_pgf(i, 1.0 - 1e-7) - 1.0) < 1e-5);
    CHECK(s.moments(i).variance >= 0.0);
  }
  const Metrics met = aggregate_metrics(s);
  CHECK(std::abs(met.departures_per_cycle - met.arrivals_per_cycle) < 1e-9);
}

TEST_CASE("blocked state probabilities are reported") {
  const auto s = solve_uniform(2, 4, 4, 1, 0.6, 1.0, 0.39);
  CHECK(s.moments(1).mass_blocked > 0.0);
  CHECK(s.moments(1).mass_unblocked + s.moments(1).mass_blocked == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.moments(3).mass_blocked == 0.0);
}

TEST_CASE("solver errors") {
  try {
    solve_uniform(2, 4, 4, 1, 1.0, 1.0, 0.41);
    FAIL("no error");
  } catch (const UnstableError& e) {
    CHECK(e.code() == ErrorCode::Unstable);
    CHECK(e.r0() == 4.0);
    CHECK(e.load() == doctest::Approx(4.1));
  }
  try {
    solve_uniform(2, 4, 4, 1, 1.0, 1.0, 0.39999);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NearCritical);
  }
}

TEST_CASE("no arrivals") {
  const auto s = solve_uniform(2, 3, 3, 2, 1.0, 0.5, 0.0);
  for (int i = 1; i <= 8; ++i) {
    CHECK(s.moments(i).mean == 0.0);
    CHECK(queue_pmf(s, i, 10).weights[0] == doctest::Approx(1.0));
  }
  const Metrics met = aggregate_metrics(s);
  CHECK_FALSE(met.delay_defined);
  CHECK_THROWS_AS(aggregate_metrics(s, true), Error);
}

TEST_CASE("other arrival laws") {
  auto cfg = ModelConfig::uniform(2, 3, 3, 1, 0.5, 0.8, 0.2);
  for (std::size_t i = 0; i < cfg.arrivals.size(); ++i)
    cfg.arrivals[i] = i % 2 ? ArrivalSpec::geometric(0.25) : ArrivalSpec::explicit_pmf({0.7, 0.2, 0.1});
  const auto s = solve(validate_config(cfg));
  const Metrics met = aggregate_metrics(s);
  CHECK(std::abs(met.departures_per_cycle - met.arrivals_per_cycle) < 1e-9);
}
