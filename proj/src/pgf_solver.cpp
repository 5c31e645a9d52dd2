#include "bfctl/pgf_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "bfctl/capacity.hpp"

namespace bfctl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kUnitRadius = 1.0 + 1e-6;

int overflow_power(const ValidatedModel& model) { return model.m() * (model.g1() + model.g2()); }

bool all_of(const std::vector<double>& v, double x) {
  return std::all_of(v.begin(), v.end(), [x](double y) { return y == x; });
}

/// Fixed-point fast path for models whose cleared denominator factors as
/// z^k (z^M' - exp(lambda (z - 1))): no blocking (p = 0), or certain and
/// permanent blocking (p = q = 1), with Poisson arrivals. Each M'-th root of
/// unity w seeds z <- w exp(lambda (z - 1) / M'), which contracts for stable
/// models; results are polished on the full denominator.
std::optional<std::vector<RootCluster>> fixed_point_roots(const ValidatedModel& model, const AnalyticFunction& f) {
  const auto& cfg = model.config();
  for (const auto& a : cfg.arrivals)
    if (!std::holds_alternative<PoissonArrivals>(a.kind)) return std::nullopt;
  const bool unblocked = all_of(cfg.p, 0.0);
  const bool blocked = model.g1() > 0 && all_of(cfg.p, 1.0) && all_of(cfg.q, 1.0);
  if (!unblocked && !blocked) return std::nullopt;

  const int zero_mult = unblocked ? 0 : model.m() * model.g1();
  const int mp = overflow_power(model) - zero_mult;
  double lambda = 0.0;
  for (int i = 1; i <= model.c(); ++i) lambda += model.mean_arrivals(i);

  std::vector<RootCluster> out;
  for (int j = 0; j < mp; ++j) {
    const cplx w = std::polar(1.0, kTwoPi * j / mp);
    cplx z = w;
    for (int it = 0; it < 20000; ++it) {
      const cplx next = w * std::exp(lambda * (z - 1.0) / static_cast<double>(mp));
      const bool done = std::abs(next - z) < 1e-15;
      z = next;
      if (done) break;
    }
    if (!newton_refine(f, z)) return std::nullopt;
    if (std::abs(z) > 1.0 + 1e-9) return std::nullopt;
    out.push_back({z, 1});
  }
  for (std::size_t a = 0; a < out.size(); ++a)
    for (std::size_t b = a + 1; b < out.size(); ++b)
      if (std::abs(out[a].z - out[b].z) < 1e-8) return std::nullopt;
  if (zero_mult > 0) out.push_back({0.0, zero_mult});
  return out;
}

/// Taylor coefficients 0..count-1 of every entry of B'(z) around z0, by the
/// trapezoidal Cauchy integral on a small circle (B' is analytic there).
std::vector<std::vector<cplx>> numerator_taylor(const ValidatedModel& model, const UnknownIndex& ix, cplx z0,
                                                int count) {
  const int g = model.g1() + model.g2();
  const std::size_t K = static_cast<std::size_t>(ix.size());
  std::vector<std::vector<cplx>> out(static_cast<std::size_t>(count), std::vector<cplx>(K));
  if (count == 1) {
    const auto forms = propagate_slots<0>(model, ix, Jet<0>(z0));
    const auto f = forms[static_cast<std::size_t>(g)].total();
    for (std::size_t j = 0; j < K; ++j) out[0][j] = f.coeffs[j].value();
    return out;
  }
  const double radius = std::abs(z0) < 0.5 ? 0.25 : 0.05;
  const int n = 128;
  for (int s = 0; s < n; ++s) {
    const cplx w = std::polar(1.0, kTwoPi * s / n);
    const auto forms = propagate_slots<0>(model, ix, Jet<0>(z0 + radius * w));
    const auto f = forms[static_cast<std::size_t>(g)].total();
    for (int k = 0; k < count; ++k) {
      const cplx scale = std::pow(radius * w, -k) / static_cast<double>(n);
      for (std::size_t j = 0; j < K; ++j) out[static_cast<std::size_t>(k)][j] += f.coeffs[j].value() * scale;
    }
  }
  return out;
}

}  // namespace

UnknownIndex UnknownIndex::of(const ValidatedModel& model) { return {model.g1(), model.g2(), model.c(), model.m()}; }

int UnknownIndex::plain(int slot, int l) const {
  const int j = slot == c ? g2 - 1 : slot - g1 - 1;
  return g1 * m + g1 * (m - 1) + j * m + l;
}

std::string UnknownIndex::label(int k) const {
  const auto P = [](int i, int l, const char* s) {
    return "P(X_" + std::to_string(i) + "=" + std::to_string(l) + s + ")";
  };
  if (k < g1 * m) return P(k / m + 1, k % m, ",S=u");
  k -= g1 * m;
  if (k < g1 * (m - 1)) return P(k / (m - 1) + 1, k % (m - 1) + 1, ",S=b");
  k -= g1 * (m - 1);
  const int j = k / m;
  return P(j == g2 - 1 ? c : g1 + 1 + j, k % m, "");
}

template <int N>
std::vector<SlotForm<N>> propagate_slots(const ValidatedModel& model, const UnknownIndex& ix, const Jet<N>& z,
                                         bool track_unknowns) {
  const int g1 = model.g1(), g2 = model.g2(), c = model.c(), m = model.m();
  const int K = track_unknowns ? ix.size() : 0;
  const int top = m * (g1 + g2);
  std::vector<Jet<N>> zp(static_cast<std::size_t>(top + 1));
  zp[0] = Jet<N>(1.0);
  for (int k = 1; k <= top; ++k) zp[static_cast<std::size_t>(k)] = zp[static_cast<std::size_t>(k - 1)] * z;
  const auto zpow = [&](int k) -> const Jet<N>& { return zp[static_cast<std::size_t>(k)]; };

  std::vector<SlotForm<N>> out(static_cast<std::size_t>(c + 1));
  for (auto& s : out) s.unblocked = s.blocked = LinearForm<N>(K);

  // X_c = X_{g1+g2} times the red-period arrivals.
  LinearForm<N> prev_u(K), prev_b(K);
  prev_u.self = Jet<N>(1.0);
  for (int i = g1 + g2 + 1; i <= c; ++i) prev_u.self = prev_u.self * model.arrival_pgf(i)(z);
  // Scaled forms F_i = z^{m i} X_i keep every term polynomial in z.
  const auto prev_u_index = [&](int i, int l) { return i == 1 ? ix.plain(c, l) : ix.unblocked(i - 1, l); };

  for (int i = 1; i <= g1; ++i) {
    const Jet<N> Y = model.arrival_pgf(i)(z);
    const Transform& blocked_law = model.blocked_pgf(i);
    const Jet<N> Yb = blocked_law(z);
    const double Yb0 = std::real(blocked_law(cplx{0.0}));
    const double p = model.p(i), q = model.q(i), pq = p * q;
    const Jet<N>& zi = zpow(m * i);

    SlotForm<N>& s = out[static_cast<std::size_t>(i)];
    s.power = m * i;
    s.blocked = (prev_u * pq + prev_b * q) * (zpow(m) * Y);
    s.unblocked = (prev_u * (1.0 - pq) + prev_b * (1.0 - q)) * Y;
    if (track_unknowns) {
      s.blocked.add(prev_u_index(i, 0), zi * (Yb - Jet<N>(Yb0) - Y * p) * q);
      for (int l = 1; l < m; ++l) {
        const Jet<N> T = zi - Y * zpow(m * (i - 1) + l);
        s.unblocked.add(prev_u_index(i, l), T * (1.0 - pq));
        if (i > 1) s.unblocked.add(ix.blocked(i - 1, l), T * (1.0 - q));
      }
      s.unblocked.add(prev_u_index(i, 0), zi * (1.0 - q + q * Yb0) - Y * zpow(m * (i - 1)) * (1.0 - pq));
    }
    prev_u = s.unblocked;
    prev_b = s.blocked;
  }

  for (int i = g1 + 1; i <= g1 + g2; ++i) {
    const Jet<N> Y = model.arrival_pgf(i)(z);
    const Jet<N>& zi = zpow(m * i);
    SlotForm<N>& s = out[static_cast<std::size_t>(i)];
    s.power = m * i;
    s.unblocked = (prev_u + prev_b) * Y;
    if (track_unknowns) {
      for (int l = 0; l < m; ++l) {
        const Jet<N> T = zi - Y * zpow(m * (i - 1) + l);
        if (i > g1 + 1) {
          s.unblocked.add(ix.plain(i - 1, l), T);
        } else if (g1 == 0) {
          s.unblocked.add(ix.plain(c, l), T);
        } else {
          s.unblocked.add(ix.unblocked(g1, l), T);
          if (l >= 1) s.unblocked.add(ix.blocked(g1, l), T);
        }
      }
    }
    prev_u = s.unblocked;
    prev_b = LinearForm<N>(K);
  }

  Jet<N> red(1.0);
  for (int i = g1 + g2 + 1; i <= c; ++i) {
    red = red * model.arrival_pgf(i)(z);
    out[static_cast<std::size_t>(i)].unblocked.self = red;
  }
  return out;
}

template std::vector<SlotForm<0>> propagate_slots(const ValidatedModel&, const UnknownIndex&, const Jet<0>&, bool);
template std::vector<SlotForm<1>> propagate_slots(const ValidatedModel&, const UnknownIndex&, const Jet<1>&, bool);
template std::vector<SlotForm<2>> propagate_slots(const ValidatedModel&, const UnknownIndex&, const Jet<2>&, bool);
template std::vector<SlotForm<3>> propagate_slots(const ValidatedModel&, const UnknownIndex&, const Jet<3>&, bool);

CycleMap propagate_cycle(const ValidatedModel& model, cplx z) {
  if (z == cplx{}) throw Error(ErrorCode::EvalDomain, "the cycle map divides by powers of z; z = 0 is excluded");
  const auto ix = UnknownIndex::of(model);
  const auto forms = propagate_slots<0>(model, ix, Jet<0>(z));
  const auto f = forms[static_cast<std::size_t>(model.g1() + model.g2())].total();
  const cplx scale = std::pow(z, -overflow_power(model));
  CycleMap out{f.self.value() * scale, {}};
  for (const auto& b : f.coeffs) out.B.push_back(b.value() * scale);
  return out;
}

Jet<1> denominator_jet(const ValidatedModel& model, cplx z) {
  const auto ix = UnknownIndex::of(model);
  const Jet<1> zj = Jet<1>::variable(z);
  const auto forms = propagate_slots<1>(model, ix, zj, false);
  const auto& f = forms[static_cast<std::size_t>(model.g1() + model.g2())];
  return pow(zj, overflow_power(model)) - (f.unblocked.self + f.blocked.self);
}

cplx denominator(const ValidatedModel& model, cplx z) { return denominator_jet(model, z).value(); }

RootSet find_roots(const ValidatedModel& model) {
  const CapacityReport cap = check_stability(model);
  if (!cap.stable) throw UnstableError(cap.r0, cap.arrival_load);

  const int M = overflow_power(model);
  const AnalyticFunction f = [&model](cplx z) { return denominator_jet(model, z); };
  RootSet rs;
  rs.winding = winding_number(f, 0.0, kUnitRadius, &rs.evaluations);
  if (rs.winding != M)
    throw Error(ErrorCode::RootCountMismatch, "winding number " + std::to_string(rs.winding) + " differs from " +
                                                  std::to_string(M));

  if (auto fp = fixed_point_roots(model, f)) {
    rs.roots = std::move(*fp);
    rs.fixed_point = true;
  } else {
    RootSearchStats stats;
    rs.roots = find_roots_in_disk(f, kUnitRadius, M, {}, &stats);
    rs.evaluations += stats.evaluations;
  }

  int near_one = 0;
  for (auto& r : rs.roots) {
    if (std::abs(r.z - 1.0) < 1e-7) {
      near_one += r.multiplicity;
      r.z = 1.0;
    }
  }
  if (near_one != 1)
    throw Error(ErrorCode::NearCritical, "denominator zeros cluster at z = 1; the model is too close to saturation");
  std::sort(rs.roots.begin(), rs.roots.end(), [](const RootCluster& a, const RootCluster& b) {
    if (a.z.real() != b.z.real()) return a.z.real() < b.z.real();
    return a.z.imag() < b.z.imag();
  });
  return rs;
}

LinearSystem assemble_system(const ValidatedModel& model, const RootSet& roots) {
  const UnknownIndex ix = UnknownIndex::of(model);
  const int K = ix.size();
  const int M = overflow_power(model);
  const int g1 = model.g1(), m = model.m(), c = model.c();
  LinearSystem sys;
  sys.matrix = Eigen::MatrixXd::Zero(K, K);
  sys.rhs = Eigen::VectorXd::Zero(K);
  int row = 0;
  const auto push = [&](const std::string& kind) {
    if (row >= K) throw Error(ErrorCode::RootCountMismatch, "more equations than unknowns");
    sys.row_kinds.push_back(kind);
    return row++;
  };

  // The numerator must vanish wherever the denominator does. Conjugate pairs
  // contribute the real and imaginary parts of one complex equation.
  // A slot with certain blocking (p_i q_i = 1) multiplies everything
  // downstream by z^m, so z = 0 is then a common zero of numerator and
  // denominator and carries no information. Its equations come instead from
  // the unblocked state of such a slot, which is reachable only from an empty
  // queue without turning arrivals: P(X_i=0,u) = Y_{i,b}(0) P(X_{i-1}=0,u),
  // P(X_i=l,u) = 0 for l = 1..m-1.
  int structural = 0;
  for (int i = 1; i <= g1; ++i) {
    if (model.p(i) * model.q(i) != 1.0) continue;
    structural += m;
    const int prev0 = i == 1 ? ix.plain(c, 0) : ix.unblocked(i - 1, 0);
    int r = push("structural");
    sys.matrix(r, ix.unblocked(i, 0)) = 1.0;
    sys.matrix(r, prev0) -= model.blocked_pmf(i).at(0);
    for (int l = 1; l < m; ++l) {
      r = push("structural");
      sys.matrix(r, ix.unblocked(i, l)) = 1.0;
    }
  }

  for (const auto& r : roots.roots) {
    if (r.z == cplx(1.0)) continue;
    if (std::abs(r.z) < 1e-9 && structural > 0) {
      if (r.multiplicity < structural)
        throw Error(ErrorCode::RootCountMismatch, "fewer zeros at the origin than blocking slots imply");
      const auto taylor = numerator_taylor(model, ix, 0.0, r.multiplicity);
      for (int k = structural; k < r.multiplicity; ++k) {
        const int i = push("root");
        for (int j = 0; j < K; ++j) sys.matrix(i, j) = taylor[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)].real();
      }
      continue;
    }
    const bool real = std::abs(r.z.imag()) <= 1e-9 * std::max(1.0, std::abs(r.z));
    if (!real && r.z.imag() < 0.0) continue;
    const auto taylor = numerator_taylor(model, ix, real ? cplx(r.z.real()) : r.z, r.multiplicity);
    for (const auto& coeffs : taylor) {
      int i = push("root");
      for (int j = 0; j < K; ++j) sys.matrix(i, j) = coeffs[static_cast<std::size_t>(j)].real();
      if (real) continue;
      i = push("root");
      for (int j = 0; j < K; ++j) sys.matrix(i, j) = coeffs[static_cast<std::size_t>(j)].imag();
    }
  }
  if (row != M - 1)
    throw Error(ErrorCode::RootCountMismatch, "root equations do not pair up into " + std::to_string(M - 1) + " rows");

  // X_{g1+g2}(1) = 1: N'(1) . c = D'(1), both N and D vanishing at 1.
  {
    const auto forms = propagate_slots<1>(model, ix, Jet<1>::variable(1.0));
    const auto f = forms[static_cast<std::size_t>(model.g1() + model.g2())].total();
    const double dprime = M - f.self.c[1].real();
    if (std::abs(dprime) < 1e-10)
      throw Error(ErrorCode::NearCritical, "denominator has a repeated zero at z = 1");
    const int i = push("normalization");
    for (int j = 0; j < K; ++j) sys.matrix(i, j) = f.coeffs[static_cast<std::size_t>(j)].c[1].real();
    sys.rhs(i) = dprime;
  }

  // Small blocked queues: P(X_i = k, S = b) for k = 1..m-1.
  for (int i = 1; i <= g1; ++i) {
    const double p = model.p(i), q = model.q(i);
    const Pmf& Y = model.arrival_pmf(i);
    const Pmf& Yb = model.blocked_pmf(i);
    const int prev0 = i == 1 ? ix.plain(c, 0) : ix.unblocked(i - 1, 0);
    for (int k = 1; k < m; ++k) {
      const int r = push("boundary");
      sys.matrix(r, ix.blocked(i, k)) += 1.0;
      for (int l = 1; l <= k; ++l) {
        const double y = Y.at(static_cast<std::size_t>(k - l));
        if (i == 1) {
          sys.matrix(r, ix.plain(c, l)) -= p * q * y;
        } else {
          sys.matrix(r, ix.unblocked(i - 1, l)) -= p * q * y;
          sys.matrix(r, ix.blocked(i - 1, l)) -= q * y;
        }
      }
      sys.matrix(r, prev0) -= q * Yb.at(static_cast<std::size_t>(k));
    }
  }
  if (row != K) throw Error(ErrorCode::SingularSystem, "equation count does not match the unknown count");
  return sys;
}

SolvedModel::SolvedModel(ValidatedModel model, RootSet roots, std::vector<double> unknowns, double residual,
                         double condition)
    : model_(std::move(model)),
      index_(UnknownIndex::of(model_)),
      roots_(std::move(roots)),
      unknowns_(std::move(unknowns)),
      residual_(residual),
      condition_(condition) {
  const int g = model_.g1() + model_.g2();
  const int M = overflow_power(model_);
  const Jet<3> z3 = Jet<3>::variable(1.0);
  const auto forms = propagate_slots<3>(model_, index_, z3);
  const auto overflow = forms[static_cast<std::size_t>(g)].total();
  const Jet<3> D = pow(z3, M) - overflow.self;
  const Jet<3> N = overflow.apply(unknowns_);
  if (std::abs(D.c[1]) < 1e-10) throw Error(ErrorCode::NearCritical, "denominator has a repeated zero at z = 1");
  // S = N / D around z = 1 after cancelling the common simple zero.
  const Jet<2> S = shift_down(N) / shift_down(D);
  const Jet<2> z2 = Jet<2>::variable(1.0);

  const auto eval = [&](const LinearForm<3>& f, int power) {
    return (truncate<2>(f.self) * S + truncate<2>(f.apply(unknowns_))) / pow(z2, power);
  };
  for (int i = 1; i <= model_.c(); ++i) {
    const auto& f = forms[static_cast<std::size_t>(i)];
    const Jet<2> u = eval(f.unblocked, f.power);
    const Jet<2> b = eval(f.blocked, f.power);
    const Jet<2> x = u + b;
    SlotMoments mo;
    mo.mass_unblocked = u.c[0].real();
    mo.mass_blocked = b.c[0].real();
    mo.mean_unblocked = u.c[1].real();
    mo.mean_blocked = b.c[1].real();
    mo.mean = x.c[1].real();
    mo.variance = 2.0 * x.c[2].real() + mo.mean - mo.mean * mo.mean;
    if (std::abs(x.c[0] - 1.0) > 1e-8)
      throw Error(ErrorCode::NormalizationFailure,
                  "X_" + std::to_string(i) + "(1) = " + std::to_string(x.c[0].real()) + " differs from 1");
    moments_.push_back(mo);
  }
}

std::vector<cplx> SolvedModel::all_slot_pgfs(cplx z) const {
  const int g = model_.g1() + model_.g2();
  const auto forms = propagate_slots<0>(model_, index_, Jet<0>(z));
  const auto overflow = forms[static_cast<std::size_t>(g)].total();
  const cplx D = std::pow(z, overflow_power(model_)) - overflow.self.value();
  const cplx S = overflow.apply(unknowns_).value() / D;
  std::vector<cplx> out;
  for (int i = 1; i <= model_.c(); ++i) {
    const auto f = forms[static_cast<std::size_t>(i)].total();
    out.push_back((f.self.value() * S + f.apply(unknowns_).value()) /
                  std::pow(z, forms[static_cast<std::size_t>(i)].power));
  }
  return out;
}

cplx SolvedModel::slot_pgf(int slot, cplx z) const { return all_slot_pgfs(z)[static_cast<std::size_t>(slot - 1)]; }

SolvedModel solve(const ValidatedModel& model, const SolveOptions& opts) {
  const CapacityReport cap = check_stability(model);
  if (!cap.stable) throw UnstableError(cap.r0, cap.arrival_load);
  if (cap.rho > opts.max_rho)
    throw Error(ErrorCode::NearCritical, "load ratio " + std::to_string(cap.rho) + " exceeds " +
                                             std::to_string(opts.max_rho));
  const UnknownIndex ix = UnknownIndex::of(model);
  const int K = ix.size();

  if (cap.arrival_load == 0.0) {
    // No arrivals: the queue is empty at every slot end.
    std::vector<double> c(static_cast<std::size_t>(K), 0.0);
    for (int i = 1; i <= model.g1(); ++i) c[static_cast<std::size_t>(ix.unblocked(i, 0))] = 1.0;
    for (int i = model.g1() + 1; i < model.g1() + model.g2(); ++i) c[static_cast<std::size_t>(ix.plain(i, 0))] = 1.0;
    c[static_cast<std::size_t>(ix.plain(model.c(), 0))] = 1.0;
    return SolvedModel(model, RootSet{}, std::move(c), 0.0, 1.0);
  }

  RootSet roots = find_roots(model);
  LinearSystem sys = assemble_system(model, roots);
  for (int i = 0; i < K; ++i) {
    const double s = sys.matrix.row(i).cwiseAbs().maxCoeff();
    if (s == 0.0) throw Error(ErrorCode::SingularSystem, "empty equation row");
    sys.matrix.row(i) /= s;
    sys.rhs(i) /= s;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.matrix);
  const auto& sv = svd.singularValues();
  const double condition = sv(0) / sv(sv.size() - 1);
  if (!(condition <= 1e12))
    throw Error(ErrorCode::SingularSystem, "boundary system condition estimate " + std::to_string(condition));
  const Eigen::VectorXd x = sys.matrix.colPivHouseholderQr().solve(sys.rhs);
  const double residual = (sys.matrix * x - sys.rhs).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-8))
    throw Error(ErrorCode::SingularSystem, "boundary system residual " + std::to_string(residual));

  std::vector<double> c(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const double v = x(k);
    if (!(v >= -1e-6 && v <= 1.0 + 1e-6))
      throw Error(ErrorCode::UnknownOutOfRange, ix.label(k) + " = " + std::to_string(v));
    c[static_cast<std::size_t>(k)] = std::clamp(v, 0.0, 1.0);
  }
  return SolvedModel(model, std::move(roots), std::move(c), residual, condition);
}

double slot_mean(const SolvedModel& solved, int slot) { return solved.moments(slot).mean; }

std::vector<Pmf> queue_pmfs(const SolvedModel& solved, int n_max, InversionInfo* info) {
  if (n_max < 1) throw Error(ErrorCode::InvalidParameter, "n_max must be at least 1");
  const int c = solved.model().c();
  const std::size_t n_out = static_cast<std::size_t>(n_max + 1);
  if (solved.roots().roots.empty()) {
    std::vector<double> w(n_out, 0.0);
    w[0] = 1.0;
    if (info) *info = {0.0, 0, 0.0};
    return std::vector<Pmf>(static_cast<std::size_t>(c), Pmf{w, 0.0});
  }

  const int points = 4 * (n_max + 1);
  double rho = std::pow(10.0, -8.0 / (2.0 * (n_max + 1)));
  // X_{g1+g2} is evaluated as N/D, so stay clear of the denominator zeros.
  for (int attempt = 0; attempt < 100; ++attempt) {
    const bool clash = std::any_of(solved.roots().roots.begin(), solved.roots().roots.end(),
                                   [rho](const RootCluster& r) { return std::abs(std::abs(r.z) - rho) < 0.01; });
    if (!clash) break;
    rho -= 0.005;
  }
  const double rn = std::pow(rho, points);
  const double bound = rn / (1.0 - rn);
  if (!(rho > 0.0) || bound > 1e-8) throw Error(ErrorCode::InversionUnstable, "aliasing bound too large");
  if (info) *info = {rho, points, bound};

  // Real coefficients: X(conj z) = conj X(z), so half the circle suffices.
  const int half = points / 2;
  std::vector<std::vector<cplx>> values;
  for (int k = 0; k <= half; ++k) values.push_back(solved.all_slot_pgfs(std::polar(rho, kTwoPi * k / points)));

  std::vector<Pmf> out;
  for (int i = 0; i < c; ++i) {
    Pmf pmf;
    double total = 0.0;
    for (int n = 0; n <= n_max; ++n) {
      double acc = 0.0;
      for (int k = 0; k <= half; ++k) {
        const double weight = (k == 0 || k == half) ? 1.0 : 2.0;
        acc += weight * (values[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] *
                         std::polar(1.0, -kTwoPi * k * n / points))
                            .real();
      }
      double a = acc / (points * std::pow(rho, n));
      if (a < 0.0) {
        if (a < -1e-9)
          throw Error(ErrorCode::InversionUnstable, "negative probability " + std::to_string(a) + " after inversion");
        a = 0.0;
      }
      pmf.weights.push_back(a);
      total += a;
    }
    pmf.tail_eps = std::max(0.0, 1.0 - total);
    out.push_back(std::move(pmf));
  }
  return out;
}

Pmf queue_pmf(const SolvedModel& solved, int slot, int n_max, InversionInfo* info) {
  if (slot < 1 || slot > solved.model().c()) throw Error(ErrorCode::InvalidParameter, "slot out of range");
  return queue_pmfs(solved, n_max, info)[static_cast<std::size_t>(slot - 1)];
}

double departures_per_cycle(const SolvedModel& solved) {
  const ValidatedModel& model = solved.model();
  const UnknownIndex& ix = solved.index();
  const auto& c = solved.unknowns();
  const int g1 = model.g1(), g2 = model.g2(), m = model.m(), cyc = model.c();
  const auto at = [&](int k) { return c[static_cast<std::size_t>(k)]; };

  // Expected departures when up to m vehicles are served from a queue whose
  // small-state probabilities are small[0..m-1] and total mass `mass`; under
  // the clearing rule a queue below m also carries off the slot's arrivals.
  const auto served = [m](double mass, const std::vector<double>& small, double ey, int from) {
    double below = 0.0, dep = 0.0;
    for (int l = from; l < m; ++l) {
      below += small[static_cast<std::size_t>(l)];
      dep += (l + ey) * small[static_cast<std::size_t>(l)];
    }
    return dep + m * (mass - below);
  };

  double total = 0.0;
  for (int i = 1; i <= g1; ++i) {
    const double p = model.p(i), q = model.q(i);
    const double ey = model.mean_arrivals(i);
    const double eyb = model.blocked_pgf(i).mean();
    std::vector<double> pu(static_cast<std::size_t>(m)), pb(static_cast<std::size_t>(m), 0.0);
    for (int l = 0; l < m; ++l) pu[static_cast<std::size_t>(l)] = at(i == 1 ? ix.plain(cyc, l) : ix.unblocked(i - 1, l));
    if (i > 1)
      for (int l = 1; l < m; ++l) pb[static_cast<std::size_t>(l)] = at(ix.blocked(i - 1, l));
    const double mass_u = i == 1 ? 1.0 : solved.moments(i - 1).mass_unblocked;
    const double mass_b = i == 1 ? 0.0 : solved.moments(i - 1).mass_blocked;
    total += (1.0 - p * q) * served(mass_u - pu[0], pu, ey, 1);
    total += pu[0] * (ey - q * eyb);
    total += (1.0 - q) * served(mass_b, pb, ey, 1);
  }
  for (int i = g1 + 1; i <= g1 + g2; ++i) {
    const double ey = model.mean_arrivals(i);
    std::vector<double> prev(static_cast<std::size_t>(m));
    for (int l = 0; l < m; ++l) {
      double v;
      if (i > g1 + 1) v = at(ix.plain(i - 1, l));
      else if (g1 == 0) v = at(ix.plain(cyc, l));
      else v = at(ix.unblocked(g1, l)) + (l >= 1 ? at(ix.blocked(g1, l)) : 0.0);
      prev[static_cast<std::size_t>(l)] = v;
    }
    total += served(1.0, prev, ey, 0);
  }
  return total;
}

Metrics aggregate_metrics(const SolvedModel& solved, bool strict) {
  const ValidatedModel& model = solved.model();
  const int c = model.c();
  Metrics out;
  double queue = 0.0;
  for (int i = 1; i <= c; ++i) {
    queue += solved.moments(i).mean;
    out.arrivals_per_cycle += model.mean_arrivals(i);
  }
  out.mean_queue = queue / c;
  if (out.arrivals_per_cycle > 0.0) {
    // Little's law with the cycle-averaged arrival rate.
    out.mean_delay = out.mean_queue / (out.arrivals_per_cycle / c);
  } else {
    if (strict) throw Error(ErrorCode::ZeroArrivalDelay, "mean delay is undefined without arrivals");
    out.delay_defined = false;
  }
  const auto& overflow = solved.moments(model.g1() + model.g2());
  out.overflow_mean = overflow.mean;
  out.overflow_variance = overflow.variance;
  out.departures_per_cycle = departures_per_cycle(solved);
  return out;
}

}  // namespace bfctl
