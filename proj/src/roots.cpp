#include "bfctl/roots.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "bfctl/errors.hpp"

namespace bfctl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Sample {
  double t;
  cplx z;
  Jet<1> f;
};

class Counter {
 public:
  Counter(const AnalyticFunction& f, long budget) : f_(f), budget_(budget) {}

  Jet<1> operator()(cplx z) {
    if (++evaluations_ > budget_) throw Error(ErrorCode::RootCountMismatch, "root search exceeded evaluation budget");
    return f_(z);
  }
  long evaluations() const { return evaluations_; }

 private:
  const AnalyticFunction& f_;
  long budget_;
  long evaluations_ = 0;
};

/// Change of arg f along a parametrized edge z(t), t in [0, 1]. Steps are
/// refined until both the phase increment and the first-order relative change
/// |f' dz / f| are small at each end.
template <class Path>
double arg_change(Counter& f, const Path& path, int initial_pieces) {
  auto sample = [&](double t) {
    const cplx z = path(t);
    const Jet<1> v = f(z);
    if (v.value() == cplx{} || !std::isfinite(std::abs(v.value())))
      throw Error(ErrorCode::BoundaryRoot, "zero on contour");
    return Sample{t, z, v};
  };
  std::vector<std::pair<Sample, Sample>> stack;
  Sample prev = sample(0.0);
  for (int k = 1; k <= initial_pieces; ++k) {
    Sample next = sample(static_cast<double>(k) / initial_pieces);
    stack.emplace_back(prev, next);
    prev = next;
  }
  double total = 0.0;
  while (!stack.empty()) {
    auto [a, b] = stack.back();
    stack.pop_back();
    const cplx dz = b.z - a.z;
    const double darg = std::arg(b.f.value() / a.f.value());
    const double ra = std::abs(a.f.c[1] * dz / a.f.value());
    const double rb = std::abs(b.f.c[1] * dz / b.f.value());
    if (std::abs(darg) < 0.6 && ra < 0.6 && rb < 0.6) {
      total += darg;
      continue;
    }
    if (b.t - a.t < 1e-13) throw Error(ErrorCode::BoundaryRoot, "zero on contour");
    Sample mid = sample(0.5 * (a.t + b.t));
    stack.emplace_back(a, mid);
    stack.emplace_back(mid, b);
  }
  return total;
}

double arc_change(Counter& f, cplx center, double radius, double t0, double t1) {
  const int pieces = std::max(8, static_cast<int>(std::ceil(std::abs(t1 - t0) / (std::numbers::pi / 32))));
  return arg_change(f, [&](double s) { return center + std::polar(radius, t0 + (t1 - t0) * s); }, pieces);
}

double segment_change(Counter& f, cplx a, cplx b) {
  return arg_change(f, [&](double s) { return a + (b - a) * s; }, 8);
}

int to_count(double total_arg) {
  const double w = total_arg / kTwoPi;
  const double n = std::round(w);
  if (std::abs(w - n) > 0.2 || n < 0) throw Error(ErrorCode::BoundaryRoot, "non-integer winding");
  return static_cast<int>(n);
}

/// Annular sector {r0 <= |z| <= r1, t0 <= arg z <= t1}; r0 == 0 with a full
/// turn is a disk centred at the origin.
struct Region {
  double r0, r1, t0, t1;
  int count = 0;

  bool disk() const { return r0 == 0.0; }
  double diameter() const {
    if (disk()) return 2.0 * r1;
    return std::max(r1 - r0, r1 * std::min(t1 - t0, std::numbers::pi));
  }
  cplx center() const {
    if (disk()) return 0.0;
    return std::polar(0.5 * (r0 + r1), 0.5 * (t0 + t1));
  }
  bool contains(cplx z, double slack) const {
    const double r = std::abs(z);
    if (disk()) return r <= r1 + slack;
    if (r < r0 - slack || r > r1 + slack) return false;
    double t = std::arg(z);
    while (t < t0 - 1e-12) t += kTwoPi;
    while (t > t0 + kTwoPi) t -= kTwoPi;
    const double angular_slack = slack / std::max(r, 1e-300);
    return t >= t0 - angular_slack && t <= t1 + angular_slack;
  }
};

int count_in(Counter& f, const Region& reg) {
  if (reg.disk()) return to_count(arc_change(f, 0.0, reg.r1, reg.t0, reg.t0 + kTwoPi));
  double total = arc_change(f, 0.0, reg.r1, reg.t0, reg.t1);
  total += segment_change(f, std::polar(reg.r1, reg.t1), std::polar(reg.r0, reg.t1));
  total += arc_change(f, 0.0, reg.r0, reg.t1, reg.t0);
  total += segment_change(f, std::polar(reg.r0, reg.t0), std::polar(reg.r1, reg.t0));
  return to_count(total);
}

// Split fractions are kept away from 1/2 and from one another so that
// symmetric root configurations (real roots, roots of unity) do not land on
// the new edges.
constexpr double kJitter[] = {0.4871, 0.5213, 0.4537, 0.5479, 0.4129, 0.5861, 0.3803, 0.6197, 0.3511};
constexpr double kPhase[] = {0.1173, 0.2591, 0.0419, 0.3307, 0.1891, 0.0771, 0.2243, 0.3613, 0.0097};

std::vector<Region> split(const Region& reg, int attempt) {
  const double s = kJitter[attempt % 9];
  std::vector<Region> out;
  if (reg.disk()) {
    const double inner = reg.r1 * s;
    const double phase = reg.t0 + kPhase[attempt % 9];
    out.push_back({0.0, inner, phase, phase + kTwoPi});
    for (int k = 0; k < 4; ++k) {
      const double a = phase + k * kTwoPi / 4;
      out.push_back({inner, reg.r1, a, a + kTwoPi / 4});
    }
    return out;
  }
  const double radial = reg.r1 - reg.r0;
  const double angular = reg.r1 * (reg.t1 - reg.t0);
  const bool cut_r = radial > 0.5 * angular;
  const bool cut_t = angular > 0.5 * radial;
  const double rm = reg.r0 + radial * s;
  const double tm = reg.t0 + (reg.t1 - reg.t0) * kJitter[(attempt + 4) % 9];
  std::vector<std::pair<double, double>> rs = cut_r ? std::vector<std::pair<double, double>>{{reg.r0, rm}, {rm, reg.r1}}
                                                    : std::vector<std::pair<double, double>>{{reg.r0, reg.r1}};
  std::vector<std::pair<double, double>> ts = cut_t ? std::vector<std::pair<double, double>>{{reg.t0, tm}, {tm, reg.t1}}
                                                    : std::vector<std::pair<double, double>>{{reg.t0, reg.t1}};
  for (auto [a, b] : rs)
    for (auto [c, d] : ts) out.push_back({a, b, c, d});
  return out;
}

}  // namespace

bool newton_refine(const AnalyticFunction& f, cplx& z, int multiplicity, int max_iter) {
  for (int it = 0; it < max_iter; ++it) {
    const Jet<1> v = f(z);
    if (v.value() == cplx{}) return true;
    if (v.c[1] == cplx{}) return false;
    const cplx step = static_cast<double>(multiplicity) * v.value() / v.c[1];
    if (!std::isfinite(std::abs(step))) return false;
    z -= step;
    if (std::abs(step) <= 4e-16 * std::max(1.0, std::abs(z))) return true;
  }
  // Accept a final iterate that has stalled at round-off level.
  const Jet<1> v = f(z);
  return v.c[1] != cplx{} && std::abs(static_cast<double>(multiplicity) * v.value() / v.c[1]) <= 1e-12 * std::max(1.0, std::abs(z));
}

int winding_number(const AnalyticFunction& f, cplx center, double radius, long* evaluations) {
  Counter counter(f, 50'000'000);
  const int n = to_count(arc_change(counter, center, radius, 0.0, kTwoPi));
  if (evaluations) *evaluations += counter.evaluations();
  return n;
}

std::vector<RootCluster> find_roots_in_disk(const AnalyticFunction& f, double radius, int expected,
                                            const RootSearchOptions& opts, RootSearchStats* stats) {
  Counter counter(f, opts.max_evaluations);
  std::vector<RootCluster> roots;
  std::deque<Region> work;
  work.push_back({0.0, radius, 0.0, kTwoPi, expected});
  int regions = 0;

  while (!work.empty()) {
    Region reg = work.front();
    work.pop_front();
    ++regions;
    if (reg.count == 0) continue;

    if (reg.count == 1) {
      cplx z = reg.center();
      if (newton_refine(f, z) && reg.contains(z, 1e-12 * std::max(1.0, reg.r1))) {
        roots.push_back({z, 1});
        continue;
      }
      if (reg.diameter() < 1e-13) {
        roots.push_back({reg.center(), 1});
        continue;
      }
    } else if (reg.diameter() < opts.cluster_diameter) {
      cplx z = reg.center();
      if (!newton_refine(f, z, reg.count) || std::abs(z - reg.center()) > 10.0 * reg.diameter()) z = reg.center();
      roots.push_back({z, reg.count});
      continue;
    }

    bool done = false;
    for (int attempt = 0; attempt < opts.max_retries && !done; ++attempt) {
      try {
        auto children = split(reg, attempt);
        int total = 0;
        for (auto& ch : children) {
          ch.count = count_in(counter, ch);
          total += ch.count;
        }
        if (total != reg.count) continue;
        for (auto& ch : children) work.push_back(ch);
        done = true;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::BoundaryRoot) throw;
      }
    }
    if (!done) throw Error(ErrorCode::RootCountMismatch, "could not subdivide a region consistently");
  }

  if (stats) {
    stats->evaluations += counter.evaluations();
    stats->regions += regions;
  }
  int total = 0;
  for (const auto& r : roots) total += r.multiplicity;
  if (total != expected) throw Error(ErrorCode::RootCountMismatch, "located roots do not match the winding count");
  return roots;
}

}  // namespace bfctl
