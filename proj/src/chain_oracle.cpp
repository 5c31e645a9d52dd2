#include "bfctl/chain_oracle.hpp"

#include <cmath>
#include <string>

#include "bfctl/capacity.hpp"

namespace bfctl {

namespace {

using Vec = std::vector<double>;

struct SlotState {
  Vec u, b;
};

/// One-slot transition of the (queue, blocked) chain on 0..L.
class Stepper {
 public:
  Stepper(const ValidatedModel& model, int L) : model_(model), L_(L) {}

  /// Advances `s` through `slot`; returns expected departures. Mass pushed
  /// past L is added to `lumped`.
  double step(int slot, SlotState& s, double& lumped) const {
    const Pmf& Y = model_.arrival_pmf(slot);
    const double ey = Y.mean();
    Vec nu(s.u.size(), 0.0), nb(s.u.size(), 0.0);
    double dep = 0.0;
    switch (model_.phase(slot)) {
      case SlotPhase::BlockableGreen: {
        const double p = model_.p(slot), q = model_.q(slot), pq = p * q;
        const Pmf& Yb = model_.blocked_pmf(slot);
        const double u0 = s.u[0];
        // Blocked head batch: stays blocked with q, otherwise served.
        arrive(s.b, q, Y, 1, nb, lumped);
        dep += serve(s.b, 1.0 - q, Y, ey, 1, nu, lumped);
        // Unblocked nonempty queue: a turning head batch meets pedestrians.
        arrive(s.u, pq, Y, 1, nb, lumped);
        dep += serve(s.u, 1.0 - pq, Y, ey, 1, nu, lumped);
        // Empty queue: blocked from the first turning arrival on.
        nu[0] += u0 * (1.0 - q + q * Yb.at(0));
        for (std::size_t k = 1; k < Yb.size(); ++k) put(nb, static_cast<int>(k), u0 * q * Yb.weights[k], lumped);
        put(nb, static_cast<int>(Yb.size()), u0 * q * Yb.tail_eps, lumped);
        dep += u0 * (ey - q * Yb.mean());
        break;
      }
      case SlotPhase::Green: {
        Vec v = s.u;
        for (std::size_t x = 0; x < v.size(); ++x) v[x] += s.b[x];
        dep += serve(v, 1.0, Y, ey, 0, nu, lumped);
        break;
      }
      case SlotPhase::Red: {
        Vec v = s.u;
        for (std::size_t x = 0; x < v.size(); ++x) v[x] += s.b[x];
        arrive(v, 1.0, Y, 0, nu, lumped);
        break;
      }
    }
    s.u = std::move(nu);
    s.b = std::move(nb);
    return dep;
  }

 private:
  void put(Vec& out, int y, double w, double& lumped) const {
    if (w == 0.0) return;
    if (y >= L_) {
      out[static_cast<std::size_t>(L_)] += w;
      if (y > L_) lumped += w;
    } else {
      out[static_cast<std::size_t>(y)] += w;
    }
  }

  /// out[x + Y - shift] += w v[x] for x >= from.
  void shifted(const Vec& v, double w, const Pmf& Y, int from, int shift, Vec& out, double& lumped) const {
    if (w == 0.0) return;
    const int ny = static_cast<int>(Y.size());
    for (int x = from; x <= L_; ++x) {
      const double vx = v[static_cast<std::size_t>(x)] * w;
      if (vx == 0.0) continue;
      for (int k = 0; k < ny; ++k) put(out, x + k - shift, vx * Y.weights[static_cast<std::size_t>(k)], lumped);
      put(out, x + ny - shift, vx * Y.tail_eps, lumped);
    }
  }

  void arrive(const Vec& v, double w, const Pmf& Y, int from, Vec& out, double& lumped) const {
    shifted(v, w, Y, from, 0, out, lumped);
  }

  /// Up to m departures; a queue below m clears together with the slot's
  /// arrivals.
  double serve(const Vec& v, double w, const Pmf& Y, double ey, int from, Vec& out, double& lumped) const {
    if (w == 0.0) return 0.0;
    const int m = model_.m();
    double dep = 0.0;
    for (int x = from; x < m && x <= L_; ++x) {
      const double vx = v[static_cast<std::size_t>(x)] * w;
      out[0] += vx;
      dep += vx * (x + ey);
    }
    double busy = 0.0;
    for (int x = std::max(m, from); x <= L_; ++x) busy += v[static_cast<std::size_t>(x)];
    dep += w * busy * m;
    shifted(v, w, Y, std::max(m, from), m, out, lumped);
    return dep;
  }

  const ValidatedModel& model_;
  int L_;
};

double tv_distance(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) { return 0.5 * (a - b).cwiseAbs().sum(); }

void check_truncation(const ValidatedModel& model, int L) {
  double load = 0.0;
  for (int i = 1; i <= model.c(); ++i) load += model.mean_arrivals(i);
  if (L < model.m() || L < 10.0 * load)
    throw Error(ErrorCode::PreconditionUnmet,
                "truncation level L=" + std::to_string(L) + " must be at least m and 10x the cycle load");
}

}  // namespace

Eigen::MatrixXd one_cycle_kernel(const ValidatedModel& model, int L) {
  check_truncation(model, L);
  const Stepper stepper(model, L);
  const std::size_t n = static_cast<std::size_t>(L + 1);
  Eigen::MatrixXd P(L + 1, L + 1);
  for (int x = 0; x <= L; ++x) {
    SlotState s{Vec(n, 0.0), Vec(n, 0.0)};
    s.u[static_cast<std::size_t>(x)] = 1.0;
    double lumped = 0.0;
    for (int i = 1; i <= model.c(); ++i) stepper.step(i, s, lumped);
    for (int y = 0; y <= L; ++y) P(x, y) = s.u[static_cast<std::size_t>(y)] + s.b[static_cast<std::size_t>(y)];
  }
  return P;
}

OracleResult stationary(const ValidatedModel& model, const OracleOptions& opts) {
  const CapacityReport cap = check_stability(model);
  if (!cap.stable) throw UnstableError(cap.r0, cap.arrival_load);
  const int L = opts.L;
  Eigen::MatrixXd P = one_cycle_kernel(model, L);
  P.array().colwise() /= P.rowwise().sum().array();

  // pi_k = e_0 P^(2^k): each squaring doubles the number of cycles.
  Eigen::RowVectorXd prev = Eigen::RowVectorXd::Zero(L + 1);
  prev(0) = 1.0;
  Eigen::MatrixXd Pk = P;
  long cycles = 1;
  Eigen::RowVectorXd cur;
  while (true) {
    cur = Pk.row(0);
    if (tv_distance(cur, prev) < opts.tol) break;
    if (cycles >= opts.max_cycles)
      throw Error(ErrorCode::NoConvergence, "no stationary regime within " + std::to_string(cycles) + " cycles");
    prev = cur;
    Pk = (Pk * Pk).eval();
    // Keep rows stochastic; otherwise round-off drift compounds per squaring.
    Pk.array().colwise() /= Pk.rowwise().sum().array();
    cycles *= 2;
  }
  cur /= cur.sum();
  // Finish with plain cycles so the reported change is cycle-to-cycle.
  double change = 1.0;
  for (int it = 0; it < 64 && change >= opts.tol; ++it) {
    Eigen::RowVectorXd next = cur * P;
    next /= next.sum();
    change = tv_distance(next, cur);
    cur = next;
    ++cycles;
  }
  if (change >= opts.tol) throw Error(ErrorCode::NoConvergence, "cycle map did not settle");

  OracleResult out;
  out.L = L;
  out.cycles = cycles;
  out.tv_change = change;
  const Stepper stepper(model, L);
  const std::size_t n = static_cast<std::size_t>(L + 1);
  SlotState s{Vec(n), Vec(n, 0.0)};
  for (int y = 0; y <= L; ++y) s.u[static_cast<std::size_t>(y)] = cur(y);
  for (int i = 1; i <= model.c(); ++i) {
    out.departures_per_cycle += stepper.step(i, s, out.truncation_mass);
    out.arrivals_per_cycle += model.arrival_pmf(i).mean();
    Pmf pmf{Vec(n), 0.0};
    double mean = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      pmf.weights[x] = s.u[x] + s.b[x];
      mean += static_cast<double>(x) * pmf.weights[x];
    }
    out.slot_pmfs.push_back(std::move(pmf));
    out.blocked.push_back(s.b);
    out.means.push_back(mean);
  }
  return out;
}

}  // namespace bfctl
