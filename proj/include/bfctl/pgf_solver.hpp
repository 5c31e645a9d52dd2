#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfctl/jet.hpp"
#include "bfctl/model.hpp"
#include "bfctl/roots.hpp"

namespace bfctl {

/// Catalogue of the unknown boundary probabilities, in this order:
///   P(X_i=l, S=u)  i = 1..g1,  l = 0..m-1
///   P(X_i=l, S=b)  i = 1..g1,  l = 1..m-1
///   P(X_i=l)       i = g1+1..g1+g2-1 and i = c,  l = 0..m-1
struct UnknownIndex {
  int g1 = 0, g2 = 1, c = 1, m = 1;

  static UnknownIndex of(const ValidatedModel& model);
  int size() const { return m * (g1 + g2) + (m - 1) * g1; }
  int unblocked(int slot, int l) const { return (slot - 1) * m + l; }
  int blocked(int slot, int l) const { return g1 * m + (slot - 1) * (m - 1) + (l - 1); }
  /// Valid for slot in g1+1..g1+g2-1 and slot == c.
  int plain(int slot, int l) const;
  std::string label(int k) const;
};

/// Affine expression  constant + coeffs . c + self * S  where S is the
/// overflow-queue PGF X_{g1+g2}(z). Coefficients are jets so one propagation
/// yields values and derivatives together. An empty coefficient vector means
/// only the self term is tracked (cheap evaluation of the denominator).
template <int N>
struct LinearForm {
  Jet<N> constant;
  std::vector<Jet<N>> coeffs;
  Jet<N> self;

  LinearForm() = default;
  explicit LinearForm(int unknowns) : coeffs(static_cast<std::size_t>(unknowns)) {}

  void add(int k, const Jet<N>& v) {
    if (!coeffs.empty()) coeffs[static_cast<std::size_t>(k)] += v;
  }
  LinearForm& operator+=(const LinearForm& o) {
    constant += o.constant;
    self += o.self;
    for (std::size_t k = 0; k < coeffs.size(); ++k) coeffs[k] += o.coeffs[k];
    return *this;
  }
  LinearForm& operator*=(const Jet<N>& s) {
    constant *= s;
    self *= s;
    for (auto& x : coeffs) x *= s;
    return *this;
  }
  friend LinearForm operator+(LinearForm a, const LinearForm& b) { return a += b; }
  friend LinearForm operator*(LinearForm a, const Jet<N>& s) { return a *= s; }
  friend LinearForm operator*(LinearForm a, double s) { return a *= Jet<N>(s); }

  /// constant + coeffs . c (the self term excluded).
  Jet<N> apply(const std::vector<double>& c) const {
    Jet<N> acc = constant;
    for (std::size_t k = 0; k < coeffs.size(); ++k) acc += coeffs[k] * c[k];
    return acc;
  }
};

/// Per-slot forms for F_i(z) = z^{power} X_i(z); `blocked` is zero outside
/// the first green part.
template <int N>
struct SlotForm {
  LinearForm<N> unblocked;
  LinearForm<N> blocked;
  int power = 0;
  LinearForm<N> total() const { return unblocked + blocked; }
};

/// Runs the slot recursion once around the cycle at the jet point z, seeded
/// with X_{g1+g2} as the self term. Entry i (1-based, entry 0 unused) holds
/// slot i. With track_unknowns=false only the self coefficients are computed.
template <int N>
std::vector<SlotForm<N>> propagate_slots(const ValidatedModel& model, const UnknownIndex& index, const Jet<N>& z,
                                         bool track_unknowns = true);

/// X_{g1+g2}(z) = A(z) X_{g1+g2}(z) + B(z) . c.
struct CycleMap {
  cplx A;
  std::vector<cplx> B;
};
CycleMap propagate_cycle(const ValidatedModel& model, cplx z);

/// Cleared denominator z^{m(g1+g2)} (1 - A(z)); finite everywhere in the disk.
cplx denominator(const ValidatedModel& model, cplx z);
Jet<1> denominator_jet(const ValidatedModel& model, cplx z);

struct RootSet {
  std::vector<RootCluster> roots;  // multiplicities sum to m(g1+g2)
  int winding = 0;
  bool fixed_point = false;  // found by the fixed-point fast path
  long evaluations = 0;
};

/// All zeros of the cleared denominator in the closed unit disk, certified
/// by the winding number on |z| = 1 + 1e-6.
RootSet find_roots(const ValidatedModel& model);

struct LinearSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  std::vector<std::string> row_kinds;  // "root", "normalization", "boundary"
};

LinearSystem assemble_system(const ValidatedModel& model, const RootSet& roots);

struct InversionInfo {
  double radius = 0.0;
  int points = 0;
  double aliasing_bound = 0.0;
};

struct SlotMoments {
  double mass_unblocked = 1.0;
  double mass_blocked = 0.0;
  double mean_unblocked = 0.0;
  double mean_blocked = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

struct Metrics {
  double mean_queue = 0.0;     // at the end of an arbitrary slot
  double mean_delay = 0.0;     // slots
  bool delay_defined = true;   // false when there are no arrivals
  double overflow_mean = 0.0;
  double overflow_variance = 0.0;
  double departures_per_cycle = 0.0;
  double arrivals_per_cycle = 0.0;
};

class SolvedModel {
 public:
  SolvedModel(ValidatedModel model, RootSet roots, std::vector<double> unknowns, double residual, double condition);

  const ValidatedModel& model() const { return model_; }
  const UnknownIndex& index() const { return index_; }
  const RootSet& roots() const { return roots_; }
  const std::vector<double>& unknowns() const { return unknowns_; }
  double residual() const { return residual_; }
  double condition() const { return condition_; }
  const SlotMoments& moments(int slot) const { return moments_[static_cast<std::size_t>(slot - 1)]; }

  /// X_i(z), and its u/b parts for blockable slots. z must not be a zero of
  /// the denominator.
  cplx slot_pgf(int slot, cplx z) const;
  /// Values of X_1..X_c at z (index 0 is slot 1).
  std::vector<cplx> all_slot_pgfs(cplx z) const;

 private:
  ValidatedModel model_;
  UnknownIndex index_;
  RootSet roots_;
  std::vector<double> unknowns_;
  double residual_;
  double condition_;
  std::vector<SlotMoments> moments_;
};

struct SolveOptions {
  /// Refuse models with load ratio above this.
  double max_rho = 0.999;
};

SolvedModel solve(const ValidatedModel& model, const SolveOptions& opts = {});

double slot_mean(const SolvedModel& solved, int slot);

/// Coefficients 0..n_max of X_i(z) by lattice inversion on a circle of
/// radius rho < 1.
Pmf queue_pmf(const SolvedModel& solved, int slot, int n_max, InversionInfo* info = nullptr);
/// Every slot at once (index 0 is slot 1); one pass over the circle.
std::vector<Pmf> queue_pmfs(const SolvedModel& solved, int n_max, InversionInfo* info = nullptr);

/// Mean departures per cycle computed from the boundary probabilities and
/// slot masses (independent of the mean-queue balance).
double departures_per_cycle(const SolvedModel& solved);

/// Throws ZeroArrivalDelay through `strict`; otherwise reports delay 0 with
/// delay_defined=false when there are no arrivals.
Metrics aggregate_metrics(const SolvedModel& solved, bool strict = false);

}  // namespace bfctl
