#pragma once

#include <cmath>
#include <optional>
#include <type_traits>
#include <variant>
#include <vector>

#include "bfctl/errors.hpp"
#include "bfctl/jet.hpp"

namespace bfctl {

inline constexpr double kDefaultTruncation = 1e-12;

/// Finite nonnegative distribution on {0, 1, ...}; `tail_eps` is the mass
/// dropped by truncation, so the weights sum to 1 - tail_eps.
struct Pmf {
  std::vector<double> weights;
  double tail_eps = 0.0;

  double mass() const;
  double mean() const;
  double at(std::size_t k) const { return k < weights.size() ? weights[k] : 0.0; }
  std::size_t size() const { return weights.size(); }
};

struct PoissonArrivals {
  double mean;
};
struct GeometricArrivals {
  double mean;
};
struct DeterministicArrivals {
  int count;
};
struct ExplicitArrivals {
  Pmf pmf;
};

/// Per-slot arrival law.
struct ArrivalSpec {
  std::variant<PoissonArrivals, GeometricArrivals, DeterministicArrivals, ExplicitArrivals> kind;

  static ArrivalSpec poisson(double mean) { return {PoissonArrivals{mean}}; }
  static ArrivalSpec geometric(double mean) { return {GeometricArrivals{mean}}; }
  static ArrivalSpec deterministic(int count) { return {DeterministicArrivals{count}}; }
  static ArrivalSpec explicit_pmf(std::vector<double> w) { return {ExplicitArrivals{Pmf{std::move(w), 0.0}}}; }

  double mean() const;
  bool operator==(const ArrivalSpec& o) const;
};

/// Evaluable probability generating function. Poisson and geometric laws use
/// their closed forms; explicit laws are evaluated by Horner's rule.
class Transform {
 public:
  struct Poisson {
    double mean;
  };
  struct Geometric {
    double mean;
  };
  struct Polynomial {
    std::vector<double> coeffs;
  };
  using Base = std::variant<Poisson, Geometric, Polynomial>;
  /// Law counted from the first turning vehicle in the slot:
  ///   Yb(z) = Y(a) + p z (Y(z) - Y(a)) / (z - a),  a = 1 - p.
  struct Blocked {
    Base base;
    double p;
    double base_at_a;
  };

  static Transform poisson(double mean) { return Transform(Poisson{mean}); }
  static Transform geometric(double mean) { return Transform(Geometric{mean}); }
  static Transform polynomial(std::vector<double> coeffs) { return Transform(Polynomial{std::move(coeffs)}); }
  static Transform constant_one() { return polynomial({1.0}); }
  static Transform of(const ArrivalSpec& spec);
  static Transform blocked(const ArrivalSpec& spec, double p);

  template <int N>
  Jet<N> operator()(const Jet<N>& z) const;
  cplx operator()(cplx z) const { return (*this)(Jet<0>(z)).value(); }

  /// First derivative at z = 1.
  double mean() const;

 private:
  using Kind = std::variant<Poisson, Geometric, Polynomial, Blocked>;
  explicit Transform(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

/// Lane-group description as supplied by the user. Vectors p, q have one
/// entry per slot of the blockable green part; arrivals one entry per slot.
struct ModelConfig {
  int g1 = 0;
  int g2 = 1;
  int r = 0;
  int m = 1;
  std::vector<double> p;
  std::vector<double> q;
  std::vector<ArrivalSpec> arrivals;
  std::optional<std::vector<Pmf>> blocked_arrivals;

  int cycle() const { return g1 + g2 + r; }

  /// Convenience constructor broadcasting scalar p, q and a Poisson rate.
  static ModelConfig uniform(int g1, int g2, int r, int m, double p, double q, double poisson_mean);
  bool operator==(const ModelConfig& o) const;
};

enum class SlotPhase { BlockableGreen, Green, Red };

/// Immutable, validated model with the per-slot arrival laws materialized.
class ValidatedModel {
 public:
  const ModelConfig& config() const { return config_; }
  int g1() const { return config_.g1; }
  int g2() const { return config_.g2; }
  int r() const { return config_.r; }
  int m() const { return config_.m; }
  int c() const { return c_; }

  /// Slots are numbered 1..c throughout.
  SlotPhase phase(int slot) const;
  double p(int slot) const { return config_.p[static_cast<std::size_t>(slot - 1)]; }
  double q(int slot) const { return config_.q[static_cast<std::size_t>(slot - 1)]; }
  const Pmf& arrival_pmf(int slot) const { return arrival_pmfs_[static_cast<std::size_t>(slot - 1)]; }
  const Transform& arrival_pgf(int slot) const { return arrival_pgfs_[static_cast<std::size_t>(slot - 1)]; }
  /// Only meaningful for blockable slots 1..g1.
  const Pmf& blocked_pmf(int slot) const { return blocked_pmfs_[static_cast<std::size_t>(slot - 1)]; }
  const Transform& blocked_pgf(int slot) const { return blocked_pgfs_[static_cast<std::size_t>(slot - 1)]; }

  double mean_arrivals(int slot) const { return arrival_pgfs_[static_cast<std::size_t>(slot - 1)].mean(); }
  double arrival_load() const;
  double truncation() const { return eps_; }

 private:
  friend ValidatedModel validate_config(const ModelConfig&, double);
  ValidatedModel() = default;

  ModelConfig config_;
  int c_ = 0;
  double eps_ = kDefaultTruncation;
  std::vector<Pmf> arrival_pmfs_;
  std::vector<Transform> arrival_pgfs_;
  std::vector<Pmf> blocked_pmfs_;
  std::vector<Transform> blocked_pgfs_;
};

/// Checks every invariant and throws ConfigError listing all violations.
ValidatedModel validate_config(const ModelConfig& raw, double eps = kDefaultTruncation);

Pmf arrival_pmf(const ArrivalSpec& spec, double eps = kDefaultTruncation);
Transform arrival_pgf(const ArrivalSpec& spec);
Transform blocked_arrival_transform(const ArrivalSpec& spec, double p);
Pmf blocked_arrival_pmf(const ArrivalSpec& spec, double p, double eps = kDefaultTruncation);

/// Horner evaluation of a pmf's generating polynomial.
template <int N>
Jet<N> horner(const std::vector<double>& coeffs, const Jet<N>& z) {
  Jet<N> acc;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * z + Jet<N>(*it);
  return acc;
}

namespace detail {

/// Taylor coefficients t_0..t_n of a base law's PGF around the real point a.
std::vector<double> taylor_at(const Transform::Base& base, double a, int n);
double eval_real(const Transform::Base& base, double x);

template <int N>
Jet<N> eval_law(const Transform::Poisson& b, const Jet<N>& z) {
  return exp((z - Jet<N>(1.0)) * b.mean);
}
template <int N>
Jet<N> eval_law(const Transform::Geometric& b, const Jet<N>& z) {
  return Jet<N>(1.0) / (Jet<N>(1.0 + b.mean) - z * b.mean);
}
template <int N>
Jet<N> eval_law(const Transform::Polynomial& b, const Jet<N>& z) {
  return horner(b.coeffs, z);
}
template <int N>
Jet<N> eval_base(const Transform::Base& base, const Jet<N>& z) {
  return std::visit([&](const auto& b) { return eval_law(b, z); }, base);
}

}  // namespace detail

template <int N>
Jet<N> Transform::operator()(const Jet<N>& z) const {
  return std::visit(
      [&](const auto& b) -> Jet<N> {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, Blocked>) {
          const double a = 1.0 - b.p;
          const Jet<N> w = z - Jet<N>(a);
          Jet<N> quotient;
          if (std::abs(w.value()) < 1e-6) {
            // Removable singularity at z = a: expand (Y(z) - Y(a)) / (z - a)
            // in powers of w from the base law's Taylor coefficients at a.
            constexpr int kTerms = 8 + N;
            const auto t = detail::taylor_at(b.base, a, kTerms);
            for (int k = kTerms; k >= 1; --k) quotient = quotient * w + Jet<N>(t[static_cast<std::size_t>(k)]);
          } else {
            quotient = (detail::eval_base(b.base, z) - Jet<N>(b.base_at_a)) / w;
          }
          return Jet<N>(b.base_at_a) + z * quotient * b.p;
        } else {
          return detail::eval_law(b, z);
        }
      },
      kind_);
}

}  // namespace bfctl
