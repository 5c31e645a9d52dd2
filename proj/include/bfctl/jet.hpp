#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>

namespace bfctl {

using cplx = std::complex<double>;

/// Truncated Taylor expansion of an analytic function around a point.
///
/// `c[k]` holds f^(k)(z0)/k!. Order 0 is a plain complex value, order 1 is a
/// dual number carrying the first derivative. Arithmetic propagates the
/// coefficients exactly up to the truncation order, which is how every
/// derivative in the solvers is obtained (no finite differences).
template <int N>
struct Jet {
  static_assert(N >= 0);
  std::array<cplx, N + 1> c{};

  Jet() = default;
  Jet(cplx v) { c[0] = v; }  // NOLINT: implicit constant lift
  Jet(double v) { c[0] = v; }  // NOLINT

  /// The independent variable z evaluated at z0.
  static Jet variable(cplx z0) {
    Jet j(z0);
    if constexpr (N >= 1) j.c[1] = 1.0;
    return j;
  }

  cplx value() const { return c[0]; }
  /// k-th derivative (not the Taylor coefficient).
  cplx derivative(int k = 1) const {
    double fact = 1.0;
    for (int i = 2; i <= k; ++i) fact *= i;
    return c[static_cast<std::size_t>(k)] * fact;
  }

  Jet& operator+=(const Jet& o) {
    for (int k = 0; k <= N; ++k) c[k] += o.c[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int k = 0; k <= N; ++k) c[k] -= o.c[k];
    return *this;
  }
  Jet& operator*=(cplx s) {
    for (auto& x : c) x *= s;
    return *this;
  }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) {
    for (auto& x : a.c) x = -x;
    return a;
  }
  friend Jet operator*(Jet a, cplx s) { return a *= s; }
  friend Jet operator*(cplx s, Jet a) { return a *= s; }
  friend Jet operator*(Jet a, double s) { return a *= cplx(s); }
  friend Jet operator*(double s, Jet a) { return a *= cplx(s); }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (int i = 0; i <= N; ++i) {
      if (a.c[i] == cplx{}) continue;
      for (int j = 0; i + j <= N; ++j) r.c[i + j] += a.c[i] * b.c[j];
    }
    return r;
  }
  friend Jet operator/(const Jet& a, const Jet& b) {
    Jet r;
    const cplx inv = 1.0 / b.c[0];
    for (int k = 0; k <= N; ++k) {
      cplx s = a.c[k];
      for (int j = 1; j <= k; ++j) s -= b.c[j] * r.c[k - j];
      r.c[k] = s * inv;
    }
    return r;
  }
  friend Jet operator/(Jet a, cplx s) { return a *= (1.0 / s); }
};

template <int N>
Jet<N> exp(const Jet<N>& a) {
  Jet<N> r;
  r.c[0] = std::exp(a.c[0]);
  for (int k = 1; k <= N; ++k) {
    cplx s{};
    for (int j = 1; j <= k; ++j) s += static_cast<double>(j) * a.c[j] * r.c[k - j];
    r.c[k] = s / static_cast<double>(k);
  }
  return r;
}

template <int N>
Jet<N> pow(Jet<N> base, int e) {
  Jet<N> r(1.0);
  while (e > 0) {
    if (e & 1) r = r * base;
    e >>= 1;
    if (e) base = base * base;
  }
  return r;
}

/// Drop the leading coefficient and reindex: for f with f(z0)=0 this is the
/// jet of f(z)/(z-z0), one order lower.
template <int N>
Jet<N - 1> shift_down(const Jet<N>& a) {
  Jet<N - 1> r;
  for (int k = 0; k < N; ++k) r.c[k] = a.c[k + 1];
  return r;
}

template <int M, int N>
Jet<M> truncate(const Jet<N>& a) {
  static_assert(M <= N);
  Jet<M> r;
  for (int k = 0; k <= M; ++k) r.c[k] = a.c[k];
  return r;
}

}  // namespace bfctl
