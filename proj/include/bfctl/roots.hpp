#pragma once

#include <functional>
#include <vector>

#include "bfctl/jet.hpp"

namespace bfctl {

/// f(z) together with f'(z).
using AnalyticFunction = std::function<Jet<1>(cplx)>;

struct RootCluster {
  cplx z;
  int multiplicity = 1;
};

struct RootSearchOptions {
  /// Regions smaller than this that still hold several roots are reported
  /// as one root of that multiplicity.
  double cluster_diameter = 1e-7;
  int max_retries = 8;
  long max_evaluations = 20'000'000;
};

struct RootSearchStats {
  long evaluations = 0;
  int regions = 0;
};

/// Number of zeros of f inside the circle |z - center| = radius, from the
/// accumulated change of arg f along the circle. Throws BoundaryRoot when a
/// zero lies (numerically) on the contour.
int winding_number(const AnalyticFunction& f, cplx center, double radius, long* evaluations = nullptr);

/// Isolates every zero of f in |z| < radius by recursive subdivision into
/// annular sectors, counting zeros per sector with the argument principle and
/// refining isolated ones with Newton's method. `expected` is the certified
/// total count inside the disk.
std::vector<RootCluster> find_roots_in_disk(const AnalyticFunction& f, double radius, int expected,
                                            const RootSearchOptions& opts = {}, RootSearchStats* stats = nullptr);

/// Newton iteration z <- z - k f/f' (k = multiplicity). Returns false if it
/// fails to settle within the iteration budget.
bool newton_refine(const AnalyticFunction& f, cplx& z, int multiplicity = 1, int max_iter = 100);

}  // namespace bfctl
