#pragma once

#include <vector>

#include <Eigen/Dense>

#include "bfctl/model.hpp"

namespace bfctl {

struct OracleOptions {
  int L = 200;             // queue lengths above L are lumped into L
  double tol = 1e-12;      // total-variation stopping distance
  long max_cycles = 1L << 20;
};

struct OracleResult {
  int L = 0;
  /// Index 0 is slot 1. `blocked[i][x]` is P(X_{i+1}=x, S=b), zero past g1.
  std::vector<Pmf> slot_pmfs;
  std::vector<std::vector<double>> blocked;
  std::vector<double> means;
  double departures_per_cycle = 0.0;
  double arrivals_per_cycle = 0.0;
  /// Stationary probability per cycle pushed past L and lumped back.
  double truncation_mass = 0.0;
  long cycles = 0;  // power-iteration length in cycles
  double tv_change = 0.0;
};

/// Transition matrix of the queue length at the end of slot c over one full
/// cycle, on 0..L. Row x is the law of the next end-of-cycle queue given x.
Eigen::MatrixXd one_cycle_kernel(const ValidatedModel& model, int L);

/// Stationary per-slot distributions of the truncated chain, by powering the
/// cycle kernel from the empty state.
OracleResult stationary(const ValidatedModel& model, const OracleOptions& opts = {});

}  // namespace bfctl
