#pragma once

#include <map>
#include <string>
#include <vector>

#include "bfctl/model.hpp"

namespace bfctl {

/// Reward granted for a departure opportunity in each green slot. The
/// default is the batch size m everywhere.
struct ServiceCounts {
  std::vector<double> first_green;  // one per blockable slot
  double second_green = 1.0;

  static ServiceCounts uniform(const ValidatedModel& model);
  /// Turning/through correction: slot i of the first green earns
  /// effective_service(p_i, ...); the second green uses `p_second`
  /// (negative selects the mean of the first-green p values).
  static ServiceCounts turn_through(const ValidatedModel& model, double m_turn, double m_through,
                                    double p_second = -1.0);
};

struct CapacityReport {
  double r0 = 0.0;
  double arrival_load = 0.0;
  bool stable = false;
  double rho = 0.0;
  bool near_critical = false;  // rho > 0.999
  /// Labels: "0", "(i,u)", "(i,b)" for blockable slots and "i" otherwise.
  std::map<std::string, double> per_state_rewards;
};

CapacityReport reward_recursion(const ValidatedModel& model, const ServiceCounts& service);
CapacityReport reward_recursion(const ValidatedModel& model);
CapacityReport check_stability(const ValidatedModel& model);

double effective_service(double p, double m_turn, double m_through);

/// Shared-lane saturation flow s_th / (1 + P_r (E_R / f_Rpb - 1)).
double hcm_shared_lane_capacity(double s_th, double P_r, double E_R, double f_Rpb);

/// Closed-form capacity per cycle for the two special cases: q = 1 in every
/// blockable slot with constant p, or p = 1 everywhere (then only sum q
/// matters). Used as a cross-check of the recursion.
double capacity_closed_form_q1(const ValidatedModel& model);

}  // namespace bfctl
