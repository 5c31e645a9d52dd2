#include "bfctl/capacity.hpp"

#include <algorithm>
#include <numeric>

namespace bfctl {

ServiceCounts ServiceCounts::uniform(const ValidatedModel& model) {
  return {std::vector<double>(static_cast<std::size_t>(model.g1()), model.m()), static_cast<double>(model.m())};
}

ServiceCounts ServiceCounts::turn_through(const ValidatedModel& model, double m_turn, double m_through,
                                          double p_second) {
  if (!(m_turn > 0.0) || !(m_through > 0.0))
    throw Error(ErrorCode::InvalidParameter, "m_turn and m_through must be positive");
  ServiceCounts s;
  const auto& p = model.config().p;
  for (double pi : p) s.first_green.push_back(effective_service(pi, m_turn, m_through));
  if (p_second < 0.0) p_second = p.empty() ? 0.0 : std::accumulate(p.begin(), p.end(), 0.0) / p.size();
  s.second_green = effective_service(p_second, m_turn, m_through);
  return s;
}

double effective_service(double p, double m_turn, double m_through) {
  return p * m_turn + (1.0 - p) * m_through;
}

CapacityReport reward_recursion(const ValidatedModel& model, const ServiceCounts& service) {
  const int g1 = model.g1();
  const int g2 = model.g2();
  const int c = model.c();
  if (service.first_green.size() != static_cast<std::size_t>(g1))
    throw Error(ErrorCode::InvalidParameter, "service counts must have one entry per blockable slot");

  CapacityReport rep;
  // Backward pass over slots c, c-1, ..., g1+1: reward accumulated from the
  // start of the slot to the end of the cycle.
  double next = 0.0;
  for (int i = c; i > g1; --i) {
    const double here = (i <= g1 + g2 ? service.second_green : 0.0) + next;
    rep.per_state_rewards[std::to_string(i)] = here;
    next = here;
  }
  const double after_first_green = next;  // r_{g1+1}, or r_1 when g1 = 0

  double rb = after_first_green;                          // r_{g1,b}
  double ru = 0.0;
  if (g1 > 0) {
    ru = service.first_green[static_cast<std::size_t>(g1 - 1)] + after_first_green;
    rep.per_state_rewards["(" + std::to_string(g1) + ",b)"] = rb;
    rep.per_state_rewards["(" + std::to_string(g1) + ",u)"] = ru;
    for (int i = g1 - 1; i >= 1; --i) {
      const double pn = model.p(i + 1);
      const double qn = model.q(i + 1);
      const double new_rb = qn * rb + (1.0 - qn) * ru;
      const double new_ru = service.first_green[static_cast<std::size_t>(i - 1)] + pn * qn * rb + (1.0 - pn * qn) * ru;
      rb = new_rb;
      ru = new_ru;
      rep.per_state_rewards["(" + std::to_string(i) + ",b)"] = rb;
      rep.per_state_rewards["(" + std::to_string(i) + ",u)"] = ru;
    }
    const double block1 = model.p(1) * model.q(1);
    rep.r0 = block1 * rb + (1.0 - block1) * ru;
  } else {
    rep.r0 = after_first_green;
  }
  rep.per_state_rewards["0"] = rep.r0;

  rep.arrival_load = model.arrival_load();
  rep.stable = rep.arrival_load < rep.r0;
  rep.rho = rep.r0 > 0.0 ? rep.arrival_load / rep.r0 : (rep.arrival_load > 0.0 ? INFINITY : 0.0);
  rep.near_critical = rep.rho > 0.999;
  return rep;
}

CapacityReport reward_recursion(const ValidatedModel& model) {
  return reward_recursion(model, ServiceCounts::uniform(model));
}

CapacityReport check_stability(const ValidatedModel& model) { return reward_recursion(model); }

double hcm_shared_lane_capacity(double s_th, double P_r, double E_R, double f_Rpb) {
  if (!(f_Rpb > 0.0)) throw Error(ErrorCode::DivisionDomain, "f_Rpb must be positive");
  if (!(P_r >= 0.0 && P_r <= 1.0)) throw Error(ErrorCode::InvalidParameter, "P_r must lie in [0, 1]");
  if (!(E_R > 0.0)) throw Error(ErrorCode::InvalidParameter, "E_R must be positive");
  return s_th / (1.0 + P_r * (E_R / f_Rpb - 1.0));
}

double capacity_closed_form_q1(const ValidatedModel& model) {
  const auto& cfg = model.config();
  const double m = model.m();
  const bool all_q1 = std::all_of(cfg.q.begin(), cfg.q.end(), [](double x) { return x == 1.0; });
  const bool const_p =
      cfg.p.empty() || std::all_of(cfg.p.begin(), cfg.p.end(), [&](double x) { return x == cfg.p.front(); });
  const bool all_p1 = std::all_of(cfg.p.begin(), cfg.p.end(), [](double x) { return x == 1.0; });
  if (all_q1 && const_p) {
    const double p = cfg.p.empty() ? 0.0 : cfg.p.front();
    if (p == 0.0) return m * (model.g1() + model.g2());
    // g2 + sum_{i=1}^{g1} (1-p)^i
    return m * (model.g2() + (1.0 - std::pow(1.0 - p, model.g1())) * (1.0 - p) / p);
  }
  if (all_p1) {
    const double sum_q = std::accumulate(cfg.q.begin(), cfg.q.end(), 0.0);
    return m * (model.g1() + model.g2() - sum_q);
  }
  throw Error(ErrorCode::PreconditionUnmet, "closed form needs q = 1 with constant p, or p = 1 everywhere");
}

}  // namespace bfctl
