#include "bfctl/model.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace bfctl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::G2Zero: return "G2Zero";
    case ErrorCode::MixedBatchUnsupported: return "MixedBatchUnsupported";
    case ErrorCode::MalformedPmf: return "MalformedPmf";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::DivisionDomain: return "DivisionDomain";
    case ErrorCode::PreconditionUnmet: return "PreconditionUnmet";
    case ErrorCode::EvalDomain: return "EvalDomain";
    case ErrorCode::Unstable: return "Unstable";
    case ErrorCode::NearCritical: return "NearCritical";
    case ErrorCode::RootCountMismatch: return "RootCountMismatch";
    case ErrorCode::BoundaryRoot: return "BoundaryRoot";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::UnknownOutOfRange: return "UnknownOutOfRange";
    case ErrorCode::NormalizationFailure: return "NormalizationFailure";
    case ErrorCode::InversionUnstable: return "InversionUnstable";
    case ErrorCode::ZeroArrivalDelay: return "ZeroArrivalDelay";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

namespace {

std::string join_violations(const std::vector<Violation>& v) {
  std::ostringstream os;
  os << "invalid model configuration:";
  for (const auto& x : v) os << " [" << to_string(x.code) << "] " << x.message << ";";
  return os.str();
}

ErrorCode first_code(const std::vector<Violation>& v) {
  return v.empty() ? ErrorCode::InvalidParameter : v.front().code;
}

std::string unstable_message(double r0, double load) {
  std::ostringstream os;
  os << "model is unstable: arrival load " << load << " per cycle is not below capacity r0 = " << r0;
  return os.str();
}

std::vector<double> poisson_weights(double mean, double eps, double& tail) {
  std::vector<double> w;
  if (mean == 0.0) {
    tail = 0.0;
    return {1.0};
  }
  // Terms in log space so large means do not underflow e^{-mean}.
  double cum = 0.0;
  for (int k = 0;; ++k) {
    const double lp = -mean + k * std::log(mean) - std::lgamma(k + 1.0);
    const double pk = std::exp(lp);
    w.push_back(pk);
    cum += pk;
    if (k > mean && 1.0 - cum <= eps) break;
    if (k > 100000) break;
  }
  tail = std::max(0.0, 1.0 - cum);
  return w;
}

std::vector<double> geometric_weights(double mean, double eps, double& tail) {
  if (mean == 0.0) {
    tail = 0.0;
    return {1.0};
  }
  const double ratio = mean / (1.0 + mean);
  std::vector<double> w;
  double pk = 1.0 / (1.0 + mean);
  double rest = 1.0;  // P(Y >= k)
  while (true) {
    w.push_back(pk);
    rest *= ratio;
    if (rest <= eps) break;
    pk *= ratio;
  }
  tail = rest;
  return w;
}

void check_pmf(const Pmf& pmf, const std::string& what, std::vector<Violation>& out) {
  if (pmf.weights.empty()) {
    out.push_back({ErrorCode::MalformedPmf, what + " is empty"});
    return;
  }
  for (double w : pmf.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      out.push_back({ErrorCode::MalformedPmf, what + " has a negative or non-finite weight"});
      return;
    }
  }
  const double s = pmf.mass() + pmf.tail_eps;
  if (std::abs(s - 1.0) > 1e-12) {
    std::ostringstream os;
    os << what << " sums to " << s << " (expected 1 within 1e-12)";
    out.push_back({ErrorCode::MalformedPmf, os.str()});
  }
}

void check_arrival(const ArrivalSpec& spec, const std::string& what, std::vector<Violation>& out) {
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, PoissonArrivals> || std::is_same_v<T, GeometricArrivals>) {
          if (!(a.mean >= 0.0) || !std::isfinite(a.mean))
            out.push_back({ErrorCode::InvalidParameter, what + " mean must be finite and nonnegative"});
        } else if constexpr (std::is_same_v<T, DeterministicArrivals>) {
          if (a.count < 0) out.push_back({ErrorCode::InvalidParameter, what + " count must be nonnegative"});
        } else {
          check_pmf(a.pmf, what, out);
        }
      },
      spec.kind);
}

Transform::Base base_of(const ArrivalSpec& spec) {
  return std::visit(
      [](const auto& a) -> Transform::Base {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, PoissonArrivals>) {
          return Transform::Poisson{a.mean};
        } else if constexpr (std::is_same_v<T, GeometricArrivals>) {
          return Transform::Geometric{a.mean};
        } else if constexpr (std::is_same_v<T, DeterministicArrivals>) {
          std::vector<double> c(static_cast<std::size_t>(a.count) + 1, 0.0);
          c.back() = 1.0;
          return Transform::Polynomial{std::move(c)};
        } else {
          return Transform::Polynomial{a.pmf.weights};
        }
      },
      spec.kind);
}

}  // namespace

ConfigError::ConfigError(std::vector<Violation> violations)
    : Error(first_code(violations), join_violations(violations)), violations_(std::move(violations)) {}

UnstableError::UnstableError(double r0, double load)
    : Error(ErrorCode::Unstable, unstable_message(r0, load)), r0_(r0), load_(load) {}

double Pmf::mass() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

double Pmf::mean() const {
  double s = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) s += static_cast<double>(k) * weights[k];
  return s;
}

double ArrivalSpec::mean() const {
  return std::visit(
      [](const auto& a) -> double {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, PoissonArrivals> || std::is_same_v<T, GeometricArrivals>) {
          return a.mean;
        } else if constexpr (std::is_same_v<T, DeterministicArrivals>) {
          return a.count;
        } else {
          return a.pmf.mean();
        }
      },
      kind);
}

bool ArrivalSpec::operator==(const ArrivalSpec& o) const {
  if (kind.index() != o.kind.index()) return false;
  return std::visit(
      [&](const auto& a) -> bool {
        using T = std::decay_t<decltype(a)>;
        const auto& b = std::get<T>(o.kind);
        if constexpr (std::is_same_v<T, DeterministicArrivals>) {
          return a.count == b.count;
        } else if constexpr (std::is_same_v<T, ExplicitArrivals>) {
          return a.pmf.weights == b.pmf.weights;
        } else {
          return a.mean == b.mean;
        }
      },
      kind);
}

ModelConfig ModelConfig::uniform(int g1, int g2, int r, int m, double p, double q, double poisson_mean) {
  ModelConfig cfg;
  cfg.g1 = g1;
  cfg.g2 = g2;
  cfg.r = r;
  cfg.m = m;
  cfg.p.assign(static_cast<std::size_t>(std::max(g1, 0)), p);
  cfg.q.assign(static_cast<std::size_t>(std::max(g1, 0)), q);
  cfg.arrivals.assign(static_cast<std::size_t>(std::max(g1 + g2 + r, 0)), ArrivalSpec::poisson(poisson_mean));
  return cfg;
}

bool ModelConfig::operator==(const ModelConfig& o) const {
  auto pmfs_equal = [](const std::optional<std::vector<Pmf>>& a, const std::optional<std::vector<Pmf>>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    if (a->size() != b->size()) return false;
    for (std::size_t i = 0; i < a->size(); ++i)
      if ((*a)[i].weights != (*b)[i].weights) return false;
    return true;
  };
  return g1 == o.g1 && g2 == o.g2 && r == o.r && m == o.m && p == o.p && q == o.q && arrivals == o.arrivals &&
         pmfs_equal(blocked_arrivals, o.blocked_arrivals);
}

Transform Transform::of(const ArrivalSpec& spec) {
  return std::visit([](auto b) { return Transform(Kind(std::move(b))); }, base_of(spec));
}

Transform Transform::blocked(const ArrivalSpec& spec, double p) {
  if (p <= 0.0) return constant_one();
  if (p >= 1.0) return of(spec);
  auto base = base_of(spec);
  const double at_a = detail::eval_real(base, 1.0 - p);
  return Transform(Blocked{std::move(base), p, at_a});
}

double Transform::mean() const {
  return (*this)(Jet<1>::variable(1.0)).derivative().real();
}

namespace detail {

double eval_real(const Transform::Base& base, double x) {
  return eval_base(base, Jet<0>(x)).value().real();
}

std::vector<double> taylor_at(const Transform::Base& base, double a, int n) {
  std::vector<double> t(static_cast<std::size_t>(n) + 1, 0.0);
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, Transform::Poisson>) {
          double term = std::exp(b.mean * (a - 1.0));
          for (int k = 0; k <= n; ++k) {
            t[static_cast<std::size_t>(k)] = term;
            term *= b.mean / (k + 1);
          }
        } else if constexpr (std::is_same_v<T, Transform::Geometric>) {
          const double d = 1.0 + b.mean - b.mean * a;
          double term = 1.0 / d;
          for (int k = 0; k <= n; ++k) {
            t[static_cast<std::size_t>(k)] = term;
            term *= b.mean / d;
          }
        } else {
          // Repeated synthetic division by (z - a) yields the shifted coefficients.
          std::vector<double> c = b.coeffs;
          for (int k = 0; k <= n && !c.empty(); ++k) {
            double acc = 0.0;
            std::vector<double> quot(c.size() > 1 ? c.size() - 1 : 0);
            for (std::size_t j = c.size(); j-- > 0;) {
              acc = acc * a + c[j];
              if (j > 0) quot[j - 1] = acc;
            }
            t[static_cast<std::size_t>(k)] = acc;
            c = std::move(quot);
          }
        }
      },
      base);
  return t;
}

}  // namespace detail

Pmf arrival_pmf(const ArrivalSpec& spec, double eps) {
  return std::visit(
      [&](const auto& a) -> Pmf {
        using T = std::decay_t<decltype(a)>;
        Pmf out;
        if constexpr (std::is_same_v<T, PoissonArrivals>) {
          out.weights = poisson_weights(a.mean, eps, out.tail_eps);
        } else if constexpr (std::is_same_v<T, GeometricArrivals>) {
          out.weights = geometric_weights(a.mean, eps, out.tail_eps);
        } else if constexpr (std::is_same_v<T, DeterministicArrivals>) {
          out.weights.assign(static_cast<std::size_t>(a.count) + 1, 0.0);
          out.weights.back() = 1.0;
        } else {
          out = a.pmf;
        }
        return out;
      },
      spec.kind);
}

Transform arrival_pgf(const ArrivalSpec& spec) { return Transform::of(spec); }

Transform blocked_arrival_transform(const ArrivalSpec& spec, double p) { return Transform::blocked(spec, p); }

Pmf blocked_arrival_pmf(const ArrivalSpec& spec, double p, double eps) {
  if (p <= 0.0) return Pmf{{1.0}, 0.0};
  Pmf base = arrival_pmf(spec, eps);
  if (p >= 1.0) return base;
  // S_k = sum_{j>=k} P(Y=j) (1-p)^{j-k};  P(Yb=0) = S_0, P(Yb=k) = p S_k.
  const std::size_t n = base.weights.size();
  std::vector<double> s(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) s[k] = base.weights[k] + (1.0 - p) * s[k + 1];
  Pmf out;
  out.weights.resize(n);
  out.weights[0] = s[0];
  for (std::size_t k = 1; k < n; ++k) out.weights[k] = p * s[k];
  out.tail_eps = base.tail_eps;
  return out;
}

SlotPhase ValidatedModel::phase(int slot) const {
  if (slot <= config_.g1) return SlotPhase::BlockableGreen;
  if (slot <= config_.g1 + config_.g2) return SlotPhase::Green;
  return SlotPhase::Red;
}

double ValidatedModel::arrival_load() const {
  double s = 0.0;
  for (int i = 1; i <= c_; ++i) s += mean_arrivals(i);
  return s;
}

ValidatedModel validate_config(const ModelConfig& raw, double eps) {
  std::vector<Violation> v;
  if (raw.g1 < 0) v.push_back({ErrorCode::InvalidParameter, "g1 must be >= 0"});
  if (raw.g2 < 1) v.push_back({ErrorCode::G2Zero, "g2 must be >= 1"});
  if (raw.r < 0) v.push_back({ErrorCode::InvalidParameter, "r must be >= 0"});
  if (raw.m < 1) v.push_back({ErrorCode::InvalidParameter, "m must be >= 1"});
  if (!(eps > 0.0 && eps <= 1e-6)) v.push_back({ErrorCode::InvalidParameter, "truncation eps must lie in (0, 1e-6]"});
  const auto g1 = static_cast<std::size_t>(std::max(raw.g1, 0));
  const int c = raw.g1 + raw.g2 + raw.r;
  if (raw.p.size() != g1) v.push_back({ErrorCode::InvalidParameter, "p must have g1 entries"});
  if (raw.q.size() != g1) v.push_back({ErrorCode::InvalidParameter, "q must have g1 entries"});
  for (double x : raw.p)
    if (!(x >= 0.0 && x <= 1.0)) v.push_back({ErrorCode::InvalidParameter, "every p[i] must lie in [0, 1]"});
  for (double x : raw.q)
    if (!(x >= 0.0 && x <= 1.0)) v.push_back({ErrorCode::InvalidParameter, "every q[i] must lie in [0, 1]"});
  if (c >= 1 && raw.arrivals.size() != static_cast<std::size_t>(c))
    v.push_back({ErrorCode::InvalidParameter, "arrivals must have c = g1 + g2 + r entries"});
  for (std::size_t i = 0; i < raw.arrivals.size(); ++i)
    check_arrival(raw.arrivals[i], "arrivals[" + std::to_string(i) + "]", v);
  if (raw.blocked_arrivals) {
    if (raw.blocked_arrivals->size() != g1)
      v.push_back({ErrorCode::InvalidParameter, "blocked_arrivals must have g1 entries"});
    for (std::size_t i = 0; i < raw.blocked_arrivals->size(); ++i)
      check_pmf((*raw.blocked_arrivals)[i], "blocked_arrivals[" + std::to_string(i) + "]", v);
  } else if (raw.m > 1) {
    const bool mixed = std::any_of(raw.p.begin(), raw.p.end(), [](double x) { return x != 0.0 && x != 1.0; });
    if (mixed)
      v.push_back({ErrorCode::MixedBatchUnsupported,
                   "m > 1 with p[i] outside {0, 1} requires explicit blocked_arrivals laws"});
  }
  if (!v.empty()) throw ConfigError(std::move(v));

  ValidatedModel model;
  model.config_ = raw;
  model.c_ = c;
  model.eps_ = eps;
  for (const auto& spec : raw.arrivals) {
    model.arrival_pmfs_.push_back(arrival_pmf(spec, eps));
    model.arrival_pgfs_.push_back(arrival_pgf(spec));
  }
  for (std::size_t i = 0; i < g1; ++i) {
    if (raw.blocked_arrivals) {
      const Pmf& law = (*raw.blocked_arrivals)[i];
      model.blocked_pmfs_.push_back(law);
      model.blocked_pgfs_.push_back(Transform::polynomial(law.weights));
    } else {
      model.blocked_pmfs_.push_back(blocked_arrival_pmf(raw.arrivals[i], raw.p[i], eps));
      model.blocked_pgfs_.push_back(blocked_arrival_transform(raw.arrivals[i], raw.p[i]));
    }
  }
  return model;
}

}  // namespace bfctl
