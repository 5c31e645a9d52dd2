#include "bfctl/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "bfctl/capacity.hpp"
#include "bfctl/chain_oracle.hpp"
#include "bfctl/config_json.hpp"
#include "bfctl/pgf_solver.hpp"
#include "bfctl/simulator.hpp"

namespace bfctl::cli {

using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigParse:
    case ErrorCode::G2Zero:
    case ErrorCode::MixedBatchUnsupported:
    case ErrorCode::MalformedPmf:
    case ErrorCode::InvalidParameter:
    case ErrorCode::DivisionDomain:
    case ErrorCode::PreconditionUnmet:
    case ErrorCode::UnknownScenario:
      return kConfig;
    case ErrorCode::Unstable:
    case ErrorCode::NearCritical:
      return kUnstable;
    case ErrorCode::IoFailure:
      return kIo;
    default:
      return kNumerical;
  }
}

json error_json(const std::exception& e) {
  json body{{"message", e.what()}};
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    body["code"] = std::string(to_string(err->code()));
    body["exit_code"] = exit_code_for(err->code());
  } else {
    body["code"] = "Internal";
    body["exit_code"] = static_cast<int>(kNumerical);
  }
  if (const auto* u = dynamic_cast<const UnstableError*>(&e)) {
    body["r0"] = u->r0();
    body["load"] = u->load();
  }
  if (const auto* c = dynamic_cast<const ConfigError*>(&e)) {
    json v = json::array();
    for (const auto& x : c->violations()) v.push_back({{"code", std::string(to_string(x.code))}, {"message", x.message}});
    body["violations"] = std::move(v);
  }
  return {{"schema_version", kSchemaVersion}, {"error", std::move(body)}};
}

std::vector<ModelConfig> lane_scenario_expand(const std::string& name, double mu, std::optional<Timing> timing) {
  struct Lane {
    double p, share;
  };
  std::vector<Lane> lanes;
  Timing t;
  if (name == "case1") {
    lanes = {{0.3, 1.0}};
  } else if (name == "case2") {
    lanes = {{1.0, 0.3}, {0.0, 0.7}};
  } else if (name == "case2a") {
    lanes = {{0.6, 0.5}, {0.0, 0.5}};
    t = {8, 16, 16};
  } else if (name == "case2b") {
    lanes = {{0.75, 0.4}, {0.0, 0.6}};
    t = {8, 16, 16};
  } else {
    throw Error(ErrorCode::UnknownScenario, "unknown lane scenario '" + name + "' (case1, case2, case2a, case2b)");
  }
  if (timing) t = *timing;
  std::vector<ModelConfig> out;
  for (const auto& lane : lanes) out.push_back(ModelConfig::uniform(t.g1, t.g2, t.r, 1, lane.p, 1.0, lane.share * mu));
  return out;
}

std::vector<double> SweepSpec::parse_values(const std::string& text) {
  std::vector<double> out;
  auto num = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw Error(ErrorCode::InvalidParameter, "bad number '" + s + "' in range");
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.size() != 3) throw Error(ErrorCode::InvalidParameter, "range must be start:stop:steps");
    const double a = num(parts[0]), b = num(parts[1]), n = num(parts[2]);
    if (n < 1 || n != std::floor(n)) throw Error(ErrorCode::InvalidParameter, "range steps must be a positive integer");
    const int steps = static_cast<int>(n);
    for (int k = 0; k < steps; ++k) out.push_back(steps == 1 ? a : a + (b - a) * k / (steps - 1));
  } else {
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');) out.push_back(num(part));
  }
  if (out.empty()) throw Error(ErrorCode::InvalidParameter, "empty sweep range");
  return out;
}

namespace {

int as_int(double v, const std::string& path) {
  if (v != std::floor(v)) throw Error(ErrorCode::InvalidParameter, path + " must be an integer");
  return static_cast<int>(v);
}

/// Arrival law shared by every slot; timing sweeps can only resize those.
ArrivalSpec common_arrival(const ModelConfig& cfg, const std::string& path) {
  if (cfg.arrivals.empty()) throw Error(ErrorCode::InvalidParameter, "no arrival laws to resize for " + path);
  for (const auto& a : cfg.arrivals)
    if (!(a == cfg.arrivals.front()))
      throw Error(ErrorCode::InvalidParameter, "sweeping " + path + " needs the same arrival law in every slot");
  return cfg.arrivals.front();
}

}  // namespace

ModelConfig apply_parameter(ModelConfig cfg, const std::string& path, double value) {
  if (path == "arrivals.mean") {
    for (auto& a : cfg.arrivals) {
      if (auto* pois = std::get_if<PoissonArrivals>(&a.kind)) pois->mean = value;
      else if (auto* geo = std::get_if<GeometricArrivals>(&a.kind)) geo->mean = value;
      else if (auto* det = std::get_if<DeterministicArrivals>(&a.kind)) det->count = as_int(value, path);
      else throw Error(ErrorCode::InvalidParameter, "arrivals.mean does not apply to explicit pmfs");
    }
  } else if (path == "p") {
    std::fill(cfg.p.begin(), cfg.p.end(), value);
  } else if (path == "q") {
    std::fill(cfg.q.begin(), cfg.q.end(), value);
  } else if (path == "m") {
    cfg.m = as_int(value, path);
  } else if (path == "g1" || path == "g2" || path == "r") {
    const ArrivalSpec law = common_arrival(cfg, path);
    const int v = as_int(value, path);
    if (v < 0) throw Error(ErrorCode::InvalidParameter, path + " must be nonnegative");
    if (path == "g1") {
      const double p0 = cfg.p.empty() ? 0.0 : cfg.p.front();
      const double q0 = cfg.q.empty() ? 0.0 : cfg.q.front();
      cfg.g1 = v;
      cfg.p.assign(static_cast<std::size_t>(v), p0);
      cfg.q.assign(static_cast<std::size_t>(v), q0);
    } else if (path == "g2") {
      cfg.g2 = v;
    } else {
      cfg.r = v;
    }
    cfg.arrivals.assign(static_cast<std::size_t>(cfg.cycle()), law);
  } else {
    throw Error(ErrorCode::InvalidParameter,
                "unknown sweep parameter '" + path + "' (arrivals.mean, p, q, m, g1, g2, r)");
  }
  return cfg;
}

int worker_count() {
  if (const char* env = std::getenv("BFCTL_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

namespace {

struct Options {
  int nmax = 200;
  int truncation = 200;
  long cycles = 10000;
  int runs = 100;
  std::uint64_t seed = 20240607;
  bool pmf = false;
  bool csv = false;
  int workers = 0;
};

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

struct EngineRun {
  std::vector<double> means;
  std::vector<double> variances;  // solver only
  std::vector<Pmf> pmfs;          // empty for the simulator
  std::vector<Estimate> intervals;
  json detail;
};

const std::vector<std::string> kEngines{"solve", "oracle", "simulate"};

void check_engine(const std::string& e) {
  if (std::find(kEngines.begin(), kEngines.end(), e) == kEngines.end())
    throw CLI::ValidationError("engine", "unknown engine '" + e + "' (solve, oracle, simulate)");
}

json pmf_json(const Pmf& pmf) { return {{"weights", pmf.weights}, {"tail", pmf.tail_eps}}; }

EngineRun run_engine(const std::string& engine, const ValidatedModel& model, const Options& o, bool want_pmfs) {
  EngineRun run;
  const int c = model.c();
  if (engine == "solve") {
    const SolvedModel s = solve(model);
    const Metrics met = aggregate_metrics(s);
    InversionInfo info;
    if (want_pmfs) run.pmfs = queue_pmfs(s, o.nmax, &info);
    json slots = json::array();
    for (int i = 1; i <= c; ++i) {
      const SlotMoments& mo = s.moments(i);
      run.means.push_back(mo.mean);
      run.variances.push_back(mo.variance);
      json row{{"slot", i}, {"mean", mo.mean}, {"variance", mo.variance}, {"p_blocked", mo.mass_blocked}};
      if (want_pmfs && o.pmf) row["pmf"] = pmf_json(run.pmfs[static_cast<std::size_t>(i - 1)]);
      slots.push_back(std::move(row));
    }
    run.detail = {
        {"roots",
         {{"count", s.roots().roots.size()},
          {"winding", s.roots().winding},
          {"fixed_point", s.roots().fixed_point},
          {"evaluations", s.roots().evaluations}}},
        {"residual", s.residual()},
        {"condition", s.condition()},
        {"metrics",
         {{"mean_queue", met.mean_queue},
          {"mean_delay", met.delay_defined ? json(met.mean_delay) : json(nullptr)},
          {"overflow_mean", met.overflow_mean},
          {"overflow_variance", met.overflow_variance},
          {"departures_per_cycle", met.departures_per_cycle},
          {"arrivals_per_cycle", met.arrivals_per_cycle}}},
        {"slots", std::move(slots)}};
    if (want_pmfs) run.detail["inversion"] = {{"radius", info.radius}, {"points", info.points}, {"aliasing_bound", info.aliasing_bound}};
  } else if (engine == "oracle") {
    OracleOptions oo;
    oo.L = o.truncation;
    OracleResult r = stationary(model, oo);
    run.means = r.means;
    json slots = json::array();
    for (int i = 0; i < c; ++i) {
      double pb = 0.0;
      for (double w : r.blocked[static_cast<std::size_t>(i)]) pb += w;
      json row{{"slot", i + 1}, {"mean", r.means[static_cast<std::size_t>(i)]}, {"p_blocked", pb}};
      if (o.pmf) row["pmf"] = pmf_json(r.slot_pmfs[static_cast<std::size_t>(i)]);
      slots.push_back(std::move(row));
    }
    run.detail = {{"L", r.L},
                  {"cycles", r.cycles},
                  {"tv_change", r.tv_change},
                  {"truncation_mass", r.truncation_mass},
                  {"departures_per_cycle", r.departures_per_cycle},
                  {"arrivals_per_cycle", r.arrivals_per_cycle},
                  {"slots", std::move(slots)}};
    run.pmfs = std::move(r.slot_pmfs);
  } else {
    SimOptions so;
    so.cycles = o.cycles;
    so.runs = o.runs;
    so.seed = o.seed;
    so.workers = o.workers > 0 ? o.workers : worker_count();
    const SimReport rep = simulate(model, so);
    json slots = json::array();
    for (int i = 0; i < c; ++i) {
      const Estimate& e = rep.per_slot_mean[static_cast<std::size_t>(i)];
      run.means.push_back(e.mean);
      slots.push_back({{"slot", i + 1}, {"mean", e.mean}, {"lo", e.lo}, {"hi", e.hi}});
    }
    run.intervals = rep.per_slot_mean;
    run.detail = {{"runs", rep.runs},
                  {"cycles_per_run", rep.cycles_per_run},
                  {"seed", rep.seed},
                  {"overflow", {{"mean", rep.overflow_mean.mean}, {"lo", rep.overflow_mean.lo}, {"hi", rep.overflow_mean.hi}}},
                  {"slots", std::move(slots)}};
  }
  return run;
}

json capacity_json(const ValidatedModel& model) {
  const CapacityReport rep = check_stability(model);
  json j{{"r0", rep.r0},
         {"arrival_load", rep.arrival_load},
         {"stable", rep.stable},
         {"rho", rep.rho},
         {"near_critical", rep.near_critical},
         {"per_state_rewards", rep.per_state_rewards}};
  try {
    j["closed_form"] = capacity_closed_form_q1(model);
  } catch (const Error&) {
  }
  return j;
}

ValidatedModel load_model(const std::string& path) { return validate_config(load_config(path)); }

/// Pmf distances on the common support; the mass beyond it counts towards TV.
struct PmfDiff {
  double sup_abs = 0.0;
  double tv = 0.0;
};

PmfDiff pmf_diff(const Pmf& a, const Pmf& b) {
  const std::size_t n = std::min(a.size(), b.size());
  PmfDiff d;
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = std::abs(a.weights[k] - b.weights[k]);
    d.sup_abs = std::max(d.sup_abs, x);
    d.tv += x;
    ma += a.weights[k];
    mb += b.weights[k];
  }
  d.tv = 0.5 * (d.tv + std::abs((1.0 - ma) - (1.0 - mb)));
  return d;
}

json compare_json(const std::string& ea, const std::string& eb, const EngineRun& a, const EngineRun& b) {
  json slots = json::array();
  double max_abs = 0.0;
  for (std::size_t i = 0; i < a.means.size(); ++i) {
    const double diff = a.means[i] - b.means[i];
    max_abs = std::max(max_abs, std::abs(diff));
    slots.push_back({{"slot", i + 1}, {"mean_a", a.means[i]}, {"mean_b", b.means[i]}, {"diff", diff}});
  }
  json j{{"schema_version", kSchemaVersion}, {"engines", {ea, eb}}, {"slots", slots}, {"max_abs_mean_diff", max_abs}};
  if (!a.pmfs.empty() && !b.pmfs.empty()) {
    double sup_abs = 0.0, sup_tv = 0.0;
    for (std::size_t i = 0; i < a.pmfs.size(); ++i) {
      const PmfDiff d = pmf_diff(a.pmfs[i], b.pmfs[i]);
      sup_abs = std::max(sup_abs, d.sup_abs);
      sup_tv = std::max(sup_tv, d.tv);
    }
    j["sup_abs_pmf_diff"] = sup_abs;
    j["sup_tv"] = sup_tv;
  } else {
    j["sup_abs_pmf_diff"] = nullptr;
    j["sup_tv"] = nullptr;
  }
  // Exact means covered by the simulator's confidence intervals.
  const EngineRun* sim = !a.intervals.empty() ? &a : !b.intervals.empty() ? &b : nullptr;
  const EngineRun* other = sim == &a ? &b : &a;
  if (sim && other->intervals.empty()) {
    int inside = 0;
    for (std::size_t i = 0; i < sim->intervals.size(); ++i) inside += sim->intervals[i].contains(other->means[i]);
    j["inside_ci"] = inside;
    j["slots_total"] = sim->intervals.size();
  }
  return j;
}

// ---- sweeps ----

struct PointSummary {
  std::map<std::string, double> values;
  std::vector<double> slot_means;
  std::vector<double> cdf;
};

const std::vector<std::string>& metric_columns(const std::string& engine) {
  static const std::map<std::string, std::vector<std::string>> cols{
      {"capacity", {"r0", "arrival_load", "rho", "stable"}},
      {"solve", {"r0", "arrival_load", "rho", "mean_queue", "mean_delay", "overflow_mean", "overflow_variance"}},
      {"oracle", {"r0", "arrival_load", "rho", "mean_queue", "mean_delay", "overflow_mean"}},
      {"simulate", {"arrival_load", "mean_queue", "mean_delay", "overflow_mean", "overflow_lo", "overflow_hi"}},
  };
  return cols.at(engine);
}

PointSummary summarize(const std::string& engine, const ValidatedModel& model, const Options& o, int cdf_max) {
  PointSummary s;
  const int c = model.c();
  const int overflow_slot = model.g1() + model.g2();
  const CapacityReport cap = check_stability(model);
  s.values["arrival_load"] = cap.arrival_load;
  if (engine == "capacity") {
    s.values["r0"] = cap.r0;
    s.values["rho"] = cap.rho;
    s.values["stable"] = cap.stable ? 1.0 : 0.0;
    return s;
  }
  if (engine != "simulate") {
    s.values["r0"] = cap.r0;
    s.values["rho"] = cap.rho;
  }
  Options local = o;
  local.workers = 1;  // the sweep pool already runs in parallel
  const EngineRun run = run_engine(engine, model, local, engine != "simulate" && cdf_max >= 0);
  s.slot_means = run.means;
  double total = 0.0;
  for (double x : run.means) total += x;
  s.values["mean_queue"] = total / c;
  s.values["mean_delay"] = cap.arrival_load > 0.0 ? total / cap.arrival_load : std::nan("");
  s.values["overflow_mean"] = run.means[static_cast<std::size_t>(overflow_slot - 1)];
  if (engine == "solve") s.values["overflow_variance"] = run.variances[static_cast<std::size_t>(overflow_slot - 1)];
  if (engine == "simulate") {
    s.values["overflow_lo"] = run.detail["overflow"]["lo"].get<double>();
    s.values["overflow_hi"] = run.detail["overflow"]["hi"].get<double>();
  }
  if (!run.pmfs.empty()) {
    const Pmf& pmf = run.pmfs[static_cast<std::size_t>(overflow_slot - 1)];
    double acc = 0.0;
    for (int k = 0; k <= cdf_max; ++k) s.cdf.push_back(acc += pmf.at(static_cast<std::size_t>(k)));
  }
  return s;
}

struct SweepRow {
  std::string status = "ok";
  std::string reason;
  std::vector<PointSummary> lanes;
};

int run_sweep(const std::string& engine, const std::optional<std::string>& config_path, const SweepSpec& spec,
              int cdf_max, const std::string& dump_dir, const Options& o, std::ostream& out) {
  // Expand every point up front so that invalid points are reported, not fatal.
  std::optional<ModelConfig> base;
  if (!spec.scenario) {
    if (!config_path) throw CLI::ValidationError("config", "sweep needs a configuration file or --scenario");
    base = load_config(*config_path);
  }
  const std::size_t n = spec.values.size();
  std::vector<std::vector<ModelConfig>> points(n);
  std::vector<SweepRow> rows(n);
  std::size_t lanes = 1;
  for (std::size_t k = 0; k < n; ++k) {
    try {
      points[k] = spec.scenario ? lane_scenario_expand(*spec.scenario, spec.values[k], spec.timing)
                                : std::vector<ModelConfig>{apply_parameter(*base, spec.parameter, spec.values[k])};
      lanes = std::max(lanes, points[k].size());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnknownScenario) throw;
      rows[k].status = std::string(to_string(e.code()));
      rows[k].reason = e.what();
    }
  }

  if (!dump_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dump_dir, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create directory '" + dump_dir + "': " + ec.message());
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t l = 0; l < points[k].size(); ++l) {
        char name[64];
        if (points[k].size() == 1) std::snprintf(name, sizeof name, "point_%03zu.json", k);
        else std::snprintf(name, sizeof name, "point_%03zu_lane%zu.json", k, l + 1);
        const auto path = std::filesystem::path(dump_dir) / name;
        std::ofstream f(path);
        f << config_to_json(points[k][l]).dump(2) << "\n";
        if (!f) throw Error(ErrorCode::IoFailure, "cannot write '" + path.string() + "'");
      }
    }
  }

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      if (points[k].empty()) continue;
      try {
        for (const auto& cfg : points[k]) rows[k].lanes.push_back(summarize(engine, validate_config(cfg), o, cdf_max));
      } catch (const Error& e) {
        rows[k].lanes.clear();
        rows[k].status = std::string(to_string(e.code()));
        rows[k].reason = e.what();
      }
    }
  };
  const int workers = std::clamp(o.workers > 0 ? o.workers : worker_count(), 1, static_cast<int>(n));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const auto& metrics = metric_columns(engine);
  const bool scenario = spec.scenario.has_value();
  const bool with_cdf = !scenario && engine != "simulate" && engine != "capacity" && cdf_max >= 0;
  std::vector<std::string> header{"schema_version", "index", scenario ? std::string("mu") : spec.parameter, "status"};
  if (scenario) {
    header.push_back("scenario");
    for (std::size_t l = 1; l <= lanes; ++l)
      for (const auto& m : metrics) header.push_back("lane" + std::to_string(l) + "_" + m);
    for (const char* t : {"arrival_load_total", "mean_queue_total", "mean_delay_total", "overflow_mean_total"})
      if (engine != "capacity" || std::string(t) == "arrival_load_total") header.push_back(t);
    if (engine == "capacity") header.push_back("r0_total");
  } else {
    header.insert(header.end(), metrics.begin(), metrics.end());
    if (engine != "capacity") header.push_back("slot_means");
    if (with_cdf)
      for (int k = 0; k <= cdf_max; ++k) header.push_back("cdf_" + std::to_string(k));
  }
  header.push_back("reason");
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";

  for (std::size_t k = 0; k < n; ++k) {
    const SweepRow& row = rows[k];
    std::vector<std::string> cells{std::to_string(kSchemaVersion), std::to_string(k), fmt(spec.values[k]), row.status};
    const bool ok = row.status == "ok";
    auto value = [&](std::size_t lane, const std::string& key) {
      if (!ok || lane >= row.lanes.size()) return std::string();
      const auto& v = row.lanes[lane].values;
      const auto it = v.find(key);
      return it == v.end() ? std::string() : fmt(it->second);
    };
    if (scenario) {
      cells.push_back(*spec.scenario);
      for (std::size_t l = 0; l < lanes; ++l)
        for (const auto& m : metrics) cells.push_back(value(l, m));
      double load = 0.0, queue = 0.0, overflow = 0.0, r0 = 0.0, per_slot_rate = 0.0;
      for (std::size_t l = 0; ok && l < row.lanes.size(); ++l) {
        const auto& v = row.lanes[l].values;
        const double c = static_cast<double>(points[k][l].cycle());
        load += v.at("arrival_load");
        per_slot_rate += v.at("arrival_load") / c;
        if (engine == "capacity") {
          r0 += v.at("r0");
        } else {
          queue += v.at("mean_queue");
          overflow += v.at("overflow_mean");
        }
      }
      cells.push_back(ok ? fmt(load) : "");
      if (engine == "capacity") {
        cells.push_back(ok ? fmt(r0) : "");
      } else {
        cells.push_back(ok ? fmt(queue) : "");
        cells.push_back(ok && per_slot_rate > 0.0 ? fmt(queue / per_slot_rate) : "");
        cells.push_back(ok ? fmt(overflow) : "");
      }
    } else {
      for (const auto& m : metrics) cells.push_back(value(0, m));
      if (engine != "capacity") {
        std::string joined;
        if (ok)
          for (std::size_t i = 0; i < row.lanes[0].slot_means.size(); ++i)
            joined += (i ? ";" : "") + fmt(row.lanes[0].slot_means[i]);
        cells.push_back(joined);
      }
      if (with_cdf)
        for (int c = 0; c <= cdf_max; ++c)
          cells.push_back(ok ? fmt(row.lanes[0].cdf[static_cast<std::size_t>(c)]) : "");
    }
    cells.push_back(csv_quote(row.reason));
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << "\n";
  }
  return kOk;
}

std::optional<Timing> parse_timing(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto v = SweepSpec::parse_values(text);
  if (v.size() != 3) throw CLI::ValidationError("--timing", "expected g1,g2,r");
  return Timing{as_int(v[0], "g1"), as_int(v[1], "g2"), as_int(v[2], "r")};
}

void print_slots_csv(const EngineRun& run, bool with_pmf, std::ostream& out) {
  with_pmf = with_pmf && !run.pmfs.empty();
  out << "schema_version,slot,mean";
  if (!run.variances.empty()) out << ",variance";
  if (!run.intervals.empty()) out << ",lo,hi";
  if (with_pmf) out << ",pmf";
  out << "\n";
  for (std::size_t i = 0; i < run.means.size(); ++i) {
    out << kSchemaVersion << "," << i + 1 << "," << fmt(run.means[i]);
    if (!run.variances.empty()) out << "," << fmt(run.variances[i]);
    if (!run.intervals.empty()) out << "," << fmt(run.intervals[i].lo) << "," << fmt(run.intervals[i].hi);
    if (with_pmf) {
      out << ",";
      for (std::size_t k = 0; k < run.pmfs[i].size(); ++k) out << (k ? ";" : "") << fmt(run.pmfs[i].weights[k]);
    }
    out << "\n";
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact and simulated analysis of fixed-cycle traffic-light queues with blocking"};
  app.name("bfctl");
  app.require_subcommand(1);
  Options o;
  std::string config, engine_a, engine_b, hcm, param, range, scenario, timing, dump_dir;
  int cdf_max = -1;

  auto add_format = [&](CLI::App* sub) { sub->add_flag("--csv", o.csv, "Emit CSV instead of JSON"); };
  auto add_nmax = [&](CLI::App* sub) {
    sub->add_option("--nmax", o.nmax, "Largest queue length of inverted pmfs")->check(CLI::Range(1, 1000000));
  };
  auto add_truncation = [&](CLI::App* sub) {
    sub->add_option("--truncation", o.truncation, "Oracle truncation level L")->check(CLI::PositiveNumber);
  };
  auto add_sim = [&](CLI::App* sub) {
    sub->add_option("--cycles", o.cycles, "Cycles per simulation run");
    sub->add_option("--runs", o.runs, "Independent simulation runs");
    sub->add_option("--seed", o.seed, "Simulation seed");
  };

  auto* cap = app.add_subcommand("capacity", "Capacity per cycle and stability verdict");
  cap->add_option("config", config, "Model configuration (JSON)");
  cap->add_option("--hcm", hcm, "Shared-lane capacity s_th,P_r,E_R,f_Rpb");
  add_format(cap);

  auto* sol = app.add_subcommand("solve", "Exact per-slot queue-length distributions");
  sol->add_option("config", config, "Model configuration (JSON)")->required();
  sol->add_flag("--pmf", o.pmf, "Include per-slot pmfs");
  add_nmax(sol);
  add_format(sol);

  auto* ora = app.add_subcommand("oracle", "Truncated Markov-chain reference solution");
  ora->add_option("config", config, "Model configuration (JSON)")->required();
  ora->add_flag("--pmf", o.pmf, "Include per-slot pmfs");
  add_truncation(ora);
  add_format(ora);

  auto* sim = app.add_subcommand("simulate", "Monte Carlo estimates with 95% confidence intervals");
  sim->add_option("config", config, "Model configuration (JSON)")->required();
  add_sim(sim);
  add_format(sim);

  auto* cmp = app.add_subcommand("compare", "Run two engines on one configuration and diff them");
  cmp->add_option("engine_a", engine_a, "solve, oracle or simulate")->required();
  cmp->add_option("engine_b", engine_b, "solve, oracle or simulate")->required();
  cmp->add_option("config", config, "Model configuration (JSON)")->required();
  add_nmax(cmp);
  add_truncation(cmp);
  add_sim(cmp);
  add_format(cmp);

  auto* swp = app.add_subcommand("sweep", "One CSV row per parameter value");
  swp->add_option("engine", engine_a, "capacity, solve, oracle or simulate")->required();
  swp->add_option("config", config, "Base model configuration (JSON)");
  swp->add_option("--param", param, "Parameter path: arrivals.mean, p, q, m, g1, g2, r");
  swp->add_option("--range", range, "start:stop:steps or a comma-separated list")->required();
  swp->add_option("--scenario", scenario, "Lane scenario swept over total rate mu: case1, case2, case2a, case2b");
  swp->add_option("--timing", timing, "Scenario timing g1,g2,r");
  swp->add_option("--cdf", cdf_max, "Add overflow-queue cdf columns for 0..K");
  swp->add_option("--dump-configs", dump_dir, "Write each point's configuration to this directory");
  add_nmax(swp);
  add_truncation(swp);
  add_sim(swp);

  std::vector<const char*> argv{"bfctl"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (*cap) {
      if (config.empty() && hcm.empty()) throw CLI::ValidationError("capacity", "needs a configuration or --hcm");
      json j{{"schema_version", kSchemaVersion}};
      if (!config.empty()) j["capacity"] = capacity_json(load_model(config));
      if (!hcm.empty()) {
        const auto v = SweepSpec::parse_values(hcm);
        if (v.size() != 4) throw CLI::ValidationError("--hcm", "expected s_th,P_r,E_R,f_Rpb");
        j["hcm"] = {{"s_th", v[0]}, {"P_r", v[1]}, {"E_R", v[2]}, {"f_Rpb", v[3]},
                    {"capacity", hcm_shared_lane_capacity(v[0], v[1], v[2], v[3])}};
      }
      if (o.csv) {
        out << "schema_version,r0,arrival_load,stable,rho,hcm_capacity\n" << kSchemaVersion << ",";
        if (j.contains("capacity")) {
          const auto& c = j["capacity"];
          out << fmt(c["r0"]) << "," << fmt(c["arrival_load"]) << "," << (c["stable"].get<bool>() ? 1 : 0) << ","
              << fmt(c["rho"]);
        } else {
          out << ",,,";
        }
        out << "," << (j.contains("hcm") ? fmt(j["hcm"]["capacity"]) : "") << "\n";
      } else {
        out << j.dump(2) << "\n";
      }
      return kOk;
    }
    if (*sol || *ora || *sim) {
      const std::string engine = *sol ? "solve" : *ora ? "oracle" : "simulate";
      const ValidatedModel model = load_model(config);
      const EngineRun run = run_engine(engine, model, o, o.pmf);
      if (o.csv) {
        print_slots_csv(run, o.pmf, out);
      } else {
        json j{{"schema_version", kSchemaVersion}, {"engine", engine}, {"config", config_to_json(model.config())}};
        if (engine != "simulate") j["capacity"] = capacity_json(model);
        j.update(run.detail);
        out << j.dump(2) << "\n";
      }
      return kOk;
    }
    if (*cmp) {
      check_engine(engine_a);
      check_engine(engine_b);
      const ValidatedModel model = load_model(config);
      const EngineRun a = run_engine(engine_a, model, o, true);
      const EngineRun b = run_engine(engine_b, model, o, true);
      const json j = compare_json(engine_a, engine_b, a, b);
      if (o.csv) {
        out << "schema_version,slot,mean_a,mean_b,diff\n";
        for (const auto& s : j["slots"])
          out << kSchemaVersion << "," << s["slot"] << "," << fmt(s["mean_a"]) << "," << fmt(s["mean_b"]) << ","
              << fmt(s["diff"]) << "\n";
      } else {
        out << j.dump(2) << "\n";
      }
      return kOk;
    }
    if (*swp) {
      if (engine_a != "capacity") check_engine(engine_a);
      SweepSpec spec;
      spec.values = SweepSpec::parse_values(range);
      if (!scenario.empty()) {
        if (!param.empty() && param != "mu") throw CLI::ValidationError("--param", "scenario sweeps vary mu only");
        spec.parameter = "mu";
        spec.scenario = scenario;
        spec.timing = parse_timing(timing);
      } else {
        if (param.empty()) throw CLI::ValidationError("--param", "sweep needs --param or --scenario");
        spec.parameter = param;
      }
      return run_sweep(engine_a, config.empty() ? std::nullopt : std::optional<std::string>(config), spec, cdf_max,
                       dump_dir, o, out);
    }
  } catch (const CLI::Error& e) {
    err << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << error_json(e).dump() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << error_json(e).dump() << "\n";
    return kNumerical;
  }
  return kUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace bfctl::cli
