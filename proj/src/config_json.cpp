#include "bfctl/config_json.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace bfctl {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::ConfigParse, msg); }

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) fail("unknown key '" + key + "' in " + where);
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) fail(what + " must be a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& what) {
  if (!j.is_number_integer()) fail(what + " must be an integer");
  return j.get<int>();
}

std::vector<double> numbers(const json& j, const std::string& what) {
  if (!j.is_array()) fail(what + " must be an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], what + "[" + std::to_string(k) + "]"));
  return out;
}

std::vector<double> per_slot(const json& j, int n, const std::string& what) {
  if (j.is_number()) return std::vector<double>(static_cast<std::size_t>(std::max(n, 0)), j.get<double>());
  return numbers(j, what);
}

ArrivalSpec arrival_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return ArrivalSpec::poisson(j.get<double>());
  if (!j.is_object()) fail(what + " must be a number or an object");
  if (!j.contains("kind") || !j["kind"].is_string()) fail(what + " needs a string 'kind'");
  const std::string kind = j["kind"];
  if (kind == "poisson" || kind == "geometric") {
    reject_unknown(j, {"kind", "mean"}, what);
    if (!j.contains("mean")) fail(what + " needs 'mean'");
    const double mean = number(j["mean"], what + ".mean");
    return kind == "poisson" ? ArrivalSpec::poisson(mean) : ArrivalSpec::geometric(mean);
  }
  if (kind == "deterministic") {
    reject_unknown(j, {"kind", "count"}, what);
    if (!j.contains("count")) fail(what + " needs 'count'");
    return ArrivalSpec::deterministic(integer(j["count"], what + ".count"));
  }
  if (kind == "explicit") {
    reject_unknown(j, {"kind", "pmf"}, what);
    if (!j.contains("pmf")) fail(what + " needs 'pmf'");
    return ArrivalSpec::explicit_pmf(numbers(j["pmf"], what + ".pmf"));
  }
  fail(what + ": unknown arrival kind '" + kind + "'");
}

}  // namespace

ModelConfig config_from_json(const json& j) {
  if (!j.is_object()) fail("configuration must be a JSON object");
  reject_unknown(j, {"g1", "g2", "r", "m", "p", "q", "arrivals", "blocked_arrivals"}, "configuration");
  for (const char* key : {"g1", "g2", "r", "arrivals"})
    if (!j.contains(key)) fail(std::string("missing key '") + key + "'");

  ModelConfig cfg;
  cfg.g1 = integer(j["g1"], "g1");
  cfg.g2 = integer(j["g2"], "g2");
  cfg.r = integer(j["r"], "r");
  cfg.m = j.contains("m") ? integer(j["m"], "m") : 1;
  cfg.p = j.contains("p") ? per_slot(j["p"], cfg.g1, "p") : std::vector<double>(static_cast<std::size_t>(std::max(cfg.g1, 0)), 0.0);
  cfg.q = j.contains("q") ? per_slot(j["q"], cfg.g1, "q") : std::vector<double>(static_cast<std::size_t>(std::max(cfg.g1, 0)), 0.0);

  const json& a = j["arrivals"];
  if (a.is_array()) {
    for (std::size_t k = 0; k < a.size(); ++k) cfg.arrivals.push_back(arrival_from_json(a[k], "arrivals[" + std::to_string(k) + "]"));
  } else {
    cfg.arrivals.assign(static_cast<std::size_t>(std::max(cfg.cycle(), 0)), arrival_from_json(a, "arrivals"));
  }

  if (j.contains("blocked_arrivals")) {
    const json& b = j["blocked_arrivals"];
    if (!b.is_array()) fail("blocked_arrivals must be an array of pmfs");
    std::vector<Pmf> pmfs;
    for (std::size_t k = 0; k < b.size(); ++k) pmfs.push_back(Pmf{numbers(b[k], "blocked_arrivals[" + std::to_string(k) + "]"), 0.0});
    cfg.blocked_arrivals = std::move(pmfs);
  }
  return cfg;
}

ModelConfig config_from_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read configuration file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_text(ss.str());
}

json arrival_to_json(const ArrivalSpec& spec) {
  return std::visit(
      [](const auto& a) -> json {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, PoissonArrivals>) return {{"kind", "poisson"}, {"mean", a.mean}};
        else if constexpr (std::is_same_v<T, GeometricArrivals>) return {{"kind", "geometric"}, {"mean", a.mean}};
        else if constexpr (std::is_same_v<T, DeterministicArrivals>) return {{"kind", "deterministic"}, {"count", a.count}};
        else return {{"kind", "explicit"}, {"pmf", a.pmf.weights}};
      },
      spec.kind);
}

json config_to_json(const ModelConfig& cfg) {
  json j{{"g1", cfg.g1}, {"g2", cfg.g2}, {"r", cfg.r}, {"m", cfg.m}, {"p", cfg.p}, {"q", cfg.q}};
  json arr = json::array();
  for (const auto& a : cfg.arrivals) arr.push_back(arrival_to_json(a));
  j["arrivals"] = std::move(arr);
  if (cfg.blocked_arrivals) {
    json b = json::array();
    for (const auto& pmf : *cfg.blocked_arrivals) b.push_back(pmf.weights);
    j["blocked_arrivals"] = std::move(b);
  }
  return j;
}

}  // namespace bfctl
