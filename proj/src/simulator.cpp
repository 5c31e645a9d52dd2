#include "bfctl/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

namespace bfctl {

namespace {

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Inverse-CDF sampler over a truncated pmf; the dropped tail maps to the
/// last support point.
class Sampler {
 public:
  explicit Sampler(const Pmf& pmf) {
    double acc = 0.0;
    for (double w : pmf.weights) cdf_.push_back(acc += w);
  }
  int operator()(double u) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
  }

 private:
  std::vector<double> cdf_;
};

struct RunResult {
  std::vector<double> slot_means;
  double overflow_mean = 0.0;
};

RunResult run_once(const ValidatedModel& model, const std::vector<Sampler>& arrivals, long ncycles, Xoshiro256pp rng) {
  const int c = model.c(), g1 = model.g1(), g2 = model.g2();
  const long m = model.m();
  std::vector<double> sums(static_cast<std::size_t>(c), 0.0);
  double overflow = 0.0;
  long X = 0;
  bool blocked = false;
  for (long cycle = 0; cycle < ncycles; ++cycle) {
    for (int slot = 0; slot < c; ++slot) {
      const long arr = arrivals[static_cast<std::size_t>(slot)](rng.uniform());
      if (slot < g1) {
        const bool pedestrians = rng.uniform() < model.q(slot + 1);
        const bool turning = rng.uniform() < model.p(slot + 1);
        if (blocked) {
          if (!pedestrians) blocked = false;  // blockage resolved
          else X += arr;
        } else if (turning && pedestrians) {
          blocked = true;
          X += arr;
        }
      } else if (slot < g1 + g2) {
        blocked = false;
      } else {
        X += arr;
      }

      if (slot < g1 + g2 && !blocked) {
        if (X < m) X = 0;
        else X += arr - m;
      }
      if (slot == g1 + g2 - 1) overflow += static_cast<double>(X);
      sums[static_cast<std::size_t>(slot)] += static_cast<double>(X);
    }
  }
  RunResult out;
  for (double s : sums) out.slot_means.push_back(s / static_cast<double>(ncycles));
  out.overflow_mean = overflow / static_cast<double>(ncycles);
  return out;
}

}  // namespace

Xoshiro256pp::Xoshiro256pp(std::uint64_t seed) {
  for (auto& w : s_) w = splitmix64(seed);
}

std::uint64_t Xoshiro256pp::next() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

void Xoshiro256pp::jump() {
  static constexpr std::uint64_t kJump[] = {0x180ec6d33cfd0abaULL, 0xd5a61266f0c9392cULL, 0xa9582618e03fc9aaULL,
                                            0x39abdc4529b1661cULL};
  std::array<std::uint64_t, 4> acc{};
  for (std::uint64_t word : kJump) {
    for (int b = 0; b < 64; ++b) {
      if (word & (std::uint64_t{1} << b))
        for (int k = 0; k < 4; ++k) acc[static_cast<std::size_t>(k)] ^= s_[static_cast<std::size_t>(k)];
      next();
    }
  }
  s_ = acc;
}

Estimate t_interval(const std::vector<double>& samples, double level) {
  const double n = static_cast<double>(samples.size());
  Estimate e;
  for (double x : samples) e.mean += x;
  e.mean /= n;
  double ss = 0.0;
  for (double x : samples) ss += (x - e.mean) * (x - e.mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double half = boost::math::quantile(dist, 0.5 + level / 2.0) * sd / std::sqrt(n);
  e.lo = e.mean - half;
  e.hi = e.mean + half;
  return e;
}

SimReport simulate(const ValidatedModel& model, const SimOptions& opts) {
  if (opts.cycles < 100) throw Error(ErrorCode::InvalidParameter, "at least 100 cycles per run are required");
  if (opts.runs < 2) throw Error(ErrorCode::InvalidParameter, "at least 2 runs are required");

  std::vector<Sampler> arrivals;
  for (int i = 1; i <= model.c(); ++i) arrivals.emplace_back(model.arrival_pmf(i));

  // Run k uses the seeded generator advanced by k jumps.
  std::vector<Xoshiro256pp> streams;
  Xoshiro256pp base(opts.seed);
  for (int k = 0; k < opts.runs; ++k) {
    streams.push_back(base);
    base.jump();
  }

  std::vector<RunResult> results(static_cast<std::size_t>(opts.runs));
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int k = next++; k < opts.runs; k = next++)
      results[static_cast<std::size_t>(k)] =
          run_once(model, arrivals, opts.cycles, streams[static_cast<std::size_t>(k)]);
  };
  int workers = opts.workers > 0 ? opts.workers : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, opts.runs);
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  SimReport rep;
  rep.runs = opts.runs;
  rep.cycles_per_run = opts.cycles;
  rep.seed = opts.seed;
  for (int i = 0; i < model.c(); ++i) {
    std::vector<double> xs;
    for (const auto& r : results) xs.push_back(r.slot_means[static_cast<std::size_t>(i)]);
    rep.per_slot_mean.push_back(t_interval(xs));
  }
  std::vector<double> ov;
  for (const auto& r : results) ov.push_back(r.overflow_mean);
  rep.overflow_mean = t_interval(ov);
  return rep;
}

}  // namespace bfctl
