#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bfctl/model.hpp"

namespace bfctl {

/// xoshiro256++ (Blackman & Vigna). `jump()` advances by 2^128 draws, which
/// gives each simulation run its own non-overlapping stream.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  void jump();
  const std::array<std::uint64_t, 4>& state() const { return s_; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

struct Estimate {
  double mean = 0.0;
  double lo = 0.0;  // 95% confidence interval
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

struct SimReport {
  std::vector<Estimate> per_slot_mean;  // index 0 is slot 1
  Estimate overflow_mean;
  int runs = 0;
  long cycles_per_run = 0;
  std::uint64_t seed = 0;
};

struct SimOptions {
  long cycles = 10000;
  int runs = 100;
  std::uint64_t seed = 20240607;
  int workers = 0;  // 0 selects the hardware concurrency
};

/// Monte Carlo estimate of the per-slot mean queue lengths. Each run starts
/// from an empty queue and follows the reference slot logic: blockage
/// resolution and creation first, then up to m departures in unblocked green
/// slots (a queue below m clears together with the slot's arrivals).
SimReport simulate(const ValidatedModel& model, const SimOptions& opts = {});

/// Student-t interval from per-run means.
Estimate t_interval(const std::vector<double>& samples, double level = 0.95);

}  // namespace bfctl
