#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowconv/ingest.hpp"

namespace flowconv {

/// A commuter corridor: trips home -> work each morning interval, returning
/// `return_lag` intervals later.
struct Hub {
  int home = 0;  // region index
  int work = 0;
  double rate = 0.0;  // mean trips per morning interval
};

struct SynthConfig {
  GridSpec grid;
  int days = 14;
  std::vector<Hub> hubs;
  double noise_rate = 0.0;  // mean background trips per interval
  int return_lag = 10;      // intervals
  std::vector<int> morning_hours{7, 8, 9};
  std::uint64_t seed = 7;

  void validate() const;
};

/// One scheduled pulse of commuter trips.
struct Pulse {
  int hub = 0;
  std::int64_t interval = 0;  // start == end interval of every trip in it
  int src = 0;
  int dst = 0;
  std::int64_t count = 0;
};

struct SynthResult {
  std::vector<TripRecord> trips;
  std::vector<Pulse> morning;
  std::vector<Pulse> evening;
  std::int64_t intervals = 0;
};

SynthResult generate(const SynthConfig& config);

/// The 4-hub, 4 x 4, 14-day benchmark scenario.
SynthConfig benchmark_scenario(std::uint64_t seed = 7);

}  // namespace flowconv
