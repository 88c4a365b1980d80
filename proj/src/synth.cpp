#include "flowconv/synth.hpp"

#include <algorithm>
#include <stdexcept>

#include "flowconv/rng.hpp"

namespace flowconv {

namespace {

constexpr std::int64_t kDay = 86400;

void point_in_cell(int region, const GridSpec& g, Rng& rng, double& lat, double& lon) {
  const double h = (g.lat_max - g.lat_min) / g.m;
  const double w = (g.lon_max - g.lon_min) / g.k;
  const int row = region_row(region, g.k);
  const int col = region_col(region, g.k);
  lat = g.lat_max - (row + 0.5) * h + rng.uniform(-0.25, 0.25) * h;
  lon = g.lon_min + (col + 0.5) * w + rng.uniform(-0.25, 0.25) * w;
}

TripRecord make_trip(int src, int dst, std::int64_t t_s, std::int64_t t_e, const GridSpec& g, Rng& rng) {
  TripRecord t;
  t.t_s = t_s;
  t.t_e = t_e;
  point_in_cell(src, g, rng, t.start_lat, t.start_lon);
  point_in_cell(dst, g, rng, t.end_lat, t.end_lon);
  return t;
}

/// Both endpoints inside the interval starting at `start`.
TripRecord local_trip(int src, int dst, std::int64_t start, const GridSpec& g, Rng& rng) {
  const std::int64_t len = g.interval_seconds;
  const std::int64_t t_s = start + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(std::max<std::int64_t>(len / 2, 1))));
  const std::int64_t t_e = t_s + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(start + len - t_s)));
  return make_trip(src, dst, t_s, t_e, g, rng);
}

}  // namespace

void SynthConfig::validate() const {
  grid.validate();
  if (days < 1) throw std::invalid_argument("synth: days must be >= 1");
  if (kDay % grid.interval_seconds != 0) throw std::invalid_argument("synth: interval length must divide a day");
  if (grid.t0 % kDay != 0) throw std::invalid_argument("synth: t0 must fall on midnight");
  if (return_lag < 1) throw std::invalid_argument("synth: return lag must be >= 1");
  if (!(noise_rate >= 0.0)) throw std::invalid_argument("synth: noise rate must be >= 0");
  for (const auto& h : hubs) {
    if (!(h.rate >= 0.0)) throw std::invalid_argument("synth: hub rates must be >= 0");
    if (h.home < 0 || h.home >= grid.regions() || h.work < 0 || h.work >= grid.regions())
      throw std::invalid_argument("synth: hub cell outside grid");
  }
  const std::int64_t per_day = kDay / grid.interval_seconds;
  for (int hour : morning_hours) {
    if (hour < 0 || hour > 23) throw std::invalid_argument("synth: morning hours must be in [0, 23]");
    const std::int64_t last_slot = ((hour + 1) * 3600 - 1) / grid.interval_seconds;
    if (last_slot + return_lag >= per_day)
      throw std::invalid_argument("synth: return trips would cross midnight; shorten return_lag");
  }
}

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  const auto& g = cfg.grid;
  const std::int64_t per_day = kDay / g.interval_seconds;
  SynthResult out;
  out.intervals = per_day * cfg.days;
  Rng rng(cfg.seed);

  for (std::int64_t idx = 1; idx <= out.intervals; ++idx) {
    const std::int64_t start = g.interval_start(idx);
    const int hour = static_cast<int>((start % kDay) / 3600);
    const bool morning =
        std::find(cfg.morning_hours.begin(), cfg.morning_hours.end(), hour) != cfg.morning_hours.end();
    if (morning) {
      for (std::size_t h = 0; h < cfg.hubs.size(); ++h) {
        const auto& hub = cfg.hubs[h];
        const std::int64_t count = rng.poisson(hub.rate);
        if (count == 0) continue;
        const std::int64_t back = idx + cfg.return_lag;
        out.morning.push_back({static_cast<int>(h), idx, hub.home, hub.work, count});
        out.evening.push_back({static_cast<int>(h), back, hub.work, hub.home, count});
        for (std::int64_t c = 0; c < count; ++c) {
          out.trips.push_back(local_trip(hub.home, hub.work, start, g, rng));
          out.trips.push_back(local_trip(hub.work, hub.home, g.interval_start(back), g, rng));
        }
      }
    }
    const std::int64_t noise = rng.poisson(cfg.noise_rate);
    const std::int64_t axis_end = g.interval_start(out.intervals + 1) - 1;
    for (std::int64_t c = 0; c < noise; ++c) {
      const int src = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.regions())));
      const int dst = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.regions())));
      const std::int64_t t_s = start + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(g.interval_seconds)));
      const std::int64_t t_e =
          std::min(axis_end, t_s + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(g.interval_seconds))));
      out.trips.push_back(make_trip(src, dst, t_s, t_e, g, rng));
    }
  }
  std::stable_sort(out.trips.begin(), out.trips.end(),
                   [](const TripRecord& a, const TripRecord& b) { return a.t_s < b.t_s; });
  return out;
}

SynthConfig benchmark_scenario(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.grid.lat_min = 40.70;
  cfg.grid.lat_max = 40.80;
  cfg.grid.lon_min = -74.02;
  cfg.grid.lon_max = -73.92;
  cfg.grid.m = 4;
  cfg.grid.k = 4;
  cfg.grid.interval_seconds = 3600;
  cfg.grid.t0 = 1420070400;  // 2015-01-01T00:00:00Z
  cfg.days = 14;
  cfg.hubs = {{region_index(3, 0, 4), region_index(0, 3, 4), 12.0},
              {region_index(3, 3, 4), region_index(0, 0, 4), 10.0},
              {region_index(2, 1, 4), region_index(1, 2, 4), 8.0},
              {region_index(0, 1, 4), region_index(3, 2, 4), 6.0}};
  cfg.noise_rate = 6.0;
  cfg.return_lag = 10;
  cfg.morning_hours = {7, 8, 9};
  cfg.seed = seed;
  return cfg;
}

}  // namespace flowconv
