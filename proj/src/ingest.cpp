#include "flowconv/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string_view>

#include "flowconv/errors.hpp"

namespace flowconv {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

void check_interval(const TripSet& trips, std::int64_t t) {
  if (t < 1 || t > trips.intervals)
    throw RangeError("interval " + std::to_string(t) + " outside time axis [1, " +
                     std::to_string(trips.intervals) + "]");
}

}  // namespace

void GridSpec::validate() const {
  if (!(lat_min < lat_max)) throw std::invalid_argument("grid: lat_min must be < lat_max");
  if (!(lon_min < lon_max)) throw std::invalid_argument("grid: lon_min must be < lon_max");
  if (m < 1 || k < 1) throw std::invalid_argument("grid: m and k must be >= 1");
  if (interval_seconds < 1) throw std::invalid_argument("grid: interval_seconds must be positive");
}

std::int64_t GridSpec::interval_of(std::int64_t ts) const { return floor_div(ts - t0, interval_seconds) + 1; }

int assign_region(double lat, double lon, const GridSpec& grid) {
  if (!(lat >= grid.lat_min && lat <= grid.lat_max && lon >= grid.lon_min && lon <= grid.lon_max))
    return kOutOfBounds;
  const double row_f = (grid.lat_max - lat) / (grid.lat_max - grid.lat_min) * grid.m;
  const double col_f = (lon - grid.lon_min) / (grid.lon_max - grid.lon_min) * grid.k;
  const int row = std::min(static_cast<int>(std::floor(row_f)), grid.m - 1);
  const int col = std::min(static_cast<int>(std::floor(col_f)), grid.k - 1);
  return region_index(row, col, grid.k);
}

TripSet assign_trips(std::span<const TripRecord> trips, const GridSpec& grid,
                     std::optional<std::int64_t> intervals) {
  grid.validate();
  TripSet out;
  out.regions = grid.regions();
  out.trips.reserve(trips.size());
  std::int64_t last = 0;
  for (const auto& trip : trips) {
    if (trip.t_s > trip.t_e) {
      ++out.rejected.reversed_time;
      continue;
    }
    const int src = assign_region(trip.start_lat, trip.start_lon, grid);
    const int dst = assign_region(trip.end_lat, trip.end_lon, grid);
    if (src == kOutOfBounds || dst == kOutOfBounds) {
      ++out.rejected.out_of_bounds;
      continue;
    }
    AssignedTrip a{src, dst, grid.interval_of(trip.t_s), grid.interval_of(trip.t_e)};
    if (a.start_interval < 1 || (intervals && a.end_interval > *intervals)) {
      ++out.rejected.outside_axis;
      continue;
    }
    last = std::max(last, a.end_interval);
    out.trips.push_back(a);
  }
  out.intervals = intervals.value_or(last);
  return out;
}

// ---- SparseFlowMatrix ----------------------------------------------------------

double SparseFlowMatrix::total() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.weight;
  return s;
}

double SparseFlowMatrix::at(int src, int dst) const {
  const auto it = std::lower_bound(entries.begin(), entries.end(), std::pair{src, dst},
                                   [](const FlowEntry& e, const std::pair<int, int>& key) {
                                     return std::pair{e.src, e.dst} < key;
                                   });
  if (it != entries.end() && it->src == src && it->dst == dst) return it->weight;
  return 0.0;
}

void SparseFlowMatrix::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
      throw std::invalid_argument("flow matrix: entry index out of range");
    if (!(e.weight > 0.0) || !std::isfinite(e.weight))
      throw std::invalid_argument("flow matrix: stored weights must be positive and finite");
    if (i > 0 && !(std::pair{entries[i - 1].src, entries[i - 1].dst} < std::pair{e.src, e.dst}))
      throw std::invalid_argument("flow matrix: entries must be sorted and unique");
  }
}

SparseFlowMatrix SparseFlowMatrix::scaled(double c) const {
  SparseFlowMatrix out{n, entries};
  for (auto& e : out.entries) e.weight *= c;
  if (!(c > 0.0)) out.entries.clear();
  return out;
}

Eigen::MatrixXd SparseFlowMatrix::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : entries) d(e.src, e.dst) = e.weight;
  return d;
}

SparseFlowMatrix SparseFlowMatrix::from_entries(int n, std::vector<FlowEntry> raw) {
  std::sort(raw.begin(), raw.end(), [](const FlowEntry& a, const FlowEntry& b) {
    return std::pair{a.src, a.dst} < std::pair{b.src, b.dst};
  });
  SparseFlowMatrix out;
  out.n = n;
  for (const auto& e : raw) {
    if (!out.entries.empty() && out.entries.back().src == e.src && out.entries.back().dst == e.dst)
      out.entries.back().weight += e.weight;
    else
      out.entries.push_back(e);
  }
  std::erase_if(out.entries, [](const FlowEntry& e) { return !(e.weight > 0.0); });
  return out;
}

SparseFlowMatrix SparseFlowMatrix::from_dense(const Eigen::MatrixXd& dense) {
  SparseFlowMatrix out;
  out.n = static_cast<int>(dense.rows());
  for (int i = 0; i < dense.rows(); ++i)
    for (int j = 0; j < dense.cols(); ++j)
      if (dense(i, j) > 0.0) out.entries.push_back({i, j, dense(i, j)});
  return out;
}

// ---- Aggregation -----------------------------------------------------------------

SparseFlowMatrix build_flow_matrix(const TripSet& trips, std::int64_t t) {
  check_interval(trips, t);
  std::vector<FlowEntry> raw;
  for (const auto& trip : trips.trips)
    if (trip.end_interval == t && trip.start_interval <= t) raw.push_back({trip.src, trip.dst, 1.0});
  return SparseFlowMatrix::from_entries(trips.regions, std::move(raw));
}

VolumeTensor build_volume_tensor(const TripSet& trips, std::int64_t t, const GridSpec& grid) {
  check_interval(trips, t);
  if (grid.regions() != trips.regions) throw ShapeError("build_volume_tensor: grid does not match trip set");
  VolumeTensor v{grid.m, grid.k, t, Signal::Zero(grid.regions(), 2)};
  for (const auto& trip : trips.trips) {
    if (trip.end_interval == t) v.values(trip.dst, 0) += 1.0;
    if (trip.start_interval == t) v.values(trip.src, 1) += 1.0;
  }
  return v;
}

IntervalSeries aggregate(const TripSet& trips, const GridSpec& grid) {
  if (grid.regions() != trips.regions) throw ShapeError("aggregate: grid does not match trip set");
  IntervalSeries series;
  series.grid = grid;
  series.rejected = trips.rejected;
  const auto count = static_cast<std::size_t>(trips.intervals);
  series.volumes.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    series.volumes.push_back({grid.m, grid.k, static_cast<std::int64_t>(i) + 1, Signal::Zero(grid.regions(), 2)});
  std::vector<std::vector<FlowEntry>> raw(count);
  for (const auto& trip : trips.trips) {
    const auto end = static_cast<std::size_t>(trip.end_interval - 1);
    const auto start = static_cast<std::size_t>(trip.start_interval - 1);
    series.volumes[end].values(trip.dst, 0) += 1.0;
    series.volumes[start].values(trip.src, 1) += 1.0;
    raw[end].push_back({trip.src, trip.dst, 1.0});
  }
  series.flows.reserve(count);
  for (auto& r : raw) series.flows.push_back(SparseFlowMatrix::from_entries(grid.regions(), std::move(r)));
  return series;
}

// ---- Trip CSV ----------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

template <typename T>
bool parse_field(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool parse_row(std::string_view line, TripRecord& rec) {
  std::string_view fields[6];
  for (int i = 0; i < 6; ++i) {
    const auto pos = line.find(',');
    if (i < 5) {
      if (pos == std::string_view::npos) return false;
      fields[i] = line.substr(0, pos);
      line.remove_prefix(pos + 1);
    } else {
      if (pos != std::string_view::npos) return false;
      fields[i] = line;
    }
  }
  return parse_field(fields[0], rec.t_s) && parse_field(fields[1], rec.t_e) &&
         parse_field(fields[2], rec.start_lat) && parse_field(fields[3], rec.start_lon) &&
         parse_field(fields[4], rec.end_lat) && parse_field(fields[5], rec.end_lon) &&
         std::isfinite(rec.start_lat) && std::isfinite(rec.start_lon) && std::isfinite(rec.end_lat) &&
         std::isfinite(rec.end_lon);
}

void append_double(std::string& buf, double v) {
  char tmp[64];
  const auto [ptr, ec] = std::to_chars(tmp, tmp + sizeof tmp, v);
  buf.append(tmp, ptr);
}

}  // namespace

TripCsv read_trip_csv(std::istream& in) {
  TripCsv out;
  std::string line;
  if (!std::getline(in, line)) return out;
  std::string_view header = line;
  if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
  if (trim(header) != kTripCsvHeader)
    throw FormatError("trip CSV: expected header '" + std::string(kTripCsvHeader) + "'");
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    TripRecord rec;
    if (parse_row(line, rec))
      out.trips.push_back(rec);
    else
      ++out.malformed;
  }
  return out;
}

TripCsv read_trip_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trip file '" + path + "'");
  return read_trip_csv(in);
}

void write_trip_csv(std::ostream& out, std::span<const TripRecord> trips) {
  std::string buf;
  buf.append(kTripCsvHeader).push_back('\n');
  for (const auto& t : trips) {
    buf.append(std::to_string(t.t_s)).push_back(',');
    buf.append(std::to_string(t.t_e)).push_back(',');
    append_double(buf, t.start_lat);
    buf.push_back(',');
    append_double(buf, t.start_lon);
    buf.push_back(',');
    append_double(buf, t.end_lat);
    buf.push_back(',');
    append_double(buf, t.end_lon);
    buf.push_back('\n');
  }
  out << buf;
}

// ---- Windows ---------------------------------------------------------------------

WindowDataset build_dataset(std::span<const VolumeTensor> volumes, std::span<const SparseFlowMatrix> flows,
                            int history) {
  if (volumes.size() != flows.size()) throw ShapeError("build_dataset: volumes and flows are not aligned");
  if (history < 1) throw std::invalid_argument("build_dataset: history must be >= 1");
  WindowDataset ds;
  ds.history = history;
  const auto T = static_cast<std::size_t>(history);
  if (volumes.size() < T + 1) {
    ds.warning = "only " + std::to_string(volumes.size()) + " intervals, need at least " + std::to_string(T + 1) +
                 " for history " + std::to_string(history);
    return ds;
  }
  for (std::size_t target = T; target < volumes.size(); ++target) {
    Window w;
    w.inputs.reserve(T);
    w.flows.reserve(T);
    for (std::size_t i = target - T; i < target; ++i) {
      w.inputs.push_back(volumes[i].values);
      w.flows.push_back(flows[i]);
    }
    w.target = volumes[target].values;
    w.target_t = volumes[target].t;
    ds.windows.push_back(std::move(w));
  }
  return ds;
}

}  // namespace flowconv
