#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "flowconv/tensor.hpp"

namespace flowconv {

/// Spatial grid and time axis. Rows run north to south (row 0 touches
/// lat_max), columns west to east (col 0 touches lon_min). Interval 1 covers
/// [t0, t0 + interval_seconds).
struct GridSpec {
  double lat_min = 0.0;
  double lat_max = 1.0;
  double lon_min = 0.0;
  double lon_max = 1.0;
  int m = 1;
  int k = 1;
  std::int64_t interval_seconds = 3600;
  std::int64_t t0 = 0;

  int regions() const { return m * k; }
  /// Throws std::invalid_argument.
  void validate() const;
  /// 1-based interval containing the epoch second `ts` (may be <= 0).
  std::int64_t interval_of(std::int64_t ts) const;
  /// Epoch second at which interval `t` starts.
  std::int64_t interval_start(std::int64_t t) const { return t0 + (t - 1) * interval_seconds; }
  bool operator==(const GridSpec&) const = default;
};

inline constexpr int kOutOfBounds = -1;

/// Region index for a point, or kOutOfBounds. The bounding box is closed.
int assign_region(double lat, double lon, const GridSpec& grid);

struct TripRecord {
  std::int64_t t_s = 0;
  std::int64_t t_e = 0;
  double start_lat = 0.0;
  double start_lon = 0.0;
  double end_lat = 0.0;
  double end_lon = 0.0;
  bool operator==(const TripRecord&) const = default;
};

struct AssignedTrip {
  int src = 0;
  int dst = 0;
  std::int64_t start_interval = 1;
  std::int64_t end_interval = 1;
};

struct RejectCounts {
  std::size_t out_of_bounds = 0;
  std::size_t reversed_time = 0;   // t_s > t_e
  std::size_t outside_axis = 0;    // before t0 or past a fixed interval count
  std::size_t malformed = 0;       // unparsable CSV rows
  std::size_t total() const { return out_of_bounds + reversed_time + outside_axis + malformed; }
};

/// Trips mapped onto the grid and time axis.
struct TripSet {
  int regions = 0;
  std::int64_t intervals = 0;
  std::vector<AssignedTrip> trips;
  RejectCounts rejected;
};

/// Maps trips onto regions and intervals. When `intervals` is unset the axis
/// extends to the latest end interval among accepted trips.
TripSet assign_trips(std::span<const TripRecord> trips, const GridSpec& grid,
                     std::optional<std::int64_t> intervals = std::nullopt);

struct FlowEntry {
  int src = 0;
  int dst = 0;
  double weight = 0.0;
  bool operator==(const FlowEntry&) const = default;
};

/// Directed weighted adjacency among regions for one interval. Entries are
/// sorted by (src, dst), unique, and strictly positive.
struct SparseFlowMatrix {
  int n = 0;
  std::vector<FlowEntry> entries;

  std::size_t edge_count() const { return entries.size(); }
  double total() const;
  double at(int src, int dst) const;
  /// Throws std::invalid_argument when an invariant does not hold.
  void validate() const;
  SparseFlowMatrix scaled(double c) const;
  Eigen::MatrixXd to_dense() const;
  /// Builds from (possibly unsorted, duplicated) entries; zeros are dropped
  /// and duplicates summed.
  static SparseFlowMatrix from_entries(int n, std::vector<FlowEntry> entries);
  static SparseFlowMatrix from_dense(const Eigen::MatrixXd& dense);
  bool operator==(const SparseFlowMatrix&) const = default;
};

/// Per-region (in-flow, out-flow) counts for one interval; channel 0 is
/// in-flow, channel 1 out-flow.
struct VolumeTensor {
  int m = 0;
  int k = 0;
  std::int64_t t = 0;
  Signal values;  // (m*k) x 2
};

/// Flow counts f^t: trips from src to dst that start no later than t and end at t.
SparseFlowMatrix build_flow_matrix(const TripSet& trips, std::int64_t t);

/// In-flow counts trips ending in t; out-flow counts trips starting in t
/// regardless of when they end.
VolumeTensor build_volume_tensor(const TripSet& trips, std::int64_t t, const GridSpec& grid);

/// Volumes and flows for every interval of a grid, in interval order.
struct IntervalSeries {
  GridSpec grid;
  std::vector<VolumeTensor> volumes;
  std::vector<SparseFlowMatrix> flows;
  RejectCounts rejected;

  std::size_t intervals() const { return volumes.size(); }
};

/// Single pass over the trips producing all intervals at once.
IntervalSeries aggregate(const TripSet& trips, const GridSpec& grid);

// ---- Trip CSV ----------------------------------------------------------------

inline constexpr const char* kTripCsvHeader = "t_s,t_e,start_lat,start_lon,end_lat,end_lon";

struct TripCsv {
  std::vector<TripRecord> trips;
  std::size_t malformed = 0;
};

/// Reads the trip CSV. A missing or wrong header throws FormatError; malformed
/// data rows are skipped and counted.
TripCsv read_trip_csv(std::istream& in);
TripCsv read_trip_csv_file(const std::string& path);
void write_trip_csv(std::ostream& out, std::span<const TripRecord> trips);

// ---- Normalization -----------------------------------------------------------

/// Min-Max scaling fitted on the training split. Values outside the fitted
/// range map outside [0, 1]; nothing is clamped.
struct MinMaxScaler {
  std::array<double, 2> vmin{0.0, 0.0};
  std::array<double, 2> vmax{0.0, 0.0};
  double fmin = 0.0;
  double fmax = 0.0;
  std::array<bool, 2> volume_degenerate{false, false};
  bool flow_degenerate = false;

  double apply_volume(double x, int channel) const;
  double invert_volume(double y, int channel) const;
  double apply_flow(double x) const;
  double invert_flow(double y) const;

  Signal apply(const Signal& volume) const;
  Signal invert(const Signal& scaled) const;
  /// Scales stored entries; entries that scale to <= 0 are dropped.
  SparseFlowMatrix apply(const SparseFlowMatrix& f) const;
  bool operator==(const MinMaxScaler&) const = default;
};

/// Flow statistics include the implicit zero entries, so fmin is 0 unless
/// every training matrix is fully dense.
MinMaxScaler fit_scaler(std::span<const VolumeTensor> volumes,
                        std::span<const SparseFlowMatrix> flows);

// ---- Sliding windows ---------------------------------------------------------

struct Window {
  std::vector<Signal> inputs;             // T volume signals, oldest first
  std::vector<SparseFlowMatrix> flows;    // T flow matrices aligned with inputs
  Signal target;
  std::int64_t target_t = 0;              // interval index of the target
};

struct WindowDataset {
  int history = 6;
  std::vector<Window> windows;
  std::string warning;

  std::size_t size() const { return windows.size(); }
  bool empty() const { return windows.empty(); }
};

/// One window per target position history..end-1 of the aligned sequences.
/// Too-short input yields an empty dataset with `warning` set.
WindowDataset build_dataset(std::span<const VolumeTensor> volumes,
                            std::span<const SparseFlowMatrix> flows, int history);

// ---- Processed dataset file (FCDS1) ------------------------------------------

void write_dataset(std::ostream& out, const IntervalSeries& series);
IntervalSeries read_dataset(std::istream& in);
void write_dataset_file(const std::string& path, const IntervalSeries& series);
IntervalSeries read_dataset_file(const std::string& path);

}  // namespace flowconv
