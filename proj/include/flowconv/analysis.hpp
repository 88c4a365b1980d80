#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "flowconv/ingest.hpp"

namespace flowconv {

struct EvalReport {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t instances = 0;
};

/// Over every (region, channel, instance) entry.
double rmse(std::span<const Signal> predictions, std::span<const Signal> targets);
double mae(std::span<const Signal> predictions, std::span<const Signal> targets);
EvalReport evaluate(std::span<const Signal> predictions, std::span<const Signal> targets);

/// Historical average: elementwise mean of the history tensors.
Signal ha_predict(std::span<const Signal> history);

/// Mean over regions of the Jaccard similarity between consecutive receptive
/// fields; a region whose fields are both empty scores 1.
double jaccard_churn(const SparseFlowMatrix& f_t, const SparseFlowMatrix& f_next);

/// Exact earth mover's distance between two distributions of equal total mass
/// under `ground` (supply i -> demand j cost). Solved as a transportation
/// problem by successive shortest paths.
double earth_movers_distance(std::span<const double> supply, std::span<const double> demand,
                             const Eigen::MatrixXd& ground);

struct EmdChurn {
  double value = 0.0;
  int included_regions = 0;
  bool all_excluded = false;
};

/// Mean over regions of the EMD between unit-normalized in-flow vectors at t
/// and t+1, with ground distance between source-region cell centres in cell
/// units. Regions with an empty in-flow vector on either side are skipped.
EmdChurn emd_churn(const SparseFlowMatrix& f_t, const SparseFlowMatrix& f_next, const GridSpec& grid);

/// Churn between interval t and t+1.
struct FlowChurn {
  std::int64_t t = 0;
  int hour = 0;
  double jaccard = 1.0;
  double emd = 0.0;
  bool emd_defined = true;
};

std::vector<FlowChurn> churn_series(const IntervalSeries& series);

/// Windows whose flow change into the target interval, i.e. the churn entry
/// with t == target_t - 1, is strictly above `threshold`.
WindowDataset filter_high_churn(const WindowDataset& dataset, std::span<const FlowChurn> churns, double threshold);

struct HourlyChurn {
  int hour = 0;
  double jaccard = 0.0;
  double emd = 0.0;
  std::size_t count = 0;      // churn entries in this hour
  std::size_t emd_count = 0;  // entries with a defined EMD
};

/// Averages by hour of day of the interval start. Throws std::invalid_argument
/// unless interval_seconds divides a day.
std::array<HourlyChurn, 24> hourly_aggregate(std::span<const FlowChurn> churns, const GridSpec& grid);

}  // namespace flowconv
