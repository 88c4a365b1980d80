#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "flowconv/analysis.hpp"
#include "flowconv/ingest.hpp"
#include "flowconv/model.hpp"
#include "flowconv/train.hpp"

namespace flowconv {

/// Chronological split of the interval axis.
struct SplitConfig {
  double train_fraction = 0.7;
  double val_fraction = 0.1;
};

/// Scaled train/validation/test windows. The scaler is fitted on the training
/// intervals only; each split forms its own contiguous segment.
struct PreparedData {
  MinMaxScaler scaler;
  WindowDataset train;
  WindowDataset validation;
  WindowDataset test;
};

PreparedData prepare_data(const IntervalSeries& series, int history, const SplitConfig& split);

/// Denormalized predictions for every window.
std::vector<Signal> predict(const Checkpoint& ckpt, const WindowDataset& scaled, int threads = 1);
std::vector<Signal> predict_ha(const WindowDataset& scaled, const MinMaxScaler& scaler);
std::vector<Signal> denormalized_targets(const WindowDataset& scaled, const MinMaxScaler& scaler);

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const WindowDataset& scaled, int threads = 1);
EvalReport evaluate_ha(const WindowDataset& scaled, const MinMaxScaler& scaler);

struct MetricsRow {
  std::string method;
  std::string variant;
  EvalReport report;
};

/// metrics.csv: method,variant,rmse,mae,n
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);

struct SweepRow {
  int layers = 0;
  EvalReport report;
  Checkpoint checkpoint;
};

/// Trains and evaluates one model per depth under a shared seed.
std::vector<SweepRow> layer_sweep(const PreparedData& data, const ModelSpec& base, const TrainConfig& config,
                                  std::span<const int> depths);

/// layer_sweep.csv: layers,rmse,mae
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

/// churn.csv: t,hour,jaccard,emd
void write_churn_csv(std::ostream& out, std::span<const FlowChurn> churns);
/// hourly.csv: hour,jaccard,emd,count
void write_hourly_csv(std::ostream& out, std::span<const HourlyChurn> hourly);

/// Fixed-precision rendering used in every CSV so reruns compare byte-for-byte.
std::string format_double(double v);

}  // namespace flowconv
