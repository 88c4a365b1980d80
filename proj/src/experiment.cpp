#include "flowconv/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "parallel.hpp"

namespace flowconv {

namespace {

WindowDataset segment_windows(const IntervalSeries& series, const MinMaxScaler& scaler, std::size_t begin,
                              std::size_t end, int history) {
  std::vector<VolumeTensor> volumes;
  std::vector<SparseFlowMatrix> flows;
  for (std::size_t i = begin; i < end; ++i) {
    VolumeTensor v = series.volumes[i];
    v.values = scaler.apply(v.values);
    volumes.push_back(std::move(v));
    flows.push_back(scaler.apply(series.flows[i]));
  }
  return build_dataset(volumes, flows, history);
}

}  // namespace

PreparedData prepare_data(const IntervalSeries& series, int history, const SplitConfig& split) {
  if (split.train_fraction <= 0.0 || split.val_fraction < 0.0 || split.train_fraction + split.val_fraction > 1.0)
    throw std::invalid_argument("split fractions must satisfy 0 < train, 0 <= val, train + val <= 1");
  const std::size_t total = series.intervals();
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(total) * split.train_fraction));
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(total) * split.val_fraction));
  if (n_train < static_cast<std::size_t>(history) + 1)
    throw std::invalid_argument("training split has " + std::to_string(n_train) + " intervals, need at least " +
                                std::to_string(history + 1));
  PreparedData data;
  data.scaler = fit_scaler(std::span(series.volumes).first(n_train), std::span(series.flows).first(n_train));
  data.train = segment_windows(series, data.scaler, 0, n_train, history);
  data.validation = segment_windows(series, data.scaler, n_train, n_train + n_val, history);
  data.test = segment_windows(series, data.scaler, n_train + n_val, total, history);
  return data;
}

std::vector<Signal> predict(const Checkpoint& ckpt, const WindowDataset& scaled, int threads) {
  const auto windows = prepare_windows(scaled);
  std::vector<Signal> out(windows.size());
  detail::parallel_for(windows.size(), threads, [&](std::size_t i) {
    out[i] = ckpt.scaler.invert(forward(windows[i].window->inputs, windows[i].transitions, ckpt.spec, ckpt.params));
  });
  return out;
}

std::vector<Signal> predict_ha(const WindowDataset& scaled, const MinMaxScaler& scaler) {
  std::vector<Signal> out;
  out.reserve(scaled.size());
  for (const auto& w : scaled.windows) out.push_back(scaler.invert(ha_predict(w.inputs)));
  return out;
}

std::vector<Signal> denormalized_targets(const WindowDataset& scaled, const MinMaxScaler& scaler) {
  std::vector<Signal> out;
  out.reserve(scaled.size());
  for (const auto& w : scaled.windows) out.push_back(scaler.invert(w.target));
  return out;
}

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const WindowDataset& scaled, int threads) {
  return evaluate(predict(ckpt, scaled, threads), denormalized_targets(scaled, ckpt.scaler));
}

EvalReport evaluate_ha(const WindowDataset& scaled, const MinMaxScaler& scaler) {
  return evaluate(predict_ha(scaled, scaler), denormalized_targets(scaled, scaler));
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << "method,variant,rmse,mae,n\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.variant << ',' << format_double(r.report.rmse) << ','
        << format_double(r.report.mae) << ',' << r.report.instances << '\n';
}

std::vector<SweepRow> layer_sweep(const PreparedData& data, const ModelSpec& base, const TrainConfig& config,
                                  std::span<const int> depths) {
  std::vector<SweepRow> rows;
  for (int depth : depths) {
    ModelSpec spec = base;
    spec.layers = depth;
    auto result = train(data.train, &data.validation, spec, config, data.scaler);
    SweepRow row;
    row.layers = depth;
    row.report = evaluate_checkpoint(result.checkpoint, data.test, config.threads);
    row.checkpoint = std::move(result.checkpoint);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "layers,rmse,mae\n";
  for (const auto& r : rows)
    out << r.layers << ',' << format_double(r.report.rmse) << ',' << format_double(r.report.mae) << '\n';
}

void write_churn_csv(std::ostream& out, std::span<const FlowChurn> churns) {
  out << "t,hour,jaccard,emd\n";
  for (const auto& c : churns)
    out << c.t << ',' << c.hour << ',' << format_double(c.jaccard) << ','
        << (c.emd_defined ? format_double(c.emd) : std::string()) << '\n';
}

void write_hourly_csv(std::ostream& out, std::span<const HourlyChurn> hourly) {
  out << "hour,jaccard,emd,count\n";
  for (const auto& h : hourly)
    out << h.hour << ',' << format_double(h.jaccard) << ',' << format_double(h.emd) << ',' << h.count << '\n';
}

}  // namespace flowconv
