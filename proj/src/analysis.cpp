#include "flowconv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "flowconv/errors.hpp"

namespace flowconv {

namespace {

void check_aligned(std::span<const Signal> predictions, std::span<const Signal> targets) {
  if (predictions.size() != targets.size()) throw ShapeError("metrics: prediction and target counts differ");
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i].rows() != targets[i].rows() || predictions[i].cols() != targets[i].cols())
      throw ShapeError("metrics: prediction and target shapes differ");
}

std::vector<std::vector<int>> all_fields(const SparseFlowMatrix& f) {
  std::vector<std::vector<int>> fields(f.n);
  for (const auto& e : f.entries) {
    if (e.src == e.dst) continue;
    fields[e.src].push_back(e.dst);
    fields[e.dst].push_back(e.src);
  }
  for (auto& r : fields) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
  }
  return fields;
}

/// in-flow vectors: sources[i] = (source region, weight) pairs ending in i.
std::vector<std::vector<std::pair<int, double>>> in_flows(const SparseFlowMatrix& f) {
  std::vector<std::vector<std::pair<int, double>>> cols(f.n);
  for (const auto& e : f.entries) cols[e.dst].emplace_back(e.src, e.weight);
  return cols;
}

int hour_of(std::int64_t epoch_seconds) {
  const std::int64_t day = 86400;
  return static_cast<int>((((epoch_seconds % day) + day) % day) / 3600);
}

}  // namespace

double rmse(std::span<const Signal> predictions, std::span<const Signal> targets) {
  check_aligned(predictions, targets);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    sum += (predictions[i] - targets[i]).squaredNorm();
    count += static_cast<std::size_t>(predictions[i].size());
  }
  return count ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
}

double mae(std::span<const Signal> predictions, std::span<const Signal> targets) {
  check_aligned(predictions, targets);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    sum += (predictions[i] - targets[i]).cwiseAbs().sum();
    count += static_cast<std::size_t>(predictions[i].size());
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

EvalReport evaluate(std::span<const Signal> predictions, std::span<const Signal> targets) {
  return {rmse(predictions, targets), mae(predictions, targets), predictions.size()};
}

Signal ha_predict(std::span<const Signal> history) {
  if (history.empty()) throw std::invalid_argument("ha_predict: empty history");
  Signal sum = history.front();
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i].rows() != sum.rows() || history[i].cols() != sum.cols())
      throw ShapeError("ha_predict: history tensors differ in shape");
    sum += history[i];
  }
  return sum / static_cast<double>(history.size());
}

double jaccard_churn(const SparseFlowMatrix& f_t, const SparseFlowMatrix& f_next) {
  if (f_t.n != f_next.n) throw ShapeError("jaccard_churn: region counts differ");
  if (f_t.n == 0) return 1.0;
  const auto a = all_fields(f_t);
  const auto b = all_fields(f_next);
  double total = 0.0;
  std::vector<int> common;
  for (int i = 0; i < f_t.n; ++i) {
    common.clear();
    std::set_intersection(a[i].begin(), a[i].end(), b[i].begin(), b[i].end(), std::back_inserter(common));
    const std::size_t uni = a[i].size() + b[i].size() - common.size();
    total += uni == 0 ? 1.0 : static_cast<double>(common.size()) / static_cast<double>(uni);
  }
  return total / f_t.n;
}

EmdChurn emd_churn(const SparseFlowMatrix& f_t, const SparseFlowMatrix& f_next, const GridSpec& grid) {
  if (f_t.n != f_next.n || f_t.n != grid.regions()) throw ShapeError("emd_churn: region counts differ");
  const auto a = in_flows(f_t);
  const auto b = in_flows(f_next);
  EmdChurn out;
  double sum = 0.0;
  for (int i = 0; i < f_t.n; ++i) {
    if (a[i].empty() || b[i].empty()) continue;
    std::vector<double> supply, demand;
    double ma = 0.0, mb = 0.0;
    for (const auto& [_, w] : a[i]) ma += w;
    for (const auto& [_, w] : b[i]) mb += w;
    for (const auto& [_, w] : a[i]) supply.push_back(w / ma);
    for (const auto& [_, w] : b[i]) demand.push_back(w / mb);
    Eigen::MatrixXd ground(supply.size(), demand.size());
    for (std::size_t s = 0; s < a[i].size(); ++s)
      for (std::size_t d = 0; d < b[i].size(); ++d) {
        const int rs = a[i][s].first, rd = b[i][d].first;
        const double dr = region_row(rs, grid.k) - region_row(rd, grid.k);
        const double dc = region_col(rs, grid.k) - region_col(rd, grid.k);
        ground(s, d) = std::sqrt(dr * dr + dc * dc);
      }
    sum += earth_movers_distance(supply, demand, ground);
    ++out.included_regions;
  }
  out.all_excluded = out.included_regions == 0;
  out.value = out.all_excluded ? 0.0 : sum / out.included_regions;
  return out;
}

std::vector<FlowChurn> churn_series(const IntervalSeries& series) {
  std::vector<FlowChurn> out;
  for (std::size_t i = 0; i + 1 < series.flows.size(); ++i) {
    FlowChurn c;
    c.t = static_cast<std::int64_t>(i) + 1;
    c.hour = hour_of(series.grid.interval_start(c.t));
    c.jaccard = jaccard_churn(series.flows[i], series.flows[i + 1]);
    const auto e = emd_churn(series.flows[i], series.flows[i + 1], series.grid);
    c.emd = e.value;
    c.emd_defined = !e.all_excluded;
    out.push_back(c);
  }
  return out;
}

WindowDataset filter_high_churn(const WindowDataset& dataset, std::span<const FlowChurn> churns, double threshold) {
  std::map<std::int64_t, const FlowChurn*> by_t;
  for (const auto& c : churns) by_t[c.t] = &c;
  WindowDataset out;
  out.history = dataset.history;
  for (const auto& w : dataset.windows) {
    const auto it = by_t.find(w.target_t - 1);
    if (it == by_t.end() || !it->second->emd_defined) continue;
    if (it->second->emd > threshold) out.windows.push_back(w);
  }
  return out;
}

std::array<HourlyChurn, 24> hourly_aggregate(std::span<const FlowChurn> churns, const GridSpec& grid) {
  if (grid.interval_seconds <= 0 || 86400 % grid.interval_seconds != 0)
    throw std::invalid_argument("hourly_aggregate: interval length must divide a day");
  std::array<HourlyChurn, 24> out{};
  for (int h = 0; h < 24; ++h) out[h].hour = h;
  for (const auto& c : churns) {
    auto& slot = out.at(static_cast<std::size_t>(c.hour));
    slot.jaccard += c.jaccard;
    ++slot.count;
    if (c.emd_defined) {
      slot.emd += c.emd;
      ++slot.emd_count;
    }
  }
  for (auto& slot : out) {
    if (slot.count) slot.jaccard /= static_cast<double>(slot.count);
    if (slot.emd_count) slot.emd /= static_cast<double>(slot.emd_count);
  }
  return out;
}

}  // namespace flowconv
