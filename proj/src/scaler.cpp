#include "flowconv/ingest.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace flowconv {

namespace {

double forward_scale(double x, double lo, double hi, bool degenerate) {
  return degenerate ? 0.0 : (x - lo) / (hi - lo);
}

double inverse_scale(double y, double lo, double hi, bool degenerate) {
  return degenerate ? lo : y * (hi - lo) + lo;
}

}  // namespace

double MinMaxScaler::apply_volume(double x, int channel) const {
  return forward_scale(x, vmin[channel], vmax[channel], volume_degenerate[channel]);
}

double MinMaxScaler::invert_volume(double y, int channel) const {
  return inverse_scale(y, vmin[channel], vmax[channel], volume_degenerate[channel]);
}

double MinMaxScaler::apply_flow(double x) const { return forward_scale(x, fmin, fmax, flow_degenerate); }

double MinMaxScaler::invert_flow(double y) const { return inverse_scale(y, fmin, fmax, flow_degenerate); }

Signal MinMaxScaler::apply(const Signal& volume) const {
  Signal out(volume.rows(), volume.cols());
  for (Eigen::Index i = 0; i < volume.rows(); ++i)
    for (int c = 0; c < 2; ++c) out(i, c) = apply_volume(volume(i, c), c);
  return out;
}

Signal MinMaxScaler::invert(const Signal& scaled) const {
  Signal out(scaled.rows(), scaled.cols());
  for (Eigen::Index i = 0; i < scaled.rows(); ++i)
    for (int c = 0; c < 2; ++c) out(i, c) = invert_volume(scaled(i, c), c);
  return out;
}

SparseFlowMatrix MinMaxScaler::apply(const SparseFlowMatrix& f) const {
  SparseFlowMatrix out{f.n, {}};
  out.entries.reserve(f.entries.size());
  for (const auto& e : f.entries) {
    const double w = apply_flow(e.weight);
    if (w > 0.0) out.entries.push_back({e.src, e.dst, w});
  }
  return out;
}

MinMaxScaler fit_scaler(std::span<const VolumeTensor> volumes, std::span<const SparseFlowMatrix> flows) {
  if (volumes.empty()) throw std::invalid_argument("fit_scaler: no training intervals");
  MinMaxScaler s;
  constexpr double inf = std::numeric_limits<double>::infinity();
  s.vmin = {inf, inf};
  s.vmax = {-inf, -inf};
  for (const auto& v : volumes)
    for (int c = 0; c < 2; ++c) {
      s.vmin[c] = std::min(s.vmin[c], v.values.col(c).minCoeff());
      s.vmax[c] = std::max(s.vmax[c], v.values.col(c).maxCoeff());
    }
  for (int c = 0; c < 2; ++c) s.volume_degenerate[c] = !(s.vmax[c] > s.vmin[c]);

  double fmin = inf;
  double fmax = -inf;
  for (const auto& f : flows) {
    const auto dense_size = static_cast<std::size_t>(f.n) * static_cast<std::size_t>(f.n);
    if (f.entries.size() < dense_size) fmin = std::min(fmin, 0.0);
    for (const auto& e : f.entries) {
      fmin = std::min(fmin, e.weight);
      fmax = std::max(fmax, e.weight);
    }
  }
  if (flows.empty()) fmin = fmax = 0.0;
  s.fmin = fmin;
  s.fmax = fmax;
  s.flow_degenerate = !(s.fmax > s.fmin);
  return s;
}

}  // namespace flowconv
