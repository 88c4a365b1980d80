#include "flowconv/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "flowconv/rng.hpp"
#include "parallel.hpp"

namespace flowconv {

double loss(const Signal& prediction, const Signal& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
    throw ShapeError("loss: prediction and target shapes differ");
  return (prediction - target).squaredNorm();
}

OptimizerState make_optimizer(const ParamSet& params, const AdamConfig& config) {
  return OptimizerState{config, 0, params.zeros_like(), params.zeros_like()};
}

void adam_step(ParamSet& params, const ParamSet& grads, OptimizerState& state) {
  if (grads.count() != params.count() || state.first_moment.count() != params.count())
    throw ShapeError("adam_step: parameter, gradient and moment sets differ");
  const auto& c = state.config;
  ++state.step;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.count(); ++i) {
    auto& p = params[i].values;
    const auto& g = grads[i].values;
    auto& m = state.first_moment[i].values;
    auto& v = state.second_moment[i].values;
    if (g.size() != p.size()) throw ShapeError("adam_step: gradient size differs for " + params[i].name);
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    p.array() -= c.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + c.eps);
  }
}

std::vector<PreparedWindow> prepare_windows(const WindowDataset& dataset) {
  std::vector<PreparedWindow> out;
  out.reserve(dataset.size());
  for (const auto& w : dataset.windows) out.push_back({&w, make_transitions(w.flows)});
  return out;
}

using detail::parallel_for;

WindowGradient batch_gradient(std::span<const PreparedWindow* const> batch, const ModelSpec& spec,
                              const ParamSet& params, int threads) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  std::vector<WindowGradient> parts(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    const auto& pw = *batch[i];
    parts[i] = backward(pw.window->inputs, pw.transitions, pw.window->target, spec, params);
  });
  WindowGradient total;
  total.grads = params.zeros_like();
  for (const auto& p : parts) {
    total.loss += p.loss;
    total.grads.add_scaled(p.grads, 1.0);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  total.loss *= inv;
  for (auto& a : total.grads) a.values *= inv;
  return total;
}

double dataset_loss(std::span<const PreparedWindow> windows, const ModelSpec& spec, const ParamSet& params,
                    int threads) {
  if (windows.empty()) return 0.0;
  std::vector<double> losses(windows.size());
  parallel_for(windows.size(), threads, [&](std::size_t i) {
    const auto& pw = windows[i];
    losses[i] = loss(forward(pw.window->inputs, pw.transitions, spec, params), pw.window->target);
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(windows.size());
}

TrainResult train(const WindowDataset& train_set, const WindowDataset* validation, const ModelSpec& spec,
                  const TrainConfig& config, const MinMaxScaler& scaler, const EpochCallback& on_epoch) {
  spec.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training dataset");
  if (config.batch < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (config.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (train_set.history != spec.history) throw ShapeError("train: dataset history differs from model history");

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.spec = spec;
  ckpt.scaler = scaler;
  ckpt.seed = config.seed;
  ckpt.params = make_params(spec);
  glorot_init(ckpt.params, spec, config.seed);

  ParamSet params = ckpt.params;
  OptimizerState opt = make_optimizer(params, AdamConfig{.lr = config.lr});
  const auto windows = prepare_windows(train_set);
  const auto val_windows =
      validation && !validation->empty() ? prepare_windows(*validation) : std::vector<PreparedWindow>{};

  Rng order_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(windows.size());
  std::vector<const PreparedWindow*> batch;
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&windows[order[i]]);
      WindowGradient g = batch_gradient(batch, spec, params, config.threads);
      if (!std::isfinite(g.loss) || !g.grads.all_finite())
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch starting at " +
                           std::to_string(start) + " (loss " + std::to_string(g.loss) + ")");
      if (config.clip_norm > 0.0) {
        const double norm = std::sqrt(g.grads.squared_norm());
        if (norm > config.clip_norm)
          for (auto& a : g.grads) a.values *= config.clip_norm / norm;
      }
      adam_step(params, g.grads, opt);
      epoch_loss += g.loss * static_cast<double>(stop - start);
    }
    EpochLog entry{epoch, epoch_loss / static_cast<double>(windows.size()), std::nullopt};
    if (!val_windows.empty()) {
      entry.val_loss = dataset_loss(val_windows, spec, params, config.threads);
      if (*entry.val_loss < best_val) {
        best_val = *entry.val_loss;
        ckpt.params = params;
        ckpt.epoch = epoch;
      }
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  if (val_windows.empty()) {
    ckpt.params = params;
    ckpt.epoch = config.epochs;
  }
  if (ckpt.epoch == config.epochs && config.epochs > 0) ckpt.optimizer = opt;
  return result;
}

void write_loss_log(std::ostream& out, std::span<const EpochLog> log) {
  out << "epoch,train_loss,val_loss\n";
  char buf[64];
  for (const auto& e : log) {
    out << e.epoch << ',';
    std::snprintf(buf, sizeof buf, "%.17g", e.train_loss);
    out << buf << ',';
    if (e.val_loss) {
      std::snprintf(buf, sizeof buf, "%.17g", *e.val_loss);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace flowconv
