#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowconv/ingest.hpp"
#include "flowconv/model.hpp"
#include "flowconv/params.hpp"

namespace flowconv {

/// Squared L2 distance between prediction and target.
double loss(const Signal& prediction, const Signal& target);

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

struct OptimizerState {
  AdamConfig config;
  std::int64_t step = 0;
  ParamSet first_moment;
  ParamSet second_moment;
  bool operator==(const OptimizerState&) const = default;
};

OptimizerState make_optimizer(const ParamSet& params, const AdamConfig& config);

/// Bias-corrected Adam update in place.
void adam_step(ParamSet& params, const ParamSet& grads, OptimizerState& state);

struct TrainConfig {
  int epochs = 100;
  int batch = 8;
  double lr = 2e-4;
  std::uint64_t seed = 7;
  double clip_norm = 0.0;  // global-norm clip; 0 disables
  int threads = 1;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

/// Everything needed to reproduce predictions from a trained model.
struct Checkpoint {
  ModelSpec spec;
  ParamSet params;
  std::optional<OptimizerState> optimizer;
  MinMaxScaler scaler;
  std::uint64_t seed = 0;
  int epoch = 0;
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  bool operator==(const Checkpoint&) const = default;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

/// Window with its transitions precomputed.
struct PreparedWindow {
  const Window* window = nullptr;
  std::vector<TransitionPair<double>> transitions;
};

std::vector<PreparedWindow> prepare_windows(const WindowDataset& dataset);

/// Mean loss and mean gradient over a batch. Per-window work may run on
/// `threads` workers; the reduction order is fixed, so the result does not
/// depend on the thread count.
WindowGradient batch_gradient(std::span<const PreparedWindow* const> batch, const ModelSpec& spec,
                              const ParamSet& params, int threads);

/// Mean per-window loss.
double dataset_loss(std::span<const PreparedWindow> windows, const ModelSpec& spec, const ParamSet& params,
                    int threads);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch Adam on `train`. Datasets must already be scaled with `scaler`.
/// With a non-empty `validation` set, the returned parameters are those of
/// the epoch with the lowest validation loss. Throws std::invalid_argument on
/// an empty training set and NumericError when the loss stops being finite.
TrainResult train(const WindowDataset& train_set, const WindowDataset* validation, const ModelSpec& spec,
                  const TrainConfig& config, const MinMaxScaler& scaler, const EpochCallback& on_epoch = {});

// ---- Persistence -------------------------------------------------------------

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
void save_checkpoint_file(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint_file(const std::string& path);

/// CSV with header epoch,train_loss,val_loss.
void write_loss_log(std::ostream& out, std::span<const EpochLog> log);

}  // namespace flowconv
