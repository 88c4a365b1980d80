#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowconv/convops.hpp"
#include "flowconv/flowgraph.hpp"
#include "flowconv/ingest.hpp"
#include "flowconv/params.hpp"
#include "flowconv/tensor.hpp"

namespace flowconv {

/// Model family. `full` sums the flow-aware graph convolution and the 2D
/// convolution inside every gate; `nc` keeps only the graph convolution,
/// `nf` only the 2D convolution; `fc` replaces both with a dense affine map
/// over the flattened grid.
enum class Variant { full, nc, nf, fc };

std::string_view to_string(Variant v);
/// Throws std::invalid_argument on an unknown name.
Variant parse_variant(std::string_view name);

struct ModelSpec {
  int m = 1;
  int k = 1;
  int layers = 3;
  int hidden = 64;
  int diffusion_steps = 2;
  int history = 6;
  int kernel = 3;
  int input_channels = 2;
  int output_channels = 2;
  Variant variant = Variant::full;

  int regions() const { return m * k; }
  /// Throws std::invalid_argument.
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

/// Named parameter arrays for `spec`, zero-filled. Layout per layer l and gate
/// g in {r, u, h}:
///   layer<l>/<g>/theta  [c_in+d, d, K, 2]   (full, nc)
///   layer<l>/<g>/conv   [kh, kw, c_in+d, d] (full, nf)
///   layer<l>/<g>/fc     [N*(c_in+d), N*d]   (fc)
///   layer<l>/<g>/bias   [d] or [N*d] for fc
/// followed by head/weight [T*d, 2] and head/bias [2].
ParamSet make_params(const ModelSpec& spec);

/// Glorot-uniform weights U(-a, a), a = sqrt(6 / (fan_in + fan_out)), drawn in
/// canonical array order from a std::mt19937_64 seeded with `seed`. Biases
/// start at zero.
void glorot_init(ParamSet& params, const ModelSpec& spec, std::uint64_t seed);

/// Read-only view of one gate's arrays; absent arrays are null.
struct GateView {
  const ParamArray* theta = nullptr;
  const ParamArray* conv = nullptr;
  const ParamArray* fc = nullptr;
  const ParamArray* bias = nullptr;
};

enum Gate : int { kReset = 0, kUpdate = 1, kCandidate = 2 };

/// One FlowConvGRU layer's parameters.
struct CellView {
  int c_in = 0;
  int hidden = 0;
  int diffusion_steps = 2;
  int kernel = 3;
  Variant variant = Variant::full;
  std::array<GateView, 3> gates;
};

CellView cell_view(const ParamSet& params, const ModelSpec& spec, int layer);

/// Gate activations recorded by a cell step.
struct CellState {
  Signal reset;
  Signal update;
  Signal candidate;
  Signal hidden;
};

/// One recurrent step on an m x k grid. x is N x c_in, h_prev is N x d.
CellState cell_step(const Signal& x, const TransitionPair<double>& trans, const Signal& h_prev, const CellView& cell,
                    int m, int k);
CellState cell_step(const Signal& x, const SparseFlowMatrix& f, const Signal& h_prev, const CellView& cell, int m,
                    int k);

/// Runs a layer over T steps from a zero initial state; returns all T hidden states.
std::vector<Signal> unroll(std::span<const Signal> inputs, std::span<const TransitionPair<double>> flows,
                           const CellView& cell, int m, int k);

/// Prediction for the interval following a window, in scaled units.
Signal forward(std::span<const Signal> volumes, std::span<const TransitionPair<double>> flows, const ModelSpec& spec,
               const ParamSet& params);
Signal forward(std::span<const Signal> volumes, std::span<const SparseFlowMatrix> flows, const ModelSpec& spec,
               const ParamSet& params);

std::vector<TransitionPair<double>> make_transitions(std::span<const SparseFlowMatrix> flows);

/// Loss and its gradient for one window.
struct WindowGradient {
  double loss = 0.0;
  Signal prediction;
  ParamSet grads;
};

/// Sum-of-squares loss of one window and its exact gradient with respect to
/// every array of `params`. Throws NumericError naming the first stage whose
/// output is not finite.
WindowGradient backward(std::span<const Signal> volumes, std::span<const TransitionPair<double>> flows,
                        const Signal& target, const ModelSpec& spec, const ParamSet& params);

}  // namespace flowconv
