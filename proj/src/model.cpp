#include "flowconv/model.hpp"

#include <cmath>
#include <stdexcept>

#include "flowconv/rng.hpp"

namespace flowconv {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;
using RowArr = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr const char* kGateNames[3] = {"r", "u", "h"};

bool uses_graph(Variant v) { return v == Variant::full || v == Variant::nc; }
bool uses_grid(Variant v) { return v == Variant::full || v == Variant::nf; }

std::string gate_prefix(int layer, int gate) {
  return "layer" + std::to_string(layer + 1) + "/" + kGateNames[gate] + "/";
}

RowArr sigmoid(const RowArr& a) { return 1.0 / (1.0 + (-a).exp()); }

void check_finite(const Signal& s, int layer, int step, const char* stage) {
  if (!s.allFinite())
    throw NumericError("non-finite value in layer " + std::to_string(layer + 1) + " step " + std::to_string(step + 1) +
                       " " + stage);
}

/// Everything a gate needs from its concatenated input.
struct GateFeatures {
  Signal input;    // N x (c_in + d)
  Signal basis;    // diffusion basis, graph path
  Signal patches;  // im2col, grid path
};

GateFeatures gate_features(Signal input, const TransitionPair<double>& trans, const CellView& cell, int m, int k) {
  GateFeatures f;
  f.input = std::move(input);
  if (uses_graph(cell.variant)) f.basis = diffusion_basis(f.input, trans, cell.diffusion_steps);
  if (uses_grid(cell.variant)) f.patches = im2col<double>(f.input, m, k, cell.kernel, cell.kernel);
  return f;
}

Signal gate_preactivation(const GateFeatures& f, const GateView& g, const CellView& cell) {
  const auto n = f.input.rows();
  const int P = cell.c_in + cell.hidden;
  const int d = cell.hidden;
  Signal pre;
  if (cell.variant == Variant::fc) {
    const Eigen::Map<const Eigen::RowVectorXd> flat(f.input.data(), f.input.size());
    const ConstRowMap w(g.fc->values.data(), n * P, n * d);
    Eigen::RowVectorXd out = flat * w + g.bias->values.transpose();
    return Eigen::Map<const Signal>(out.data(), n, d);
  }
  pre = Signal::Zero(n, d);
  if (uses_graph(cell.variant)) pre.noalias() += f.basis * theta_matrix(g.theta->values, P, d, cell.diffusion_steps);
  if (uses_grid(cell.variant)) {
    const ConstRowMap w(g.conv->values.data(), cell.kernel * cell.kernel * P, d);
    pre.noalias() += f.patches * w;
  }
  pre.rowwise() += g.bias->values.transpose();
  return pre;
}

/// Accumulates parameter gradients of one gate and returns d(input).
Signal gate_backward(const GateFeatures& f, const GateView& g, ParamSet& grads, const CellView& cell,
                     const Signal& dpre, const TransitionPair<double>& trans, int m, int k) {
  const auto n = f.input.rows();
  const int P = cell.c_in + cell.hidden;
  const int d = cell.hidden;
  if (cell.variant == Variant::fc) {
    const Eigen::Map<const Eigen::RowVectorXd> flat(f.input.data(), f.input.size());
    const Eigen::Map<const Eigen::RowVectorXd> dflat(dpre.data(), dpre.size());
    const ConstRowMap w(g.fc->values.data(), n * P, n * d);
    RowMap gw(grads.at(g.fc->name).values.data(), n * P, n * d);
    gw.noalias() += flat.transpose() * dflat;
    grads.at(g.bias->name).values += dflat.transpose();
    Eigen::RowVectorXd dinput = dflat * w.transpose();
    return Eigen::Map<const Signal>(dinput.data(), n, P);
  }
  grads.at(g.bias->name).values += dpre.colwise().sum().transpose();
  Signal dinput = Signal::Zero(n, P);
  if (uses_graph(cell.variant)) {
    const int K = cell.diffusion_steps;
    const auto theta = theta_matrix(g.theta->values, P, d, K);
    accumulate_theta(grads.at(g.theta->name).values, f.basis.transpose() * dpre, P, d, K);
    Signal dbasis = dpre * theta.transpose();
    dinput += diffusion_basis_adjoint(dbasis, trans, K);
  }
  if (uses_grid(cell.variant)) {
    const int rows = cell.kernel * cell.kernel * P;
    const ConstRowMap w(g.conv->values.data(), rows, d);
    RowMap gw(grads.at(g.conv->name).values.data(), rows, d);
    gw.noalias() += f.patches.transpose() * dpre;
    Signal dpatches = dpre * w.transpose();
    dinput += im2col_adjoint<double>(dpatches, m, k, cell.kernel, cell.kernel);
  }
  return dinput;
}

Signal concat(const Signal& a, const Signal& b) {
  Signal out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

/// Intermediates of one cell step kept for the backward pass.
struct StepTrace {
  Signal h_prev;
  GateFeatures xh;
  GateFeatures xrh;
  Signal reset, update, candidate, hidden;
};

StepTrace run_cell(const Signal& x, const TransitionPair<double>& trans, const Signal& h_prev, const CellView& cell,
                   int m, int k, int layer, int step) {
  if (x.cols() != cell.c_in || h_prev.cols() != cell.hidden || x.rows() != h_prev.rows() ||
      x.rows() != static_cast<Eigen::Index>(m) * k || trans.regions() != x.rows())
    throw ShapeError("cell_step: input, state, grid or graph sizes disagree");
  StepTrace s;
  s.h_prev = h_prev;
  s.xh = gate_features(concat(x, h_prev), trans, cell, m, k);
  s.reset = sigmoid(gate_preactivation(s.xh, cell.gates[kReset], cell).array()).matrix();
  check_finite(s.reset, layer, step, "reset gate");
  s.update = sigmoid(gate_preactivation(s.xh, cell.gates[kUpdate], cell).array()).matrix();
  check_finite(s.update, layer, step, "update gate");
  s.xrh = gate_features(concat(x, (s.reset.array() * h_prev.array()).matrix()), trans, cell, m, k);
  s.candidate = gate_preactivation(s.xrh, cell.gates[kCandidate], cell).array().tanh().matrix();
  check_finite(s.candidate, layer, step, "candidate state");
  s.hidden = (s.update.array() * h_prev.array() + (1.0 - s.update.array()) * s.candidate.array()).matrix();
  return s;
}

struct Trace {
  std::vector<std::vector<StepTrace>> layers;
  Signal head_input;  // N x (T*d)
  Signal prediction;
};

Trace run_forward(std::span<const Signal> volumes, std::span<const TransitionPair<double>> flows,
                  const ModelSpec& spec, const ParamSet& params) {
  const int T = spec.history;
  if (static_cast<int>(volumes.size()) != T || static_cast<int>(flows.size()) != T)
    throw ShapeError("forward: expected " + std::to_string(T) + " volumes and flows, got " +
                     std::to_string(volumes.size()) + " and " + std::to_string(flows.size()));
  const int n = spec.regions();
  Trace trace;
  std::vector<Signal> inputs(volumes.begin(), volumes.end());
  for (const auto& v : inputs)
    if (v.rows() != n || v.cols() != spec.input_channels) throw ShapeError("forward: volume tensor shape mismatch");
  for (int l = 0; l < spec.layers; ++l) {
    const CellView cell = cell_view(params, spec, l);
    std::vector<StepTrace> steps;
    steps.reserve(T);
    Signal h = Signal::Zero(n, spec.hidden);
    for (int t = 0; t < T; ++t) {
      steps.push_back(run_cell(inputs[t], flows[t], h, cell, spec.m, spec.k, l, t));
      h = steps.back().hidden;
    }
    for (int t = 0; t < T; ++t) inputs[t] = steps[t].hidden;
    trace.layers.push_back(std::move(steps));
  }
  const int d = spec.hidden;
  trace.head_input.resize(n, T * d);
  for (int t = 0; t < T; ++t) trace.head_input.middleCols(t * d, d) = inputs[t];
  const auto& w = params.at("head/weight");
  const auto& b = params.at("head/bias");
  trace.prediction = trace.head_input * ConstRowMap(w.values.data(), T * d, spec.output_channels);
  trace.prediction.rowwise() += b.values.transpose();
  if (!trace.prediction.allFinite()) throw NumericError("non-finite value in output head");
  return trace;
}

double fan_bound(int fan_in, int fan_out) { return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)); }

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::nc: return "nc";
    case Variant::nf: return "nf";
    case Variant::fc: return "fc";
  }
  return "full";
}

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::full;
  if (name == "nc") return Variant::nc;
  if (name == "nf") return Variant::nf;
  if (name == "fc") return Variant::fc;
  throw std::invalid_argument("unknown variant '" + std::string(name) + "' (expected full, nc, nf or fc)");
}

void ModelSpec::validate() const {
  if (m < 1 || k < 1) throw std::invalid_argument("model: grid must be at least 1x1");
  if (layers < 1) throw std::invalid_argument("model: layers must be >= 1");
  if (hidden < 1) throw std::invalid_argument("model: hidden size must be >= 1");
  if (diffusion_steps < 1) throw std::invalid_argument("model: diffusion steps must be >= 1");
  if (history < 1) throw std::invalid_argument("model: history must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("model: kernel size must be odd");
  if (input_channels < 1 || output_channels < 1) throw std::invalid_argument("model: channel counts must be >= 1");
}

ParamSet make_params(const ModelSpec& spec) {
  spec.validate();
  ParamSet params;
  const int n = spec.regions();
  const int d = spec.hidden;
  for (int l = 0; l < spec.layers; ++l) {
    const int P = (l == 0 ? spec.input_channels : d) + d;
    for (int g = 0; g < 3; ++g) {
      const std::string prefix = gate_prefix(l, g);
      if (uses_graph(spec.variant)) params.add(prefix + "theta", {P, d, spec.diffusion_steps, 2});
      if (uses_grid(spec.variant)) params.add(prefix + "conv", {spec.kernel, spec.kernel, P, d});
      if (spec.variant == Variant::fc) {
        params.add(prefix + "fc", {n * P, n * d});
        params.add(prefix + "bias", {n * d});
      } else {
        params.add(prefix + "bias", {d});
      }
    }
  }
  params.add("head/weight", {spec.history * d, spec.output_channels});
  params.add("head/bias", {spec.output_channels});
  return params;
}

void glorot_init(ParamSet& params, const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& a : params) {
    const auto& dims = a.dims;
    double bound = 0.0;
    if (a.name.ends_with("/theta")) {
      bound = fan_bound(dims[0] * dims[2] * dims[3], dims[1]);
    } else if (a.name.ends_with("/conv")) {
      bound = fan_bound(dims[0] * dims[1] * dims[2], dims[0] * dims[1] * dims[3]);
    } else if (a.name.ends_with("/fc") || a.name == "head/weight") {
      bound = fan_bound(dims[0], dims[1]);
    } else {
      a.values.setZero();
      continue;
    }
    for (Eigen::Index i = 0; i < a.size(); ++i) a.values[i] = rng.uniform(-bound, bound);
  }
  (void)spec;
}

CellView cell_view(const ParamSet& params, const ModelSpec& spec, int layer) {
  if (layer < 0 || layer >= spec.layers) throw RangeError("cell_view: layer out of range");
  CellView cell;
  cell.c_in = layer == 0 ? spec.input_channels : spec.hidden;
  cell.hidden = spec.hidden;
  cell.diffusion_steps = spec.diffusion_steps;
  cell.kernel = spec.kernel;
  cell.variant = spec.variant;
  for (int g = 0; g < 3; ++g) {
    const std::string prefix = gate_prefix(layer, g);
    auto& view = cell.gates[g];
    view.theta = params.find(prefix + "theta");
    view.conv = params.find(prefix + "conv");
    view.fc = params.find(prefix + "fc");
    view.bias = params.find(prefix + "bias");
    const bool ok = view.bias && (!uses_graph(spec.variant) || view.theta) && (!uses_grid(spec.variant) || view.conv) &&
                    (spec.variant != Variant::fc || view.fc);
    if (!ok) throw ShapeError("cell_view: parameters for " + prefix + " do not match variant");
  }
  return cell;
}

CellState cell_step(const Signal& x, const TransitionPair<double>& trans, const Signal& h_prev, const CellView& cell,
                    int m, int k) {
  StepTrace s = run_cell(x, trans, h_prev, cell, m, k, 0, 0);
  return {std::move(s.reset), std::move(s.update), std::move(s.candidate), std::move(s.hidden)};
}

CellState cell_step(const Signal& x, const SparseFlowMatrix& f, const Signal& h_prev, const CellView& cell, int m,
                    int k) {
  return cell_step(x, make_transitions<double>(f), h_prev, cell, m, k);
}

std::vector<Signal> unroll(std::span<const Signal> inputs, std::span<const TransitionPair<double>> flows,
                           const CellView& cell, int m, int k) {
  if (inputs.size() != flows.size()) throw ShapeError("unroll: inputs and flows differ in length");
  std::vector<Signal> states;
  states.reserve(inputs.size());
  Signal h = Signal::Zero(static_cast<Eigen::Index>(m) * k, cell.hidden);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    h = run_cell(inputs[t], flows[t], h, cell, m, k, 0, static_cast<int>(t)).hidden;
    states.push_back(h);
  }
  return states;
}

std::vector<TransitionPair<double>> make_transitions(std::span<const SparseFlowMatrix> flows) {
  std::vector<TransitionPair<double>> out;
  out.reserve(flows.size());
  for (const auto& f : flows) out.push_back(make_transitions<double>(f));
  return out;
}

Signal forward(std::span<const Signal> volumes, std::span<const TransitionPair<double>> flows, const ModelSpec& spec,
               const ParamSet& params) {
  return run_forward(volumes, flows, spec, params).prediction;
}

Signal forward(std::span<const Signal> volumes, std::span<const SparseFlowMatrix> flows, const ModelSpec& spec,
               const ParamSet& params) {
  for (const auto& f : flows)
    if (f.n != spec.regions()) throw ShapeError("forward: flow matrix size does not match grid");
  const auto trans = make_transitions(flows);
  return forward(volumes, trans, spec, params);
}

WindowGradient backward(std::span<const Signal> volumes, std::span<const TransitionPair<double>> flows,
                        const Signal& target, const ModelSpec& spec, const ParamSet& params) {
  Trace trace = run_forward(volumes, flows, spec, params);
  if (target.rows() != trace.prediction.rows() || target.cols() != trace.prediction.cols())
    throw ShapeError("backward: target shape does not match prediction");

  WindowGradient out;
  out.grads = params.zeros_like();
  const Signal residual = trace.prediction - target;
  out.loss = residual.squaredNorm();
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
  const Signal dpred = 2.0 * residual;

  const int T = spec.history;
  const int d = spec.hidden;
  const int n = spec.regions();
  {
    RowMap gw(out.grads.at("head/weight").values.data(), T * d, spec.output_channels);
    gw.noalias() += trace.head_input.transpose() * dpred;
    out.grads.at("head/bias").values += dpred.colwise().sum().transpose();
  }
  const Signal dhead = dpred * ConstRowMap(params.at("head/weight").values.data(), T * d, spec.output_channels).transpose();
  std::vector<Signal> dabove(T);
  for (int t = 0; t < T; ++t) dabove[t] = dhead.middleCols(t * d, d);

  for (int l = spec.layers - 1; l >= 0; --l) {
    const CellView cell = cell_view(params, spec, l);
    const int cin = cell.c_in;
    std::vector<Signal> dinputs(T);
    Signal carry = Signal::Zero(n, d);
    for (int t = T - 1; t >= 0; --t) {
      const StepTrace& s = trace.layers[l][t];
      const RowArr dh = (dabove[t] + carry).array();
      const RowArr u = s.update.array();
      const RowArr r = s.reset.array();
      const RowArr c = s.candidate.array();
      const RowArr hp = s.h_prev.array();

      RowArr dhp = dh * u;
      const Signal dpre_u = (dh * (hp - c) * u * (1.0 - u)).matrix();
      const Signal dpre_c = (dh * (1.0 - u) * (1.0 - c * c)).matrix();

      const Signal dxrh = gate_backward(s.xrh, cell.gates[kCandidate], out.grads, cell, dpre_c, flows[t], spec.m, spec.k);
      Signal dx = dxrh.leftCols(cin);
      const RowArr drh = dxrh.rightCols(d).array();
      dhp += drh * r;
      const Signal dpre_r = (drh * hp * r * (1.0 - r)).matrix();

      const Signal dxh = gate_backward(s.xh, cell.gates[kReset], out.grads, cell, dpre_r, flows[t], spec.m, spec.k) +
                         gate_backward(s.xh, cell.gates[kUpdate], out.grads, cell, dpre_u, flows[t], spec.m, spec.k);
      dx += dxh.leftCols(cin);
      dhp += dxh.rightCols(d).array();
      carry = dhp.matrix();
      dinputs[t] = std::move(dx);
    }
    dabove = std::move(dinputs);
  }
  out.prediction = std::move(trace.prediction);
  return out;
}

}  // namespace flowconv
