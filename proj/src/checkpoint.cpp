#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"
#include "flowconv/train.hpp"
#include "json.hpp"

namespace flowconv {

namespace {

constexpr const char* kCheckpointMagic = "FCGRU1";
constexpr std::uint16_t kCheckpointVersion = 1;

nlohmann::json spec_json(const ModelSpec& s) {
  return {{"m", s.m},
          {"k", s.k},
          {"layers", s.layers},
          {"hidden", s.hidden},
          {"diffusion_steps", s.diffusion_steps},
          {"history", s.history},
          {"kernel", s.kernel},
          {"input_channels", s.input_channels},
          {"output_channels", s.output_channels},
          {"variant", std::string(to_string(s.variant))}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.m = j.at("m").get<int>();
  s.k = j.at("k").get<int>();
  s.layers = j.at("layers").get<int>();
  s.hidden = j.at("hidden").get<int>();
  s.diffusion_steps = j.at("diffusion_steps").get<int>();
  s.history = j.at("history").get<int>();
  s.kernel = j.at("kernel").get<int>();
  s.input_channels = j.at("input_channels").get<int>();
  s.output_channels = j.at("output_channels").get<int>();
  s.variant = parse_variant(j.at("variant").get<std::string>());
  return s;
}

nlohmann::json scaler_json(const MinMaxScaler& s) {
  return {{"vmin", s.vmin},
          {"vmax", s.vmax},
          {"fmin", s.fmin},
          {"fmax", s.fmax},
          {"volume_degenerate", s.volume_degenerate},
          {"flow_degenerate", s.flow_degenerate}};
}

MinMaxScaler scaler_from_json(const nlohmann::json& j) {
  MinMaxScaler s;
  s.vmin = j.at("vmin").get<std::array<double, 2>>();
  s.vmax = j.at("vmax").get<std::array<double, 2>>();
  s.fmin = j.at("fmin").get<double>();
  s.fmax = j.at("fmax").get<double>();
  s.volume_degenerate = j.at("volume_degenerate").get<std::array<bool, 2>>();
  s.flow_degenerate = j.at("flow_degenerate").get<bool>();
  return s;
}

void put_array(std::ostream& out, const std::string& name, const ParamArray& a) {
  using namespace detail;
  put_block(out, name);
  put_le(out, static_cast<std::uint8_t>(a.dims.size()));
  for (int d : a.dims) put_le(out, static_cast<std::uint32_t>(d));
  for (Eigen::Index i = 0; i < a.size(); ++i) put_f64(out, a.values[i]);
}

ParamArray get_array(std::istream& in) {
  using namespace detail;
  ParamArray a;
  a.name = get_block(in, "array name");
  const auto rank = get_le<std::uint8_t>(in, "array rank");
  Eigen::Index size = 1;
  for (int r = 0; r < rank; ++r) {
    const auto d = get_le<std::uint32_t>(in, "array dims");
    a.dims.push_back(static_cast<int>(d));
    size *= d;
  }
  a.values.resize(size);
  for (Eigen::Index i = 0; i < size; ++i) a.values[i] = get_f64(in, "array payload");
  return a;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  using namespace detail;
  nlohmann::json meta = {{"spec", spec_json(ckpt.spec)},
                         {"scaler", scaler_json(ckpt.scaler)},
                         {"seed", ckpt.seed},
                         {"epoch", ckpt.epoch},
                         {"split", {{"train_fraction", ckpt.train_fraction}, {"val_fraction", ckpt.val_fraction}}},
                         {"arrays", ckpt.params.count()}};
  if (ckpt.optimizer) {
    const auto& c = ckpt.optimizer->config;
    meta["optimizer"] = {{"step", ckpt.optimizer->step},
                         {"lr", c.lr},
                         {"beta1", c.beta1},
                         {"beta2", c.beta2},
                         {"eps", c.eps}};
  }
  out.write(kCheckpointMagic, 6);
  put_le(out, kCheckpointVersion);
  put_block(out, meta.dump());
  for (const auto& a : ckpt.params) put_array(out, a.name, a);
  if (ckpt.optimizer) {
    for (const auto& a : ckpt.optimizer->first_moment) put_array(out, "adam/m/" + a.name, a);
    for (const auto& a : ckpt.optimizer->second_moment) put_array(out, "adam/v/" + a.name, a);
  }
  if (!out) throw std::runtime_error("save_checkpoint: stream error");
}

Checkpoint load_checkpoint(std::istream& in) {
  using namespace detail;
  expect_magic(in, kCheckpointMagic);
  const auto version = get_le<std::uint16_t>(in, "checkpoint version");
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(get_block(in, "checkpoint metadata"));
    ckpt.spec = spec_from_json(meta.at("spec"));
    ckpt.scaler = scaler_from_json(meta.at("scaler"));
    ckpt.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.epoch = meta.at("epoch").get<int>();
    ckpt.train_fraction = meta.at("split").at("train_fraction").get<double>();
    ckpt.val_fraction = meta.at("split").at("val_fraction").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }

  // Names and shapes follow from the stored ModelSpec; the file must agree with them.
  ckpt.params = make_params(ckpt.spec);
  const auto count = meta.at("arrays").get<std::size_t>();
  if (count != ckpt.params.count()) throw FormatError("checkpoint array count does not match its model spec");
  for (std::size_t i = 0; i < count; ++i) {
    ParamArray a = get_array(in);
    auto& slot = ckpt.params[i];
    if (a.name != slot.name || a.dims != slot.dims)
      throw FormatError("checkpoint array '" + a.name + "' does not match expected '" + slot.name + "'");
    slot.values = std::move(a.values);
  }
  if (meta.contains("optimizer")) {
    const auto& o = meta.at("optimizer");
    AdamConfig c{o.at("lr").get<double>(), o.at("beta1").get<double>(), o.at("beta2").get<double>(),
                 o.at("eps").get<double>()};
    OptimizerState state = make_optimizer(ckpt.params, c);
    state.step = o.at("step").get<std::int64_t>();
    for (auto* moments : {&state.first_moment, &state.second_moment}) {
      const std::string prefix = moments == &state.first_moment ? "adam/m/" : "adam/v/";
      for (auto& slot : *moments) {
        ParamArray a = get_array(in);
        if (a.name != prefix + slot.name || a.dims != slot.dims)
          throw FormatError("optimizer array '" + a.name + "' is out of place");
        slot.values = std::move(a.values);
      }
    }
    ckpt.optimizer = std::move(state);
  }
  return ckpt;
}

void save_checkpoint_file(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  save_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace flowconv
