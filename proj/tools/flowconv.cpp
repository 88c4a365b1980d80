// flowconv: command-line front end. Every subcommand prints its resolved
// configuration before doing any work so a run can be replayed from its log.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "flowconv/analysis.hpp"
#include "flowconv/experiment.hpp"
#include "flowconv/ingest.hpp"
#include "flowconv/model.hpp"
#include "flowconv/synth.hpp"
#include "flowconv/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace flowconv;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  GridSpec grid = benchmark_scenario().grid;
  std::optional<std::int64_t> intervals;
  int history = 6;
  int layers = 3;
  int hidden = 64;
  int diffusion_steps = 2;
  int kernel = 3;
  Variant variant = Variant::full;
  TrainConfig training{.threads = 0};
  SplitConfig split;
  double emd_threshold = 0.005;
  SynthConfig synth = benchmark_scenario();
  std::set<std::string> file_keys;  // keys the config file actually set

  ModelSpec model_spec(const GridSpec& g) const {
    ModelSpec s;
    s.m = g.m;
    s.k = g.k;
    s.layers = layers;
    s.hidden = hidden;
    s.diffusion_steps = diffusion_steps;
    s.history = history;
    s.kernel = kernel;
    s.variant = variant;
    return s;
  }
};

template <typename T>
void take(const json& j, const std::string& key, T& out) {
  try {
    out = j.get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type");
  }
}

void load_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config file '" + path + "' is not valid JSON (byte " + std::to_string(e.byte) + ")");
  }
  if (!j.is_object()) throw UsageError("config file '" + path + "' must hold a JSON object");

  for (const auto& [key, v] : j.items()) {
    if (key == "lat_min") take(v, key, cfg.grid.lat_min);
    else if (key == "lat_max") take(v, key, cfg.grid.lat_max);
    else if (key == "lon_min") take(v, key, cfg.grid.lon_min);
    else if (key == "lon_max") take(v, key, cfg.grid.lon_max);
    else if (key == "m") take(v, key, cfg.grid.m);
    else if (key == "k") take(v, key, cfg.grid.k);
    else if (key == "interval_seconds") take(v, key, cfg.grid.interval_seconds);
    else if (key == "t0") take(v, key, cfg.grid.t0);
    else if (key == "intervals") {
      std::int64_t n = 0;
      take(v, key, n);
      cfg.intervals = n;
    } else if (key == "history_T") take(v, key, cfg.history);
    else if (key == "layers") take(v, key, cfg.layers);
    else if (key == "hidden") take(v, key, cfg.hidden);
    else if (key == "diffusion_steps") take(v, key, cfg.diffusion_steps);
    else if (key == "kernel") take(v, key, cfg.kernel);
    else if (key == "variant") {
      std::string name;
      take(v, key, name);
      cfg.variant = parse_variant(name);
    } else if (key == "epochs") take(v, key, cfg.training.epochs);
    else if (key == "batch") take(v, key, cfg.training.batch);
    else if (key == "lr") take(v, key, cfg.training.lr);
    else if (key == "seed") take(v, key, cfg.training.seed);
    else if (key == "threads") take(v, key, cfg.training.threads);
    else if (key == "clip_norm") take(v, key, cfg.training.clip_norm);
    else if (key == "train_fraction") take(v, key, cfg.split.train_fraction);
    else if (key == "val_fraction") take(v, key, cfg.split.val_fraction);
    else if (key == "emd_threshold") take(v, key, cfg.emd_threshold);
    else if (key == "days") take(v, key, cfg.synth.days);
    else if (key == "noise_rate") take(v, key, cfg.synth.noise_rate);
    else if (key == "return_lag") take(v, key, cfg.synth.return_lag);
    else if (key == "morning_hours") take(v, key, cfg.synth.morning_hours);
    else if (key == "hubs") {
      if (!v.is_array()) throw UsageError("config key 'hubs' must be an array");
      cfg.synth.hubs.clear();
      for (const auto& h : v) {
        Hub hub;
        try {
          hub.home = h.at("home").get<int>();
          hub.work = h.at("work").get<int>();
          hub.rate = h.at("rate").get<double>();
        } catch (const json::exception&) {
          throw UsageError("each hub needs integer 'home', 'work' and numeric 'rate'");
        }
        cfg.synth.hubs.push_back(hub);
      }
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
    cfg.file_keys.insert(key);
  }
}

template <typename T>
std::optional<T> env_number(const char* name) {
  const char* raw = std::getenv(name);
  if (!raw || !*raw) return std::nullopt;
  const std::string s(raw);
  T value{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || end != s.data() + s.size())
    throw UsageError(std::string("environment variable ") + name + "='" + s + "' is not a valid number");
  return value;
}

/// Flags shared by several subcommands. Unset optionals leave the file/env
/// value in place.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> history;
  std::optional<int> layers;
  std::optional<int> hidden;
  std::optional<int> epochs;
  std::optional<int> batch;
  std::optional<double> lr;
  std::optional<double> clip_norm;
  std::optional<std::string> variant;
};

void add_config_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "random seed (env FCGRU_SEED)");
  cmd->add_option("--threads", f.threads, "worker threads, 0 = auto (env FCGRU_THREADS)");
}

void add_model_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--history", f.history, "input intervals per window");
  cmd->add_option("--layers", f.layers, "stacked recurrent layers");
  cmd->add_option("--hidden", f.hidden, "hidden channels per layer");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch", f.batch, "mini-batch size");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--clip-norm", f.clip_norm, "global gradient-norm clip, 0 = off");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config.empty()) load_config_file(f.config, cfg);
  if (auto s = env_number<std::uint64_t>("FCGRU_SEED")) cfg.training.seed = *s;
  if (auto t = env_number<int>("FCGRU_THREADS")) cfg.training.threads = *t;
  if (f.seed) cfg.training.seed = *f.seed;
  if (f.threads) cfg.training.threads = *f.threads;
  if (f.history) cfg.history = *f.history;
  if (f.layers) cfg.layers = *f.layers;
  if (f.hidden) cfg.hidden = *f.hidden;
  if (f.epochs) cfg.training.epochs = *f.epochs;
  if (f.batch) cfg.training.batch = *f.batch;
  if (f.lr) cfg.training.lr = *f.lr;
  if (f.clip_norm) cfg.training.clip_norm = *f.clip_norm;
  if (f.variant && *f.variant != "ha") cfg.variant = parse_variant(*f.variant);
  if (cfg.training.threads < 0) throw UsageError("threads must be >= 0");
  cfg.synth.grid = cfg.grid;
  cfg.synth.seed = cfg.training.seed;
  return cfg;
}

int worker_count(const RunConfig& cfg) {
  if (cfg.training.threads > 0) return cfg.training.threads;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

json grid_json(const GridSpec& g) {
  return json{{"lat_min", g.lat_min}, {"lat_max", g.lat_max}, {"lon_min", g.lon_min}, {"lon_max", g.lon_max},
              {"m", g.m},           {"k", g.k},             {"interval_seconds", g.interval_seconds},
              {"t0", g.t0}};
}

json training_json(const RunConfig& cfg) {
  return json{{"history_T", cfg.history},
              {"layers", cfg.layers},
              {"hidden", cfg.hidden},
              {"diffusion_steps", cfg.diffusion_steps},
              {"kernel", cfg.kernel},
              {"variant", std::string(to_string(cfg.variant))},
              {"epochs", cfg.training.epochs},
              {"batch", cfg.training.batch},
              {"lr", cfg.training.lr},
              {"clip_norm", cfg.training.clip_norm},
              {"seed", cfg.training.seed},
              {"threads", cfg.training.threads},
              {"train_fraction", cfg.split.train_fraction},
              {"val_fraction", cfg.split.val_fraction}};
}

void print_config(const std::string& command, json body) {
  json out{{"command", command}};
  for (auto& [k, v] : body.items()) out[k] = v;
  std::cout << "config " << out.dump() << '\n';
}

void ensure_parent(const std::string& file) {
  const fs::path parent = fs::path(file).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::ofstream open_out(const fs::path& path) {
  ensure_parent(path.string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw std::runtime_error("failed while writing '" + path.string() + "'");
}

std::string method_name(Variant v) {
  switch (v) {
    case Variant::full: return "FlowConvGRU";
    case Variant::nc: return "FlowConvGRU-nc";
    case Variant::nf: return "FlowConvGRU-nf";
    case Variant::fc: return "FC-GRU";
  }
  return "FlowConvGRU";
}

IntervalSeries load_series(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("dataset '" + path + "' does not exist");
  return read_dataset_file(path);
}

PreparedData prepare(const IntervalSeries& series, int history, const SplitConfig& split) {
  PreparedData data = prepare_data(series, history, split);
  if (data.train.empty()) throw std::runtime_error("dataset too short for history " + std::to_string(history) +
                                                   ": training split has no windows");
  return data;
}

void print_report(const std::string& label, const EvalReport& r) {
  std::cout << label << " rmse=" << format_double(r.rmse) << " mae=" << format_double(r.mae)
            << " n=" << r.instances << '\n';
}

TrainResult run_training(const PreparedData& data, const ModelSpec& spec, const RunConfig& cfg,
                         const std::string& tag) {
  TrainConfig tc = cfg.training;
  tc.threads = worker_count(cfg);
  const int every = std::max(1, tc.epochs / 10);
  TrainResult r = train(data.train, &data.validation, spec, tc, data.scaler, [&](const EpochLog& e) {
    if (e.epoch == 1 || e.epoch % every == 0 || e.epoch == tc.epochs) {
      std::cout << tag << "epoch " << e.epoch << " train_loss=" << format_double(e.train_loss);
      if (e.val_loss) std::cout << " val_loss=" << format_double(*e.val_loss);
      std::cout << '\n';
    }
  });
  r.checkpoint.train_fraction = cfg.split.train_fraction;
  r.checkpoint.val_fraction = cfg.split.val_fraction;
  return r;
}

void write_loss_log_file(const fs::path& path, const TrainResult& r) {
  auto out = open_out(path);
  write_loss_log(out, r.log);
  close_out(out, path);
}

void write_metrics_file(const fs::path& path, std::span<const MetricsRow> rows) {
  auto out = open_out(path);
  write_metrics_csv(out, rows);
  close_out(out, path);
}

// ---- subcommands -------------------------------------------------------------

int cmd_synth(const CommonFlags& f, const std::string& out_path) {
  RunConfig cfg = resolve(f);
  print_config("synth", json{{"grid", grid_json(cfg.synth.grid)},
                             {"days", cfg.synth.days},
                             {"noise_rate", cfg.synth.noise_rate},
                             {"return_lag", cfg.synth.return_lag},
                             {"hubs", cfg.synth.hubs.size()},
                             {"seed", cfg.synth.seed},
                             {"out", out_path}});
  const SynthResult r = generate(cfg.synth);
  auto out = open_out(out_path);
  write_trip_csv(out, r.trips);
  close_out(out, out_path);
  std::cout << "trips: " << r.trips.size() << "\nintervals: " << r.intervals << '\n';
  return 0;
}

int cmd_ingest(const CommonFlags& f, const std::string& trips_path, const std::string& out_path) {
  RunConfig cfg = resolve(f);
  for (const char* key : {"lat_min", "lat_max", "lon_min", "lon_max", "m", "k", "interval_seconds", "t0"})
    if (!cfg.file_keys.count(key)) throw UsageError(std::string("config is missing grid key '") + key + "'");
  cfg.grid.validate();
  json body{{"grid", grid_json(cfg.grid)}, {"trips", trips_path}, {"out", out_path}};
  body["intervals"] = cfg.intervals ? json(*cfg.intervals) : json("auto");
  print_config("ingest", body);

  if (!fs::exists(trips_path)) throw UsageError("trip file '" + trips_path + "' does not exist");
  const TripCsv csv = read_trip_csv_file(trips_path);
  const TripSet set = assign_trips(csv.trips, cfg.grid, cfg.intervals);
  IntervalSeries series = aggregate(set, cfg.grid);
  series.rejected.malformed += csv.malformed;
  if (series.intervals() == 0) std::cerr << "warning: no usable trips; dataset has zero intervals\n";
  write_dataset_file(out_path, series);

  const auto& rj = series.rejected;
  std::cout << "intervals: " << series.intervals() << "\ntrips: " << set.trips.size() << "\nrejected: " << rj.total()
            << " (out_of_bounds " << rj.out_of_bounds << ", reversed_time " << rj.reversed_time << ", outside_axis "
            << rj.outside_axis << ", malformed " << rj.malformed << ")\n";
  return 0;
}

int cmd_train(const CommonFlags& f, const std::string& data_path, const std::string& out_path,
              const std::string& loss_log) {
  if (f.variant && *f.variant == "ha") throw UsageError("the ha baseline has no parameters to train; use eval --variant ha");
  RunConfig cfg = resolve(f);
  const IntervalSeries series = load_series(data_path);
  const ModelSpec spec = cfg.model_spec(series.grid);
  spec.validate();
  json body = training_json(cfg);
  body["data"] = data_path;
  body["out"] = out_path;
  body["grid"] = grid_json(series.grid);
  print_config("train", body);

  const PreparedData data = prepare(series, cfg.history, cfg.split);
  std::cout << "windows: train=" << data.train.size() << " validation=" << data.validation.size()
            << " test=" << data.test.size() << '\n';
  const TrainResult r = run_training(data, spec, cfg, "");
  ensure_parent(out_path);
  save_checkpoint_file(out_path, r.checkpoint);
  if (!loss_log.empty()) write_loss_log_file(loss_log, r);
  std::cout << "selected epoch: " << r.checkpoint.epoch << '\n';
  if (!data.test.empty()) print_report("test", evaluate_checkpoint(r.checkpoint, data.test, worker_count(cfg)));
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& data_path, const std::vector<std::string>& checkpoints,
             const std::string& out_dir) {
  const bool ha = f.variant && *f.variant == "ha";
  if (!ha && checkpoints.empty()) throw UsageError("eval needs --checkpoint unless --variant ha");
  RunConfig cfg = resolve(f);
  const IntervalSeries series = load_series(data_path);
  json body{{"data", data_path}, {"out", out_dir}, {"checkpoints", checkpoints}, {"ha", ha},
            {"threads", cfg.training.threads}};
  if (ha) {
    body["history_T"] = cfg.history;
    body["train_fraction"] = cfg.split.train_fraction;
    body["val_fraction"] = cfg.split.val_fraction;
  }
  print_config("eval", body);

  std::vector<MetricsRow> rows;
  for (const auto& path : checkpoints) {
    if (!fs::exists(path)) throw UsageError("checkpoint '" + path + "' does not exist");
    const Checkpoint ckpt = load_checkpoint_file(path);
    if (f.variant && !ha && parse_variant(*f.variant) != ckpt.spec.variant)
      throw UsageError("checkpoint '" + path + "' holds variant " + std::string(to_string(ckpt.spec.variant)));
    if (ckpt.spec.m != series.grid.m || ckpt.spec.k != series.grid.k)
      throw UsageError("checkpoint '" + path + "' was trained on a different grid");
    const PreparedData data =
        prepare(series, ckpt.spec.history, SplitConfig{ckpt.train_fraction, ckpt.val_fraction});
    rows.push_back({method_name(ckpt.spec.variant), std::string(to_string(ckpt.spec.variant)),
                    evaluate_checkpoint(ckpt, data.test, worker_count(cfg))});
  }
  if (ha) {
    const PreparedData data = prepare(series, cfg.history, cfg.split);
    rows.push_back({"HA", "ha", evaluate_ha(data.test, data.scaler)});
  }
  for (const auto& r : rows) print_report(r.method, r.report);
  write_metrics_file(fs::path(out_dir) / "metrics.csv", rows);
  return 0;
}

int cmd_ablate(const CommonFlags& f, const std::string& data_path, const std::string& out_dir) {
  RunConfig cfg = resolve(f);
  const IntervalSeries series = load_series(data_path);
  json body = training_json(cfg);
  body.erase("variant");
  body["variants"] = {"full", "nc", "nf", "fc", "ha"};
  body["data"] = data_path;
  body["out"] = out_dir;
  print_config("ablate", body);

  const PreparedData data = prepare(series, cfg.history, cfg.split);
  std::vector<MetricsRow> rows;
  for (Variant v : {Variant::full, Variant::nc, Variant::nf, Variant::fc}) {
    RunConfig vc = cfg;
    vc.variant = v;
    const ModelSpec spec = vc.model_spec(series.grid);
    const std::string name(to_string(v));
    const TrainResult r = run_training(data, spec, vc, name + " ");
    const fs::path ckpt_path = fs::path(out_dir) / (name + ".fcgru");
    ensure_parent(ckpt_path.string());
    save_checkpoint_file(ckpt_path.string(), r.checkpoint);
    write_loss_log_file(fs::path(out_dir) / (name + "_loss.csv"), r);
    rows.push_back({method_name(v), name, evaluate_checkpoint(r.checkpoint, data.test, worker_count(cfg))});
  }
  rows.push_back({"HA", "ha", evaluate_ha(data.test, data.scaler)});
  for (const auto& r : rows) print_report(r.method, r.report);
  write_metrics_file(fs::path(out_dir) / "metrics.csv", rows);
  return 0;
}

int cmd_analyze(const CommonFlags& f, const std::string& data_path, const std::vector<std::string>& checkpoints,
                std::optional<double> threshold_flag, const std::string& out_dir) {
  RunConfig cfg = resolve(f);
  if (threshold_flag) cfg.emd_threshold = *threshold_flag;
  const IntervalSeries series = load_series(data_path);
  print_config("analyze", json{{"data", data_path},
                               {"out", out_dir},
                               {"emd_threshold", cfg.emd_threshold},
                               {"checkpoints", checkpoints},
                               {"history_T", cfg.history},
                               {"train_fraction", cfg.split.train_fraction},
                               {"val_fraction", cfg.split.val_fraction},
                               {"threads", cfg.training.threads}});

  const auto churns = churn_series(series);
  const fs::path dir(out_dir);
  {
    auto out = open_out(dir / "churn.csv");
    write_churn_csv(out, churns);
    close_out(out, dir / "churn.csv");
  }
  {
    const auto hourly = hourly_aggregate(churns, series.grid);
    auto out = open_out(dir / "hourly.csv");
    write_hourly_csv(out, hourly);
    close_out(out, dir / "hourly.csv");
  }

  // Evaluation on every test window and on the high-churn subset.
  struct Model {
    std::string method, variant;
    std::optional<Checkpoint> ckpt;
    PreparedData data;
  };
  std::vector<Model> models;
  for (const auto& path : checkpoints) {
    if (!fs::exists(path)) throw UsageError("checkpoint '" + path + "' does not exist");
    Checkpoint ckpt = load_checkpoint_file(path);
    PreparedData data = prepare(series, ckpt.spec.history, SplitConfig{ckpt.train_fraction, ckpt.val_fraction});
    models.push_back({method_name(ckpt.spec.variant), std::string(to_string(ckpt.spec.variant)), std::move(ckpt),
                      std::move(data)});
  }
  models.push_back({"HA", "ha", std::nullopt, prepare(series, cfg.history, cfg.split)});

  const fs::path table = dir / "filtered.csv";
  auto out = open_out(table);
  out << "subset,method,variant,rmse,mae,n\n";
  for (const auto& m : models) {
    const WindowDataset high = filter_high_churn(m.data.test, churns, cfg.emd_threshold);
    for (const auto* subset : {&m.data.test, &high}) {
      const EvalReport r = m.ckpt ? evaluate_checkpoint(*m.ckpt, *subset, worker_count(cfg))
                                  : evaluate_ha(*subset, m.data.scaler);
      const std::string name = subset == &high ? "high_churn" : "all";
      out << name << ',' << m.method << ',' << m.variant << ',' << format_double(r.rmse) << ','
          << format_double(r.mae) << ',' << r.instances << '\n';
      print_report(name + " " + m.method, r);
    }
  }
  close_out(out, table);
  std::size_t defined = 0;
  for (const auto& c : churns) defined += c.emd_defined ? 1 : 0;
  std::cout << "churn intervals: " << churns.size() << " (emd defined on " << defined << ")\n";
  return 0;
}

int cmd_sweep(const CommonFlags& f, const std::string& data_path, const std::vector<int>& depths,
              const std::string& out_dir) {
  RunConfig cfg = resolve(f);
  const IntervalSeries series = load_series(data_path);
  if (depths.empty()) throw UsageError("sweep needs at least one depth");
  json body = training_json(cfg);
  body.erase("layers");
  body["depths"] = depths;
  body["data"] = data_path;
  body["out"] = out_dir;
  print_config("sweep", body);

  const PreparedData data = prepare(series, cfg.history, cfg.split);
  TrainConfig tc = cfg.training;
  tc.threads = worker_count(cfg);
  auto rows = layer_sweep(data, cfg.model_spec(series.grid), tc, depths);
  for (auto& r : rows) {
    r.checkpoint.train_fraction = cfg.split.train_fraction;
    r.checkpoint.val_fraction = cfg.split.val_fraction;
    const fs::path p = fs::path(out_dir) / ("layers" + std::to_string(r.layers) + ".fcgru");
    ensure_parent(p.string());
    save_checkpoint_file(p.string(), r.checkpoint);
    print_report("layers=" + std::to_string(r.layers), r.report);
  }
  const fs::path csv = fs::path(out_dir) / "layer_sweep.csv";
  auto out = open_out(csv);
  write_sweep_csv(out, rows);
  close_out(out, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-aware traffic volume prediction"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CommonFlags f;
  std::string trips, data, out, loss_log;
  std::vector<std::string> checkpoints;
  std::optional<double> emd_threshold;
  std::vector<int> depths{1, 2, 3, 4};

  auto* synth = app.add_subcommand("synth", "generate the seeded commuter trip CSV");
  add_config_flags(synth, f);
  synth->add_option("--out", out, "trip CSV to write")->required();

  auto* ingest = app.add_subcommand("ingest", "bin a trip CSV into a dataset file");
  add_config_flags(ingest, f);
  ingest->add_option("--trips", trips, "trip CSV")->required();
  ingest->add_option("--out", out, "dataset file to write")->required();

  auto* train_cmd = app.add_subcommand("train", "train one model variant");
  add_config_flags(train_cmd, f);
  add_model_flags(train_cmd, f);
  train_cmd->add_option("--data", data, "dataset file")->required();
  train_cmd->add_option("--out", out, "checkpoint to write")->required();
  train_cmd->add_option("--variant", f.variant, "full, nc, nf or fc");
  train_cmd->add_option("--loss-log", loss_log, "per-epoch loss CSV");

  auto* eval = app.add_subcommand("eval", "evaluate checkpoints or the HA baseline on the test split");
  add_config_flags(eval, f);
  eval->add_option("--history", f.history, "input intervals per window (HA)");
  eval->add_option("--data", data, "dataset file")->required();
  eval->add_option("--checkpoint", checkpoints, "checkpoint file (repeatable)");
  eval->add_option("--variant", f.variant, "ha, or the variant the checkpoint must hold");
  eval->add_option("--out", out, "output directory for metrics.csv")->required();

  auto* ablate = app.add_subcommand("ablate", "train full, nc, nf and fc and evaluate them with HA");
  add_config_flags(ablate, f);
  add_model_flags(ablate, f);
  ablate->add_option("--data", data, "dataset file")->required();
  ablate->add_option("--out", out, "output directory")->required();

  auto* analyze = app.add_subcommand("analyze", "flow churn series and high-churn evaluation");
  add_config_flags(analyze, f);
  analyze->add_option("--history", f.history, "input intervals per window (HA)");
  analyze->add_option("--data", data, "dataset file")->required();
  analyze->add_option("--checkpoint", checkpoints, "checkpoint file (repeatable)");
  analyze->add_option("--emd-threshold", emd_threshold, "EMD churn above which a window counts as high churn");
  analyze->add_option("--out", out, "output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "train and evaluate one model per layer count");
  add_config_flags(sweep, f);
  add_model_flags(sweep, f);
  sweep->remove_option(sweep->get_option("--layers"));
  sweep->add_option("--layers", depths, "comma-separated layer counts")->delimiter(',');
  sweep->add_option("--data", data, "dataset file")->required();
  sweep->add_option("--out", out, "output directory for layer_sweep.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) return cmd_synth(f, out);
    if (*ingest) return cmd_ingest(f, trips, out);
    if (*train_cmd) return cmd_train(f, data, out, loss_log);
    if (*eval) return cmd_eval(f, data, checkpoints, out);
    if (*ablate) return cmd_ablate(f, data, out);
    if (*analyze) return cmd_analyze(f, data, checkpoints, emd_threshold, out);
    if (*sweep) return cmd_sweep(f, data, depths, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "flowconv: error: " << msg << '\n';
    return 1;
  }
  return 1;
}
