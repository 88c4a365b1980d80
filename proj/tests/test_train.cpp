#include "doctest.h"
#include "flowconv/train.hpp"
#include "flowconv/rng.hpp"
#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <sstream>

using namespace flowconv;

namespace {

ModelSpec tiny(Variant v, int layers = 2, int hidden = 3, int history = 3) {
  ModelSpec s;
  s.m = 2;
  s.k = 2;
  s.layers = layers;
  s.hidden = hidden;
  s.history = history;
  s.variant = v;
  return s;
}

ParamSet random_params(const ModelSpec& spec, std::uint64_t seed, double scale = 0.5) {
  ParamSet p = make_params(spec);
  Rng rng(seed);
  for (auto& a : p)
    for (Eigen::Index i = 0; i < a.size(); ++i) a.values[i] = rng.uniform(-scale, scale);
  return p;
}

Window random_window(int n, int T, Rng& rng) {
  Window w;
  for (int t = 0; t < T; ++t) {
    w.inputs.push_back(oracle::random_matrix(n, 2, rng).cwiseAbs());
    w.flows.push_back(SparseFlowMatrix::from_dense(oracle::random_flow(n, 0.5, rng)));
  }
  w.target = oracle::random_matrix(n, 2, rng).cwiseAbs();
  w.target_t = T + 1;
  return w;
}

WindowDataset random_dataset(int count, int n, int T, Rng& rng) {
  WindowDataset d;
  d.history = T;
  for (int i = 0; i < count; ++i) d.windows.push_back(random_window(n, T, rng));
  return d;
}

double window_loss(const Window& w, const ModelSpec& spec, const ParamSet& p) {
  return loss(forward(w.inputs, w.flows, spec, p), w.target);
}

}  // namespace

TEST_CASE("loss") {
  Signal a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 1, 2, 3, 4;
  CHECK(loss(a, b) == 0.0);
  b(1, 0) = 5;
  CHECK(loss(a, b) == 4.0);
  b(0, 1) = 0;
  CHECK(loss(a, b) == 8.0);
  CHECK_THROWS_AS(loss(a, Signal::Zero(3, 2)), ShapeError);
}

TEST_CASE("head bias gradient") {
  const ModelSpec spec = tiny(Variant::full);
  Rng rng(1);
  const Window w = random_window(4, 3, rng);
  const auto trans = make_transitions(w.flows);
  const ParamSet p = random_params(spec, 2);
  const Signal pred = forward(w.inputs, w.flows, spec, p);

  const WindowGradient exact = backward(w.inputs, trans, pred, spec, p);
  CHECK(exact.loss == 0.0);
  CHECK(exact.grads.at("head/bias").values.isZero());

  const WindowGradient g = backward(w.inputs, trans, w.target, spec, p);
  const Eigen::Vector2d expect = 2.0 * (pred - w.target).colwise().sum().transpose();
  CHECK((g.grads.at("head/bias").values - expect).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(g.loss == doctest::Approx(loss(pred, w.target)).epsilon(1e-14));
}

TEST_CASE("backward agrees with central differences for every variant") {
  for (Variant v : {Variant::full, Variant::nc, Variant::nf, Variant::fc}) {
    CAPTURE(to_string(v));
    const ModelSpec spec = tiny(v);
    Rng rng(3);
    const Window w = random_window(4, 3, rng);
    const auto trans = make_transitions(w.flows);
    ParamSet p = random_params(spec, 4);
    const WindowGradient g = backward(w.inputs, trans, w.target, spec, p);

    for (auto& a : p) {
      CAPTURE(a.name);
      for (int s = 0; s < 4; ++s) {
        const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(a.size())));
        const double keep = a.values[i];
        const double h = 1e-5;
        a.values[i] = keep + h;
        const double up = window_loss(w, spec, p);
        a.values[i] = keep - h;
        const double down = window_loss(w, spec, p);
        a.values[i] = keep;
        const double fd = (up - down) / (2 * h);
        const double an = g.grads.at(a.name).values[i];
        CHECK(std::abs(an - fd) / std::max(std::abs(an) + std::abs(fd), 1e-6) <= 1e-6);
      }
    }
  }
}

TEST_CASE("non-finite values are reported by stage") {
  const ModelSpec spec = tiny(Variant::full);
  Rng rng(5);
  const Window w = random_window(4, 3, rng);
  const auto trans = make_transitions(w.flows);
  ParamSet p = random_params(spec, 6);
  p.at("layer2/u/bias").values[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    backward(w.inputs, trans, w.target, spec, p);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("layer 2 step 1 update gate") != std::string::npos);
  }
  p = random_params(spec, 6);
  p.at("head/weight").values[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(backward(w.inputs, trans, w.target, spec, p), NumericError);
}

TEST_CASE("adam") {
  ModelSpec spec = tiny(Variant::full, 1, 2, 1);
  ParamSet p = make_params(spec);
  ParamSet g = p.zeros_like();
  g.at("head/bias").values << 0.3, -4.0;
  OptimizerState st = make_optimizer(p, AdamConfig{});
  adam_step(p, g, st);
  CHECK(st.step == 1);
  // First step moves each coordinate by -lr * sign(g) up to eps.
  CHECK(p.at("head/bias").values[0] == doctest::Approx(-2e-4 / (1 + 1e-8 / 0.3)).epsilon(1e-12));
  CHECK(p.at("head/bias").values[1] == doctest::Approx(2e-4 / (1 + 1e-8 / 4.0)).epsilon(1e-12));
  CHECK(p.at("head/weight").values.isZero());

  // Hand-unrolled second step for one coordinate.
  const double g2 = 0.1;
  g.at("head/bias").values << g2, 0;
  adam_step(p, g, st);
  const double m = 0.9 * 0.1 * 0.3 + 0.1 * g2;
  const double v = 0.999 * 0.001 * 0.09 + 0.001 * g2 * g2;
  const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.998001);
  const double first = -2e-4 / (1 + 1e-8 / 0.3);
  CHECK(p.at("head/bias").values[0] == doctest::Approx(first - 2e-4 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-12));
}

TEST_CASE("batch gradient is thread-count independent and averages windows") {
  const ModelSpec spec = tiny(Variant::full);
  Rng rng(7);
  const WindowDataset d = random_dataset(5, 4, 3, rng);
  const auto prepared = prepare_windows(d);
  std::vector<const PreparedWindow*> batch;
  for (const auto& w : prepared) batch.push_back(&w);
  const ParamSet p = random_params(spec, 8);
  const WindowGradient one = batch_gradient(batch, spec, p, 1);
  const WindowGradient three = batch_gradient(batch, spec, p, 3);
  CHECK(one.loss == three.loss);
  CHECK(one.grads == three.grads);

  double total = 0;
  for (const auto& w : d.windows) total += window_loss(w, spec, p);
  CHECK(one.loss == doctest::Approx(total / 5).epsilon(1e-13));
  CHECK(dataset_loss(prepared, spec, p, 2) == doctest::Approx(total / 5).epsilon(1e-13));
}

TEST_CASE("training") {
  const ModelSpec spec = tiny(Variant::full, 1, 4, 2);
  Rng rng(9);
  const MinMaxScaler scaler;

  SUBCASE("zero epochs returns the initialization") {
    const WindowDataset d = random_dataset(3, 4, 2, rng);
    TrainConfig cfg;
    cfg.epochs = 0;
    const TrainResult r = train(d, nullptr, spec, cfg, scaler);
    ParamSet init = make_params(spec);
    glorot_init(init, spec, cfg.seed);
    CHECK(r.checkpoint.params == init);
    CHECK(r.log.empty());
  }
  SUBCASE("a single window can be fitted") {
    const WindowDataset d = random_dataset(1, 4, 2, rng);
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.lr = 1e-2;
    std::vector<double> seen;
    const TrainResult r = train(d, nullptr, spec, cfg, scaler, [&](const EpochLog& e) { seen.push_back(e.train_loss); });
    REQUIRE(r.log.size() == 300);
    CHECK(seen.size() == 300);
    CHECK(r.log.back().train_loss < 1e-3);
    CHECK(r.log.back().train_loss < r.log.front().train_loss);
  }
  SUBCASE("seeded runs are identical") {
    const WindowDataset d = random_dataset(10, 4, 2, rng);
    const WindowDataset v = random_dataset(3, 4, 2, rng);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch = 3;
    const TrainResult a = train(d, &v, spec, cfg, scaler);
    cfg.threads = 2;
    const TrainResult b = train(d, &v, spec, cfg, scaler);
    CHECK(a.checkpoint == b.checkpoint);
    for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(*a.log[i].val_loss == *b.log[i].val_loss);
  }
  SUBCASE("empty training set") {
    CHECK_THROWS_AS(train(WindowDataset{}, nullptr, spec, TrainConfig{}, scaler), std::invalid_argument);
  }
}

TEST_CASE("checkpoint persistence") {
  const ModelSpec spec = tiny(Variant::nc);
  Rng rng(10);
  const WindowDataset d = random_dataset(4, 4, 3, rng);
  TrainConfig cfg;
  cfg.epochs = 2;
  MinMaxScaler scaler;
  scaler.vmax = {12.0, 9.0};
  scaler.fmax = 4.0;
  const TrainResult r = train(d, nullptr, spec, cfg, scaler);
  REQUIRE(r.checkpoint.optimizer.has_value());

  std::stringstream first;
  save_checkpoint(first, r.checkpoint);
  const Checkpoint loaded = load_checkpoint(first);
  CHECK(loaded == r.checkpoint);
  std::stringstream second;
  save_checkpoint(second, loaded);
  CHECK(first.str() == second.str());

  const auto& w = d.windows[0];
  CHECK(forward(w.inputs, w.flows, loaded.spec, loaded.params) ==
        forward(w.inputs, w.flows, spec, r.checkpoint.params));

  std::string bytes = first.str();
  std::stringstream bad(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
  bytes[0] = 'X';
  std::stringstream magic(bytes);
  CHECK_THROWS_AS(load_checkpoint(magic), FormatError);
}

TEST_CASE("loss log") {
  const std::vector<EpochLog> log{{1, 0.5, 0.25}, {2, 0.125, std::nullopt}};
  std::ostringstream out;
  write_loss_log(out, log);
  CHECK(out.str() == "epoch,train_loss,val_loss\n1,0.5,0.25\n2,0.125,\n");
}
