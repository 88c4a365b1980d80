#include "doctest.h"
#include "flowconv/model.hpp"
#include "flowconv/rng.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numeric>

using namespace flowconv;

namespace {

ModelSpec small_spec(Variant v, int m = 2, int k = 2, int layers = 2, int hidden = 3, int history = 3) {
  ModelSpec s;
  s.m = m;
  s.k = k;
  s.layers = layers;
  s.hidden = hidden;
  s.history = history;
  s.diffusion_steps = 2;
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

std::vector<Signal> random_volumes(int n, int T, Rng& rng) {
  std::vector<Signal> v;
  for (int t = 0; t < T; ++t) v.push_back(oracle::random_matrix(n, 2, rng).cwiseAbs());
  return v;
}

std::vector<SparseFlowMatrix> random_flows(int n, int T, Rng& rng) {
  std::vector<SparseFlowMatrix> f;
  for (int t = 0; t < T; ++t) f.push_back(SparseFlowMatrix::from_dense(oracle::random_flow(n, 0.4, rng)));
  return f;
}

double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("grid reshapes") {
  Signal s(6, 1);
  for (int i = 0; i < 6; ++i) s(i, 0) = i;
  const GridTensor g = reshape_to_grid(s, 2, 3);
  CHECK(g.values(region_index(1, 2, 3), 0) == 5.0);
  CHECK(reshape_to_graph(g) == s);
  CHECK_THROWS_AS(reshape_to_grid(s, 4, 2), ShapeError);
}

TEST_CASE("variant names") {
  for (Variant v : {Variant::full, Variant::nc, Variant::nf, Variant::fc}) CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_variant("gru"), std::invalid_argument);
}

TEST_CASE("parameter layout") {
  ModelSpec spec = small_spec(Variant::full, 3, 2, 2, 4, 5);
  const ParamSet p = make_params(spec);
  CHECK(p.at("layer1/r/theta").dims == std::vector<int>{6, 4, 2, 2});
  CHECK(p.at("layer2/u/conv").dims == std::vector<int>{3, 3, 8, 4});
  CHECK(p.at("layer2/h/bias").dims == std::vector<int>{4});
  CHECK(p.at("head/weight").dims == std::vector<int>{20, 2});
  CHECK(!p.contains("layer1/r/fc"));

  spec.variant = Variant::fc;
  const ParamSet f = make_params(spec);
  CHECK(f.at("layer1/r/fc").dims == std::vector<int>{36, 24});
  CHECK(f.at("layer1/r/bias").dims == std::vector<int>{24});
  CHECK(!f.contains("layer1/r/theta"));

  spec.variant = Variant::nc;
  CHECK(!make_params(spec).contains("layer1/r/conv"));
  spec.variant = Variant::nf;
  CHECK(!make_params(spec).contains("layer1/r/theta"));

  spec.hidden = 0;
  CHECK_THROWS(spec.validate());
}

TEST_CASE("glorot init is seeded and bounded") {
  const ModelSpec spec = small_spec(Variant::full);
  ParamSet a = make_params(spec), b = make_params(spec), c = make_params(spec);
  glorot_init(a, spec, 7);
  glorot_init(b, spec, 7);
  glorot_init(c, spec, 8);
  CHECK(a == b);
  CHECK(!(a == c));
  const double bound = std::sqrt(6.0 / (5 * 2 * 2 + 3));
  CHECK(a.at("layer1/r/theta").values.cwiseAbs().maxCoeff() <= bound);
  CHECK(a.at("layer1/r/bias").values.isZero());
  CHECK(a.at("head/bias").values.isZero());
}

TEST_CASE("cell with zero parameters") {
  const ModelSpec spec = small_spec(Variant::full);
  const ParamSet p = make_params(spec);
  Rng rng(1);
  const Signal x = oracle::random_matrix(4, 2, rng);
  const Signal h = oracle::random_matrix(4, 3, rng);
  const auto f = SparseFlowMatrix::from_dense(oracle::random_flow(4, 0.5, rng));
  const CellState s = cell_step(x, f, h, cell_view(p, spec, 0), 2, 2);
  CHECK((s.reset.array() == 0.5).all());
  CHECK((s.update.array() == 0.5).all());
  CHECK(s.candidate.isZero());
  CHECK(max_abs(s.hidden - 0.5 * h) == 0.0);

  const CellState z = cell_step(x, f, Signal::Zero(4, 3), cell_view(p, spec, 0), 2, 2);
  CHECK(z.hidden.isZero());
}

TEST_CASE("saturated update gate copies the previous state") {
  const ModelSpec spec = small_spec(Variant::full);
  ParamSet p = random_params(spec, 3);
  p.at("layer1/u/bias").values.setConstant(50.0);
  Rng rng(2);
  const Signal x = oracle::random_matrix(4, 2, rng);
  const Signal h = oracle::random_matrix(4, 3, rng) * 0.1;
  const auto f = SparseFlowMatrix::from_dense(oracle::random_flow(4, 0.5, rng));
  const CellState s = cell_step(x, f, h, cell_view(p, spec, 0), 2, 2);
  CHECK(max_abs(s.hidden - h) <= 1e-6);
}

TEST_CASE("single-region cell matches a scalar recurrence") {
  // 1x1 grid with a self-loop: both transitions are [1], and a same-padded
  // 3x3 kernel only sees its centre tap.
  for (Variant v : {Variant::full, Variant::nc, Variant::nf}) {
    ModelSpec spec = small_spec(v, 1, 1, 1, 1, 1);
    const ParamSet p = random_params(spec, 11, 1.0);
    const SparseFlowMatrix f{1, {{0, 0, 3.0}}};
    const double x0 = 0.7, x1 = -0.2, hp = 0.4;

    auto gate = [&](const std::string& g, std::array<double, 3> in) {
      double pre = p.at("layer1/" + g + "/bias").values[0];
      for (int c = 0; c < 3; ++c) {
        double w = 0;
        if (v != Variant::nf)
          for (int j = 0; j < 4; ++j) w += p.at("layer1/" + g + "/theta").values[c * 4 + j];
        if (v != Variant::nc) w += p.at("layer1/" + g + "/conv").values[(4 * 3 + c) * 1];
        pre += w * in[c];
      }
      return pre;
    };
    const double r = oracle::sigmoid(gate("r", {x0, x1, hp}));
    const double u = oracle::sigmoid(gate("u", {x0, x1, hp}));
    const double c = std::tanh(gate("h", {x0, x1, r * hp}));
    const double expect = u * hp + (1 - u) * c;

    Signal x(1, 2), h(1, 1);
    x << x0, x1;
    h << hp;
    const CellState s = cell_step(x, f, h, cell_view(p, spec, 0), 1, 1);
    CHECK(s.reset(0, 0) == doctest::Approx(r).epsilon(1e-14));
    CHECK(s.hidden(0, 0) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("fc cell on one region is a plain GRU") {
  const ModelSpec spec = small_spec(Variant::fc, 1, 1, 1, 2, 1);
  const ParamSet p = random_params(spec, 5, 1.0);
  Rng rng(6);
  const Eigen::RowVectorXd x = oracle::random_matrix(1, 2, rng);
  const Eigen::RowVectorXd h = oracle::random_matrix(1, 2, rng);
  auto affine = [&](const std::string& g, const Eigen::RowVectorXd& in) {
    const auto& w = p.at("layer1/" + g + "/fc").values;
    Eigen::RowVectorXd out = p.at("layer1/" + g + "/bias").values.transpose();
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j) out[j] += in[i] * w[i * 2 + j];
    return out;
  };
  Eigen::RowVectorXd xh(4);
  xh << x, h;
  const Eigen::RowVectorXd r = affine("r", xh).unaryExpr(&oracle::sigmoid);
  const Eigen::RowVectorXd u = affine("u", xh).unaryExpr(&oracle::sigmoid);
  Eigen::RowVectorXd xrh(4);
  xrh << x, r.cwiseProduct(h);
  const Eigen::RowVectorXd c = affine("h", xrh).array().tanh();
  const Eigen::RowVectorXd expect = u.cwiseProduct(h) + (Eigen::RowVectorXd::Ones(2) - u).cwiseProduct(c);

  const CellState s = cell_step(Signal(x), SparseFlowMatrix{1, {}}, Signal(h), cell_view(p, spec, 0), 1, 1);
  CHECK(max_abs(s.hidden - expect) <= 1e-14);
}

TEST_CASE("graph-only cell is equivariant under region relabelling") {
  const ModelSpec spec = small_spec(Variant::nc);
  const ParamSet p = random_params(spec, 9);
  Rng rng(10);
  const Eigen::MatrixXd a = oracle::random_flow(4, 0.5, rng);
  const Signal x = oracle::random_matrix(4, 2, rng), h = oracle::random_matrix(4, 3, rng);
  const std::vector<int> perm{2, 0, 3, 1};
  Eigen::MatrixXd pa(4, 4);
  Signal px(4, 2), ph(4, 3);
  for (int i = 0; i < 4; ++i) {
    px.row(perm[i]) = x.row(i);
    ph.row(perm[i]) = h.row(i);
    for (int j = 0; j < 4; ++j) pa(perm[i], perm[j]) = a(i, j);
  }
  const auto cell = cell_view(p, spec, 0);
  const Signal base = cell_step(x, SparseFlowMatrix::from_dense(a), h, cell, 2, 2).hidden;
  const Signal moved = cell_step(px, SparseFlowMatrix::from_dense(pa), ph, cell, 2, 2).hidden;
  for (int i = 0; i < 4; ++i) CHECK(max_abs(moved.row(perm[i]) - base.row(i)) <= 1e-13);
}

TEST_CASE("gate ranges and state bounds over random steps") {
  Rng rng(12);
  for (Variant v : {Variant::full, Variant::nc, Variant::nf, Variant::fc}) {
    const ModelSpec spec = small_spec(v, 2, 3, 1, 4, 1);
    const ParamSet p = random_params(spec, 13, 2.0);
    const auto cell = cell_view(p, spec, 0);
    for (int rep = 0; rep < 50; ++rep) {
      const Signal x = oracle::random_matrix(6, 2, rng, 5.0);
      const Signal h = oracle::random_matrix(6, 4, rng);
      const auto f = SparseFlowMatrix::from_dense(oracle::random_flow(6, 0.4, rng));
      const CellState s = cell_step(x, f, h, cell, 2, 3);
      CHECK((s.reset.array() >= 0).all());
      CHECK((s.reset.array() <= 1).all());
      CHECK((s.update.array() >= 0).all());
      CHECK((s.update.array() <= 1).all());
      CHECK((s.candidate.array().abs() <= 1).all());
      CHECK((s.hidden.array().abs() <= 1).all());
    }
  }
}

TEST_CASE("unroll") {
  const ModelSpec spec = small_spec(Variant::full, 2, 2, 1, 3, 3);
  const ParamSet p = random_params(spec, 14);
  const auto cell = cell_view(p, spec, 0);
  Rng rng(15);
  const auto vols = random_volumes(4, 3, rng);
  const auto flows = random_flows(4, 3, rng);
  const auto trans = make_transitions(flows);

  const auto one = unroll(std::span(vols).first(1), std::span(trans).first(1), cell, 2, 2);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == cell_step(vols[0], trans[0], Signal::Zero(4, 3), cell, 2, 2).hidden);

  const auto all = unroll(vols, trans, cell, 2, 2);
  REQUIRE(all.size() == 3);
  Signal h = Signal::Zero(4, 3);
  for (int t = 0; t < 3; ++t) {
    h = cell_step(vols[t], trans[t], h, cell, 2, 2).hidden;
    CHECK(all[t] == h);
  }

  const ParamSet zero = make_params(spec);
  for (const auto& s : unroll(vols, trans, cell_view(zero, spec, 0), 2, 2)) CHECK(s.isZero());
}

TEST_CASE("forward") {
  Rng rng(16);
  const ModelSpec spec = small_spec(Variant::full);
  const auto vols = random_volumes(4, 3, rng);
  const auto flows = random_flows(4, 3, rng);

  SUBCASE("zero parameters except the head bias") {
    ParamSet p = make_params(spec);
    p.at("head/bias").values << 0.25, -1.5;
    const Signal y = forward(vols, flows, spec, p);
    for (int i = 0; i < 4; ++i) {
      CHECK(y(i, 0) == 0.25);
      CHECK(y(i, 1) == -1.5);
    }
  }
  SUBCASE("deterministic and shaped") {
    const ParamSet p = random_params(spec, 17);
    const Signal a = forward(vols, flows, spec, p);
    CHECK(a.rows() == 4);
    CHECK(a.cols() == 2);
    CHECK(a == forward(vols, flows, spec, p));
    CHECK(a == forward(vols, std::span<const TransitionPair<double>>(make_transitions(flows)), spec, p));
  }
  SUBCASE("invariant to flow scale") {
    const ParamSet p = random_params(spec, 18);
    const Signal a = forward(vols, flows, spec, p);
    for (double c : {0.5, 3.0, 100.0}) {
      std::vector<SparseFlowMatrix> scaled;
      for (const auto& f : flows) scaled.push_back(f.scaled(c));
      CHECK(max_abs(forward(vols, scaled, spec, p) - a) <= 1e-10);
    }
  }
  SUBCASE("window length must match history") {
    const ParamSet p = make_params(spec);
    CHECK_THROWS_AS(forward(std::span(vols).first(2), std::span(flows).first(2), spec, p), ShapeError);
  }
}

TEST_CASE("full with a zero grid kernel equals nc") {
  Rng rng(19);
  const ModelSpec full = small_spec(Variant::full), nc = small_spec(Variant::nc);
  ParamSet pf = random_params(full, 20);
  ParamSet pn = make_params(nc);
  for (auto& a : pf)
    if (a.name.ends_with("/conv")) a.values.setZero();
  for (auto& a : pn) a.values = pf.at(a.name).values;
  const auto vols = random_volumes(4, 3, rng);
  const auto flows = random_flows(4, 3, rng);
  CHECK(max_abs(forward(vols, flows, full, pf) - forward(vols, flows, nc, pn)) <= 1e-12);
}
