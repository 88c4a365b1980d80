#include "doctest.h"
#include "flowconv/analysis.hpp"
#include "flowconv/rng.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace flowconv;

namespace {

GridSpec unit_grid(int m, int k, std::int64_t interval = 3600) {
  GridSpec g;
  g.lat_min = 0;
  g.lat_max = 1;
  g.lon_min = 0;
  g.lon_max = 1;
  g.m = m;
  g.k = k;
  g.interval_seconds = interval;
  g.t0 = 0;
  return g;
}

}  // namespace

TEST_CASE("rmse and mae") {
  Signal p(1, 2), t(1, 2);
  p << 1, 2;
  t << 1, 4;
  const std::vector<Signal> ps{p, p}, ts{t, Signal(p)};
  CHECK(rmse(ps, ts) == doctest::Approx(1.0));  // sqrt(4 / 4)
  CHECK(mae(ps, ts) == doctest::Approx(0.5));
  const EvalReport r = evaluate(ps, ts);
  CHECK(r.instances == 2);
  CHECK(rmse(std::span<const Signal>(), std::span<const Signal>()) == 0.0);
  CHECK_THROWS_AS(rmse(ps, std::span(ts).first(1)), ShapeError);
}

TEST_CASE("historical average") {
  Signal a(1, 2), b(1, 2);
  a << 1, 2;
  b << 3, 6;
  const std::vector<Signal> h{a, b};
  const Signal avg = ha_predict(h);
  CHECK(avg(0, 0) == 2.0);
  CHECK(avg(0, 1) == 4.0);
  CHECK_THROWS(ha_predict(std::span<const Signal>()));
}

TEST_CASE("jaccard churn examples") {
  // Region 0 keeps neighbour 1 and gains 2; region 1 is unchanged; region 2 gains 0.
  const SparseFlowMatrix a{3, {{0, 1, 1.0}}};
  const SparseFlowMatrix b{3, {{0, 1, 2.0}, {2, 0, 1.0}}};
  CHECK(jaccard_churn(a, b) == doctest::Approx((0.5 + 1.0 + 0.0) / 3.0));
  CHECK(jaccard_churn(a, a) == 1.0);
  CHECK(jaccard_churn(SparseFlowMatrix{4, {}}, SparseFlowMatrix{4, {}}) == 1.0);
  CHECK(jaccard_churn(SparseFlowMatrix{2, {{0, 0, 5.0}}}, SparseFlowMatrix{2, {}}) == 1.0);
  CHECK_THROWS_AS(jaccard_churn(a, SparseFlowMatrix{2, {}}), ShapeError);
}

TEST_CASE("jaccard churn matches the set oracle") {
  Rng rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::MatrixXd x = oracle::random_flow(5, 0.3, rng), y = oracle::random_flow(5, 0.3, rng);
    CHECK(std::abs(jaccard_churn(SparseFlowMatrix::from_dense(x), SparseFlowMatrix::from_dense(y)) -
                   oracle::jaccard(x, y)) <= 1e-12);
  }
}

TEST_CASE("earth mover's distance") {
  Eigen::MatrixXd ground(2, 2);
  ground << 0, 1, 1, 0;
  const std::vector<double> a{1.0, 0.0}, b{0.0, 1.0}, c{0.5, 0.5};
  CHECK(earth_movers_distance(a, a, ground) == 0.0);
  CHECK(earth_movers_distance(a, b, ground) == doctest::Approx(1.0));
  CHECK(earth_movers_distance(a, c, ground) == doctest::Approx(0.5));
  CHECK_THROWS(earth_movers_distance(a, std::vector<double>{2.0, 0.0}, ground));

  Rng rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    const int ns = 1 + static_cast<int>(rng.below(4)), nd = 1 + static_cast<int>(rng.below(4));
    std::vector<double> s(ns), d(nd);
    double ts = 0, td = 0;
    for (auto& v : s) ts += v = rng.uniform(0.05, 1.0);
    for (auto& v : d) td += v = rng.uniform(0.05, 1.0);
    for (auto& v : s) v /= ts;
    for (auto& v : d) v /= td;
    Eigen::MatrixXd cost(ns, nd);
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < nd; ++j) cost(i, j) = rng.uniform(0, 3);
    CHECK(std::abs(earth_movers_distance(s, d, cost) - oracle::transport_by_vertex_enumeration(s, d, cost)) <= 1e-9);
  }
}

TEST_CASE("emd churn on a five-region strip") {
  const GridSpec grid = unit_grid(1, 5);
  // Region 4 receives from region 0 at t and from region 2 at t+1: two cells of travel.
  const SparseFlowMatrix a{5, {{0, 4, 3.0}, {1, 3, 1.0}}};
  const SparseFlowMatrix b{5, {{2, 4, 1.0}, {1, 3, 2.0}, {0, 1, 1.0}}};
  const EmdChurn e = emd_churn(a, b, grid);
  CHECK(e.included_regions == 2);
  CHECK(e.value == doctest::Approx((2.0 + 0.0) / 2.0));
  CHECK(!e.all_excluded);

  // Split in-flow: half the mass moves one cell.
  const SparseFlowMatrix c{5, {{0, 4, 2.0}, {1, 4, 2.0}}};
  const SparseFlowMatrix d{5, {{1, 4, 1.0}}};
  CHECK(emd_churn(c, d, grid).value == doctest::Approx(0.5));

  const EmdChurn none = emd_churn(SparseFlowMatrix{5, {}}, b, grid);
  CHECK(none.all_excluded);
  CHECK(none.value == 0.0);

  // Invariant to scaling either side.
  CHECK(emd_churn(a.scaled(7.0), b.scaled(0.5), grid).value == doctest::Approx(e.value).epsilon(1e-12));
}

TEST_CASE("emd churn uses Euclidean cell distance") {
  const GridSpec grid = unit_grid(2, 2);
  const SparseFlowMatrix a{4, {{0, 1, 1.0}}};
  const SparseFlowMatrix b{4, {{3, 1, 1.0}}};
  CHECK(emd_churn(a, b, grid).value == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("churn series, filtering and hourly means") {
  IntervalSeries s;
  s.grid = unit_grid(1, 3);
  s.flows = {SparseFlowMatrix{3, {{0, 1, 1.0}}}, SparseFlowMatrix{3, {{2, 1, 1.0}}}, SparseFlowMatrix{3, {{2, 1, 4.0}}},
             SparseFlowMatrix{3, {}}};
  s.volumes.resize(4);
  const auto churn = churn_series(s);
  REQUIRE(churn.size() == 3);
  CHECK(churn[0].t == 1);
  CHECK(churn[0].hour == 0);
  CHECK(churn[1].hour == 1);
  CHECK(churn[0].emd == doctest::Approx(2.0));
  CHECK(churn[1].emd == 0.0);
  CHECK(churn[1].jaccard == 1.0);
  CHECK(!churn[2].emd_defined);

  WindowDataset d;
  d.history = 1;
  for (std::int64_t t : {2, 3, 4, 5}) {
    Window w;
    w.target_t = t;
    d.windows.push_back(w);
  }
  const auto high = filter_high_churn(d, churn, 1.0);
  REQUIRE(high.size() == 1);
  CHECK(high.windows[0].target_t == 2);
  CHECK(filter_high_churn(d, churn, 2.0).empty());  // strictly above
  CHECK(filter_high_churn(d, churn, -1.0).size() == 2);

  const auto hourly = hourly_aggregate(churn, s.grid);
  CHECK(hourly[0].count == 1);
  CHECK(hourly[2].count == 1);
  CHECK(hourly[2].emd_count == 0);
  CHECK(hourly[5].count == 0);
  CHECK_THROWS(hourly_aggregate(churn, unit_grid(1, 3, 7 * 3600)));
}
