#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "flowconv/analysis.hpp"
#include "flowconv/errors.hpp"

namespace flowconv {

namespace {

constexpr double kMassTolerance = 1e-12;

}  // namespace

// Successive shortest paths on the bipartite transport network
//   S0 -> supply i (cap a_i) -> demand j (cost c_ij) -> T0 (cap b_j)
// with Johnson potentials so every Dijkstra runs on non-negative reduced
// costs. Dense O(V^2) Dijkstra, since every supply reaches every demand.
double earth_movers_distance(std::span<const double> supply, std::span<const double> demand,
                             const Eigen::MatrixXd& ground) {
  const int ns = static_cast<int>(supply.size());
  const int nd = static_cast<int>(demand.size());
  if (ground.rows() != ns || ground.cols() != nd) throw ShapeError("earth_movers_distance: ground matrix shape");
  const double total_a = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double total_b = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (std::abs(total_a - total_b) > 1e-9 * std::max({1.0, total_a, total_b}))
    throw std::invalid_argument("earth_movers_distance: supply and demand masses differ");
  if (!(total_a > 0.0)) return 0.0;

  // Node layout: supplies [0, ns), demands [ns, ns+nd), S0 = ns+nd, T0 = ns+nd+1.
  const int src = ns + nd;
  const int sink = src + 1;
  const int nodes = sink + 1;
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<double> rem_supply(supply.begin(), supply.end());
  std::vector<double> rem_demand(demand.begin(), demand.end());
  Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(ns, nd);
  std::vector<double> potential(nodes, 0.0);
  std::vector<double> dist(nodes);
  std::vector<int> parent(nodes);
  std::vector<char> done(nodes);

  auto open_supply = [&](int i) { return rem_supply[i] > kMassTolerance; };
  auto open_demand = [&](int j) { return rem_demand[j] > kMassTolerance; };

  for (;;) {
    bool any_supply = false;
    for (int i = 0; i < ns; ++i) any_supply |= open_supply(i);
    if (!any_supply) break;

    std::fill(dist.begin(), dist.end(), inf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    dist[src] = 0.0;
    done[src] = 1;
    for (int i = 0; i < ns; ++i)
      if (open_supply(i)) {
        dist[i] = potential[src] - potential[i];
        parent[i] = src;
      }

    for (;;) {
      int u = -1;
      for (int v = 0; v < nodes; ++v)
        if (!done[v] && dist[v] < inf && (u < 0 || dist[v] < dist[u])) u = v;
      if (u < 0 || u == sink) break;
      done[u] = 1;
      if (u < ns) {
        for (int j = 0; j < nd; ++j) {
          const int v = ns + j;
          if (done[v]) continue;
          const double nd_ = dist[u] + ground(u, j) + potential[u] - potential[v];
          if (nd_ < dist[v]) {
            dist[v] = nd_;
            parent[v] = u;
          }
        }
      } else {
        const int j = u - ns;
        for (int i = 0; i < ns; ++i) {
          if (done[i] || !(flow(i, j) > kMassTolerance)) continue;
          const double nd_ = dist[u] - ground(i, j) + potential[u] - potential[i];
          if (nd_ < dist[i]) {
            dist[i] = nd_;
            parent[i] = u;
          }
        }
        if (open_demand(j) && !done[sink]) {
          const double nd_ = dist[u] + potential[u] - potential[sink];
          if (nd_ < dist[sink]) {
            dist[sink] = nd_;
            parent[sink] = u;
          }
        }
      }
    }
    if (!(dist[sink] < inf)) throw std::runtime_error("earth_movers_distance: no augmenting path");

    for (int v = 0; v < nodes; ++v) potential[v] += std::min(dist[v], dist[sink]);

    // Bottleneck along sink <- d <- s <- ... <- S0.
    double amount = rem_demand[parent[sink] - ns];
    for (int v = parent[sink]; parent[v] != src; v = parent[v]) {
      const int p = parent[v];
      if (v >= ns) continue;  // s <- d is a reverse arc: v is a supply, p a demand
      amount = std::min(amount, flow(v, p - ns));
    }
    int first = parent[sink];
    while (parent[first] != src) first = parent[first];
    amount = std::min(amount, rem_supply[first]);

    rem_demand[parent[sink] - ns] -= amount;
    rem_supply[first] -= amount;
    for (int v = parent[sink]; parent[v] != src; v = parent[v]) {
      const int p = parent[v];
      if (v >= ns)
        flow(p, v - ns) += amount;  // forward arc p(supply) -> v(demand)
      else
        flow(v, p - ns) -= amount;  // reverse arc p(demand) -> v(supply)
    }
  }

  const double shipped = flow.sum();
  return shipped > 0.0 ? (flow.array() * ground.array()).sum() / shipped : 0.0;
}

}  // namespace flowconv
