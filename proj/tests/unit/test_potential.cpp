#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "pam/error.hpp"
#include "pam/potential.hpp"
#include "pam/rng.hpp"

using namespace pam;

namespace {

// Brute-force island oracle: distances by all-pairs BFS from every Pi vertex,
// components by repeated flood fill over an explicit set.
struct Oracle {
  std::set<VertexId> Pi, D;
  std::vector<std::set<VertexId>> comps;
};

Oracle brute_force(const Potential& xi, const Ball& b, const LandscapeConfig& cfg) {
  const auto& g = *b.graph;
  Oracle o;
  const double a = xi.rho * std::log(std::log(std::max<double>(b.size(), std::exp(std::exp(1.0)))));
  const double S = b.radius > 1 ? std::pow(std::log(double(b.radius)), cfg.alpha) : 0.0;
  for (VertexId v : b.members)
    if (xi[v] > a - 2 * cfg.A) o.Pi.insert(v);
  for (VertexId z : o.Pi) {
    const auto dist = g.distances_from(z);
    for (VertexId v : b.members)
      if (dist[v] >= 0 && dist[v] <= S) o.D.insert(v);
  }
  std::set<VertexId> left = o.D;
  while (!left.empty()) {
    std::set<VertexId> comp{*left.begin()};
    bool grew = true;
    while (grew) {
      grew = false;
      for (VertexId v : left)
        if (!comp.count(v))
          for (VertexId w : comp)
            if (g.adjacent(v, w)) {
              comp.insert(v);
              grew = true;
              break;
            }
    }
    for (VertexId v : comp) left.erase(v);
    o.comps.push_back(comp);
  }
  return o;
}

}  // namespace

TEST_CASE("double-exponential samples follow the target law") {
  const int n = 1000000;
  const auto xi = sample_double_exponential(n, 1.0, 42);
  int positive = 0, above_one = 0;
  for (double v : xi.values) {
    CHECK(v >= 0.0);
    positive += v > 0.0;
    above_one += v > 1.0;
  }
  const double p0 = std::exp(-1.0);
  const double p1 = std::exp(-std::exp(1.0));
  CHECK(p1 == doctest::Approx(0.06599).epsilon(1e-3));
  CHECK(std::abs(positive / double(n) - p0) <= 3 * std::sqrt(p0 * (1 - p0) / n));
  CHECK(std::abs(above_one / double(n) - p1) <= 3 * std::sqrt(p1 * (1 - p1) / n));

  auto same = sample_double_exponential(100, 2.0, 7);
  CHECK(same.values == sample_double_exponential(100, 2.0, 7).values);
}

TEST_CASE("Kolmogorov-Smirnov distance to the target CDF") {
  for (double rho : {0.5, 1.0, 3.0}) {
    auto xi = sample_double_exponential(100000, rho, 3);
    auto v = xi.values;
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      // The atom at 0 makes the empirical CDF jump there; compare right limits.
      if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
      const double F = double_exponential_cdf(v[i], rho);
      ks = std::max(ks, std::abs((i + 1) / n - F));
      if (v[i] > 0.0) ks = std::max(ks, std::abs(i / n - F));
    }
    CHECK(ks < 0.01);
  }
}

TEST_CASE("a_scale values and monotonicity") {
  CHECK(a_scale(1, 2.0) == doctest::Approx(2.0));
  CHECK(a_scale(15, 2.0) == doctest::Approx(2.0));
  CHECK(a_scale(1e6, 1.0) == doctest::Approx(2.6259).epsilon(1e-4));
  for (int L = 1; L <= 15; ++L) CHECK(a_scale(L, 1.0) == doctest::Approx(1.0));
  CHECK(a_scale(16, 1.0) > 1.0);
  for (int L = 15; L < 2000; ++L) CHECK(a_scale(L + 1, 1.0) > a_scale(L, 1.0));
}

TEST_CASE("max_in_ball tie-breaking and spikes") {
  const auto t = homogeneous_tree(3, 2);
  Potential flat{std::vector<double>(t.size(), 1.0), 1.0, 0};
  CHECK(max_in_ball(flat, ball(t, 0, 2)).first == 0);
  flat.values[7] = 5.0;
  const auto [v, m] = max_in_ball(flat, ball(t, 0, 2));
  CHECK(v == 7);
  CHECK(m == 5.0);
}

TEST_CASE("ball maximum concentrates around a_L") {
  const auto t = homogeneous_tree(3, 10);
  const auto b = ball(t, 0, 10);
  std::vector<double> gaps;
  for (std::uint64_t s = 0; s < 101; ++s) {
    const auto xi = sample_double_exponential(t, 1.0, s);
    gaps.push_back(std::abs(max_in_ball(xi, b).second - a_scale(double(b.size()), 1.0)));
  }
  std::nth_element(gaps.begin(), gaps.begin() + 50, gaps.end());
  const double bound = 2.0 * std::log(10.0) / (std::log(2.0) * 10.0);
  CHECK(gaps[50] <= bound);
}

TEST_CASE("islands on trivial fields") {
  const auto t = homogeneous_tree(3, 8);
  const auto b = ball(t, 0, 8);
  Potential zero{std::vector<double>(t.size(), 0.0), 1.0, 0};
  LandscapeConfig cfg;
  cfg.A = 0.1;
  const auto d = decompose_islands(zero, b, cfg);
  CHECK(d.Pi.empty());
  CHECK(d.components.empty());
  CHECK(island_stats(d, t, cfg).rows.empty());

  Potential spike = zero;
  spike.values[5] = 10.0;
  const auto ds = decompose_islands(spike, b, cfg);
  REQUIRE(ds.components.size() == 1);
  const auto around = ball(t, 5, static_cast<int>(std::floor(ds.S_r)));
  std::vector<VertexId> expected;
  for (VertexId v : around.members)
    if (b.contains(v)) expected.push_back(v);
  std::sort(expected.begin(), expected.end());
  CHECK(ds.components[0].vertices == expected);
  CHECK(ds.components[0].z == 5);
  const auto rep = island_stats(ds, t, cfg);
  CHECK(rep.rows[0].pi_count == 1);
}

TEST_CASE("island decomposition matches the brute-force oracle") {
  const auto t = homogeneous_tree(3, 9);
  const auto b = ball(t, 0, 8);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto xi = sample_double_exponential(t, 1.0, s);
    LandscapeConfig cfg;
    const auto d = decompose_islands(xi, b, cfg);
    const auto o = brute_force(xi, b, cfg);
    CHECK(std::set<VertexId>(d.Pi.begin(), d.Pi.end()) == o.Pi);
    CHECK(std::set<VertexId>(d.D.begin(), d.D.end()) == o.D);
    CHECK(d.components.size() == o.comps.size());
    std::set<std::set<VertexId>> mine, theirs(o.comps.begin(), o.comps.end());
    std::size_t total = 0;
    for (const auto& c : d.components) {
      mine.emplace(c.vertices.begin(), c.vertices.end());
      total += c.vertices.size();
      CHECK(std::find(c.vertices.begin(), c.vertices.end(), c.z) != c.vertices.end());
      for (VertexId v : c.vertices) CHECK(xi[v] <= c.z_value);
    }
    CHECK(mine == theirs);
    CHECK(total == d.D.size());
    for (VertexId v : d.Pi) CHECK(d.in_D(v));
  }
}

TEST_CASE("exceedance set grows with A and high-point counts shrink") {
  const auto t = homogeneous_tree(3, 8);
  const auto b = ball(t, 0, 8);
  std::size_t prev_max = 0;
  bool first = true;
  for (double A : {2.0, 1.0, 0.5, 0.25}) {
    std::size_t worst = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto xi = sample_double_exponential(t, 1.0, s);
      LandscapeConfig cfg;
      cfg.A = A;
      const auto d = decompose_islands(xi, b, cfg);
      cfg.A = A * 2;
      const auto bigger = decompose_islands(xi, b, cfg);
      CHECK(std::includes(bigger.Pi.begin(), bigger.Pi.end(), d.Pi.begin(), d.Pi.end()));
      cfg.A = A;
      worst = std::max(worst, island_stats(d, t, cfg).max_pi_count);
    }
    if (!first) CHECK(worst <= prev_max);
    prev_max = worst;
    first = false;
  }
}

TEST_CASE("path peak counts") {
  const auto t = homogeneous_tree(3, 3);
  const auto b = ball(t, 0, 3);
  Potential zero{std::vector<double>(t.size(), 0.0), 1.0, 0};
  LandscapeConfig cfg;
  const auto c0 = path_peak_counts(zero, VertexPath{{0}}, b, cfg);
  CHECK(c0.M_eps == 0);
  CHECK(c0.N_eps == 0);
  const VertexPath p{{0, 1, 4, 1, 0}};
  const auto c1 = path_peak_counts(zero, p, b, cfg);
  CHECK(c1.N_eps == 0);
  CHECK(c1.M_eps == 4);
  CHECK_THROWS_AS(path_peak_counts(zero, VertexPath{{0, 5}}, b, cfg), Error);

  const auto xi = sample_double_exponential(t, 1.0, 8);
  CounterRng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    VertexPath walk{{0}};
    for (int s = 0; s < 12; ++s) {
      const auto nb = t.neighbors(walk.vertices.back());
      walk.vertices.push_back(nb[rng.below(nb.size())]);
    }
    const auto c = path_peak_counts(xi, walk, b, cfg);
    const double a = a_scale(double(b.size()), 1.0);
    std::set<VertexId> eps, high;
    std::size_t low = 0;
    for (std::size_t i = 0; i < walk.vertices.size(); ++i) {
      const VertexId v = walk.vertices[i];
      if (xi[v] > 0.9 * a) eps.insert(v);
      if (xi[v] > a - 2.0) high.insert(v);
      if (i + 1 < walk.vertices.size() && xi[v] <= 0.9 * a) ++low;
    }
    CHECK(c.N_eps == eps.size());
    CHECK(c.N_high == high.size());
    CHECK(c.M_eps == low);
  }
}

TEST_CASE("potential JSON round trip") {
  const auto xi = sample_double_exponential(10, 1.5, 4);
  const auto back = Potential::from_json(xi.to_json());
  CHECK(back.values == xi.values);
  CHECK(back.rho == 1.5);
}
