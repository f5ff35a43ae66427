#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pam/error.hpp"
#include "pam/random_graphs.hpp"
#include "pam/rng.hpp"
#include "pam/variational.hpp"

using namespace pam;

namespace {

RootedGraph path_graph(std::size_t n) {
  std::vector<Edge> e;
  for (VertexId v = 1; v < n; ++v) e.emplace_back(v - 1, v);
  return build_graph(e, 0, std::nullopt, n);
}

RootedGraph star_graph(std::size_t leaves) {
  std::vector<Edge> e;
  for (VertexId v = 1; v <= leaves; ++v) e.emplace_back(0, v);
  return build_graph(e, 0, std::nullopt, leaves + 1);
}

RootedGraph random_tree(std::size_t n, std::uint64_t seed, int d_max = 4) {
  CounterRng rng(seed);
  std::vector<int> deg(n, 0);
  std::vector<Edge> e;
  for (VertexId v = 1; v < n; ++v) {
    VertexId parent;
    do parent = static_cast<VertexId>(rng.below(v));
    while (deg[parent] >= d_max);
    ++deg[parent];
    ++deg[v];
    e.emplace_back(parent, v);
  }
  return build_graph(e, 0, d_max, n);
}

std::vector<VertexId> all_vertices(const RootedGraph& g) {
  std::vector<VertexId> v(g.size());
  std::iota(v.begin(), v.end(), VertexId{0});
  return v;
}

// Golden-section minimum of a unimodal-enough function on [lo, hi] after a grid scan.
template <class F>
double scan_min(F f, double lo, double hi) {
  const int n = 20000;
  double best = f(lo), arg = lo;
  for (int i = 1; i <= n; ++i) {
    const double x = lo + (hi - lo) * i / n;
    const double v = f(x);
    if (v < best) best = v, arg = x;
  }
  double a = std::max(lo, arg - (hi - lo) / n), b = std::min(hi, arg + (hi - lo) / n);
  for (int it = 0; it < 200; ++it) {
    const double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
    if (f(m1) < f(m2)) b = m2; else a = m1;
  }
  return std::min(best, f((a + b) / 2));
}

}  // namespace

TEST_CASE("I and J on a worked example") {
  const RootedGraph k2 = path_graph(2);
  const std::vector<double> p{0.25, 0.75};
  CHECK(I_functional(k2, p) == doctest::Approx(1.0 - std::sqrt(3.0) / 2.0).epsilon(1e-14));
  CHECK(J_functional(p) == doctest::Approx(0.5623351446188083).epsilon(1e-12));
  CHECK(J_functional(std::vector<double>{1.0, 0.0}) == 0.0);
  CHECK_THROWS_AS(J_functional(std::vector<double>{-0.1, 1.1}), Error);
}

TEST_CASE("single vertex has chi zero, K2 matches a one-dimensional scan") {
  const RootedGraph k1 = build_graph({}, 0, 1, 1);
  CHECK(chi_primal(k1, 1.0).value == 0.0);
  CHECK(chi_dual(k1, all_vertices(k1), 1.0).value == doctest::Approx(0.0).epsilon(1e-12));

  const RootedGraph k2 = path_graph(2);
  for (double rho : {0.3, 1.0, 2.0}) {
    auto f = [&](double a) {
      const std::vector<double> p{a, 1.0 - a};
      return I_functional(k2, p) + rho * J_functional(p);
    };
    const double oracle = scan_min(f, 0.0, 1.0);
    CHECK(chi_primal(k2, rho).value == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(chi_dual(k2, all_vertices(k2), rho).value == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("restricted chi counts edges leaving the domain") {
  // Path 0-1-2-3 with domain {1,2}: p on {1,2}, one escaping edge at each end.
  const RootedGraph p4 = path_graph(4);
  const std::vector<VertexId> dom{1, 2};
  const double rho = 0.7;
  auto f = [&](double a) {
    const std::vector<double> p{0.0, a, 1.0 - a, 0.0};
    return I_functional(p4, p) + rho * J_functional(p);
  };
  const double oracle = scan_min(f, 0.0, 1.0);
  CHECK(chi_primal(p4, dom, rho).value == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(chi_dual(p4, dom, rho).value == doctest::Approx(oracle).epsilon(1e-9));
  // A single-vertex domain costs its full degree.
  const std::vector<VertexId> one{1};
  CHECK(chi_dual(p4, one, rho).value == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(chi_primal(p4, one, rho).value == 2.0);
}

TEST_CASE("primal and dual agree on paths, stars and random trees") {
  std::vector<RootedGraph> graphs{path_graph(5), path_graph(9), star_graph(3), star_graph(6)};
  for (std::uint64_t s = 0; s < 6; ++s) graphs.push_back(random_tree(10 + 7 * s, s));
  for (const auto& g : graphs)
    for (double rho : {0.5, 1.0, 3.0}) {
      const auto v = all_vertices(g);
      const auto pr = chi_primal(g, v, rho);
      const auto du = chi_dual(g, v, rho);
      CHECK(std::abs(pr.value - du.value) <= 1e-6);
      // The minimizer is a probability vector with value I + rho J.
      double mass = std::accumulate(pr.p.begin(), pr.p.end(), 0.0);
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(I_functional(g, pr.p) + rho * J_functional(pr.p) ==
            doctest::Approx(pr.value).epsilon(1e-10));
    }
}

TEST_CASE("localized starts find the same basin on larger trees") {
  // Without screened starts these trees left primal and dual in different basins.
  const std::pair<std::size_t, double> cases[] = {{8, 2.0}, {9, 0.5}, {19, 1.0}};
  for (const auto& [i, rho] : cases) {
    const RootedGraph g = random_tree(10 + 190 * i / 22, 1000 + i);
    const auto v = all_vertices(g);
    const double pr = chi_primal(g, v, rho).value;
    const double du = chi_dual(g, v, rho).value;
    CHECK(std::abs(pr - du) <= 1e-8);
    ChiOptions more;
    more.restarts = 32;
    CHECK(pr <= chi_primal(g, v, rho, more).value + 1e-8);
  }
}

TEST_CASE("dual fixed point satisfies phi^2 = exp(q / rho)") {
  const RootedGraph g = random_tree(30, 11);
  const auto r = chi_dual(g, all_vertices(g), 1.0);
  CHECK(r.residual < 1e-6);
  double s = 0.0;
  for (double q : r.q) s += std::exp(q);
  CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("primal gradient matches finite differences") {
  const RootedGraph g = random_tree(12, 3);
  const auto v = all_vertices(g);
  CounterRng rng(5);
  std::vector<double> s(g.size());
  for (auto& x : s) x = 0.1 + rng.uniform();
  const auto grad = primal_gradient(g, v, 0.8, s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double h = 1e-6;
    auto sp = s, sm = s;
    sp[i] += h;
    sm[i] -= h;
    const double fd = (primal_objective(g, v, 0.8, sp) - primal_objective(g, v, 0.8, sm)) / (2 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("chi is non-decreasing in rho and bounded by the minimal degree") {
  const RootedGraph g = random_tree(25, 8);
  double prev = -1.0;
  int min_deg = g.degree(0);
  for (VertexId x = 0; x < g.size(); ++x) min_deg = std::min(min_deg, g.degree(x));
  for (double rho : {0.1, 0.3, 1.0, 3.0, 10.0}) {
    const double c = chi_dual(g, all_vertices(g), rho).value;
    CHECK(c >= prev - 1e-9);
    CHECK(c <= min_deg + 1e-9);
    CHECK(c >= -1e-12);
    prev = c;
  }
}

TEST_CASE("boundary-constrained chi") {
  const RootedGraph k2 = path_graph(2);
  CHECK(chi_boundary(k2, 0, 1.0, 1.0) == 1.0);
  CHECK(chi_boundary(k2, 0, 0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(chi_boundary(k2, 0, 0.5, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK_THROWS_AS(chi_boundary(k2, 0, 1.5, 1.0), Error);
  try {
    chi_boundary(k2, 0, -0.1, 1.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InfeasibleBoundary);
  }
  const RootedGraph k1 = build_graph({}, 0, 1, 1);
  CHECK(std::isinf(chi_boundary(k1, 0, 0.3, 1.0)));
  CHECK(chi_boundary(k1, 0, 1.0, 1.0) == 0.0);

  // The infimum over boundary values recovers chi.
  const RootedGraph p4 = path_graph(4);
  const double rho = 0.9;
  double inf_b = 1e9;
  for (int i = 0; i <= 100; ++i) inf_b = std::min(inf_b, chi_boundary(p4, 1, i / 100.0, rho));
  const double chi = chi_primal(p4, rho).value;
  CHECK(inf_b >= chi - 1e-9);
  CHECK(inf_b <= chi + 1e-3);
}

TEST_CASE("ball sequence on T_3 is non-increasing") {
  TreeSpec spec;
  spec.d = 3;
  const std::vector<int> radii{0, 1, 2, 3, 4};
  const auto seq = chi_ball_sequence(spec, 1.0, radii);
  CHECK(seq.monotone);
  CHECK(seq.values[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(seq.sizes == std::vector<std::size_t>{1, 4, 10, 22, 46});
  CHECK(seq.limit <= seq.values.back() + 1e-12);
}

TEST_CASE("extrapolation of a geometric tail") {
  std::vector<double> v;
  for (int k = 0; k < 6; ++k) v.push_back(2.0 + std::pow(0.5, k));
  const auto [limit, unc] = extrapolate_limit(v);
  CHECK(limit == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(unc == doctest::Approx(std::pow(0.5, 5)).epsilon(1e-12));
  const std::vector<double> flat{1.0, 1.0, 1.0};
  CHECK(extrapolate_limit(flat).first == 1.0);
}

TEST_CASE("glue formula matches chi of the glued star") {
  const RootedGraph k1 = build_graph({}, 0, 1, 1);
  const RootedGraph k2 = path_graph(2);
  const RootedGraph p3 = path_graph(3);
  const std::vector<std::vector<Component>> cases{
      {{k1, 0}}, {{k1, 0}, {k1, 0}}, {{k2, 0}, {k2, 1}}, {{p3, 1}}, {{p3, 0}, {k1, 0}}};
  for (double rho : {0.7, 1.5})
    for (const auto& comps : cases) {
      const auto res = glue_formula_A4(comps, rho);
      const double direct = chi_primal(glue_components(comps), rho).value;
      CHECK(std::abs(res.value - direct) <= 1e-4 + res.gap);
      CHECK(res.levels.size() == 3);
    }
  GridOptions tight;
  tight.gap_tol = -1.0;
  try {
    glue_formula_A4({{k2, 0}}, 1.0, tight);
    FAIL("expected GridTooCoarse");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GridTooCoarse);
  }
  CHECK_THROWS_AS(glue_formula_A4({{k1, 0}, {k1, 0}, {k1, 0}}, 1.0), Error);
}

TEST_CASE("glueing two graphs never drops chi below the smaller one") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const RootedGraph g1 = random_tree(4 + s % 5, 100 + s, 3);
    const RootedGraph g2 = random_tree(3 + s % 4, 200 + s, 3);
    const auto rep = glue_inequality_A3(g1, 0, g2, static_cast<VertexId>(g2.size() - 1), 1.0);
    CHECK(rep.holds);
  }
}

TEST_CASE("propagation implication on small stars") {
  const RootedGraph k2 = path_graph(2);
  const RootedGraph p3 = path_graph(3);
  const std::vector<Component> comps{{k2, 0}, {p3, 1}, {k2, 1}};
  // Small M: hypotheses and conclusion hold.
  const auto easy = propagation_check_A6(comps, 2.0, 0.5, 0.5);
  CHECK(easy.implication_holds);
  // Hypotheses fail when M exceeds the sub-star values.
  const auto vacuous = propagation_check_A6(comps, 2.0, 10.0, 0.5);
  CHECK(!vacuous.hypotheses);
  CHECK(vacuous.implication_holds);
  CHECK_THROWS_AS(propagation_check_A6({{k2, 0}}, 1.0, 0.0, 1.0), Error);
}

TEST_CASE("minimal-tree catalog and the half-tree sandwich") {
  ChiOptions opts;
  opts.restarts = 3;
  const auto rep = theorem12_check(3, {3, 4}, 1.0, 3, 6, 7, opts);
  REQUIRE(rep.rows.size() == 6);
  CHECK(rep.rows[0].kind == "minimal");
  CHECK(rep.large_rho);
  CHECK(rep.a9_lower);
  CHECK(rep.a9_upper);
  CHECK(rep.warnings.empty());
  for (const auto& row : rep.rows) CHECK(row.gap_to_min == doctest::Approx(row.chi - rep.rows[0].chi));
  const auto low = theorem12_check(3, {3, 4}, 0.3, 2, 2, 7, opts);
  CHECK(!low.large_rho);
  CHECK(!low.warnings.empty());
}
