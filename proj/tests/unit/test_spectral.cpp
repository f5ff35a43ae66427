#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pam/error.hpp"
#include "pam/potential.hpp"
#include "pam/rng.hpp"
#include "pam/spectral.hpp"

using namespace pam;

namespace {

// Random tree plus a few chords, so cycles occur.
RootedGraph random_graph(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::set<Edge> edges;
  for (VertexId v = 1; v < n; ++v) edges.emplace(static_cast<VertexId>(rng.below(v)), v);
  for (std::size_t k = 0; k < n / 4; ++k) {
    auto a = static_cast<VertexId>(rng.below(n)), b = static_cast<VertexId>(rng.below(n));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    edges.emplace(a, b);
  }
  std::vector<Edge> list(edges.begin(), edges.end());
  return build_graph(list, 0, std::nullopt, n);
}

std::vector<VertexId> all_vertices(const RootedGraph& g) {
  std::vector<VertexId> v(g.size());
  std::iota(v.begin(), v.end(), VertexId{0});
  return v;
}

}  // namespace

TEST_CASE("single vertex and K2 operators") {
  const auto k1 = build_graph({}, 0);
  const std::vector<double> two{2.0};
  const auto h1 = assemble(k1, all_vertices(k1), two);
  const auto p1 = principal_eigenpair(h1);
  CHECK(p1.lambda == 2.0);
  CHECK(p1.phi(0) == 1.0);

  const std::vector<Edge> e{{0, 1}};
  const auto k2 = build_graph(e, 0);
  const std::vector<double> zero{0.0, 0.0};
  const auto h2 = assemble(k2, all_vertices(k2), zero);
  const Eigen::MatrixXd m = h2.dense();
  CHECK(m(0, 0) == -1.0);
  CHECK(m(0, 1) == 1.0);
  CHECK(m(1, 1) == -1.0);
  const auto p2 = principal_eigenpair(h2);
  CHECK(p2.lambda == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p2.phi(0) == doctest::Approx(std::sqrt(0.5)));
  CHECK(p2.phi(1) == doctest::Approx(std::sqrt(0.5)));

  // One vertex of K2: Dirichlet outside gives q - deg = -1.
  const std::vector<VertexId> root_only{0};
  CHECK(principal_eigenpair(assemble(k2, root_only, zero)).lambda == -1.0);

  CHECK_THROWS_AS(Hamiltonian(k2, {}, {}), Error);
}

TEST_CASE("spectral solution on K2") {
  const std::vector<Edge> e{{0, 1}};
  const auto k2 = build_graph(e, 0);
  const std::vector<double> zero{0.0, 0.0};
  const auto h = assemble(k2, all_vertices(k2), zero);
  const auto u = spectral_solution(h, 0, 1.0);
  CHECK(u(0) == doctest::Approx((1 + std::exp(-2.0)) / 2).epsilon(1e-12));
  CHECK(u(1) == doctest::Approx((1 - std::exp(-2.0)) / 2).epsilon(1e-12));
  const auto u0 = spectral_solution(h, 1, 0.0);
  CHECK(u0(0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(u0(1) == doctest::Approx(1.0));
}

TEST_CASE("spectral solution satisfies the equation") {
  const auto g = random_graph(40, 5);
  const auto xi = sample_double_exponential(g, 1.0, 5);
  const auto h = assemble(g, all_vertices(g), xi.values);
  const Eigen::MatrixXd H = h.dense();
  for (double t : {0.3, 1.0, 2.5}) {
    const double dt = 1e-5;
    const Eigen::VectorXd deriv =
        (spectral_solution(h, 3, t + dt) - spectral_solution(h, 3, t - dt)) / (2 * dt);
    const Eigen::VectorXd rhs = H * spectral_solution(h, 3, t);
    CHECK((deriv - rhs).norm() <= 1e-6 * (1.0 + rhs.norm()));
  }
}

TEST_CASE("Lanczos agrees with the dense solver") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto g = random_graph(150 + 20 * s, s);
    const auto xi = sample_double_exponential(g, 1.0 + 0.3 * s, s);
    const auto h = assemble(g, all_vertices(g), xi.values);
    EigenOptions dense, krylov;
    dense.method = EigenOptions::Method::Dense;
    krylov.method = EigenOptions::Method::Krylov;
    const auto a = principal_eigenpair(h, dense);
    const auto b = principal_eigenpair(h, krylov);
    CHECK(b.lambda == doctest::Approx(a.lambda).epsilon(1e-9));
    CHECK(b.residual <= 1e-10);
    CHECK(std::abs(a.phi.dot(b.phi)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(a.phi.minCoeff() >= 0.0);
    CHECK(b.phi.minCoeff() >= 0.0);
    // Warm start converges in no more restarts.
    krylov.start = &a.phi;
    CHECK(principal_eigenpair(h, krylov).iterations <= b.iterations);
  }
}

TEST_CASE("Rayleigh quotients never exceed the top eigenvalue") {
  const auto g = random_graph(60, 11);
  const auto xi = sample_double_exponential(g, 1.0, 11);
  const auto h = assemble(g, all_vertices(g), xi.values);
  const double lambda = principal_eigenpair(h).lambda;
  CounterRng rng(3);
  Eigen::VectorXd x(h.size()), hx(h.size());
  for (int trial = 0; trial < 200; ++trial) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform() - 0.5;
    h.apply(x.data(), hx.data());
    CHECK(x.dot(hx) / x.squaredNorm() <= lambda + 1e-12);
  }
}

TEST_CASE("eigenvalue is monotone in domain and potential") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto g = random_graph(50, 100 + s);
    auto xi = sample_double_exponential(g, 1.5, s);
    const auto b3 = ball(g, 0, 3);
    const auto b1 = ball(g, 0, 1);
    const double small = principal_eigenpair(assemble(g, b1.members, xi.values)).lambda;
    const double big = principal_eigenpair(assemble(g, b3.members, xi.values)).lambda;
    CHECK(small <= big + 1e-12);
    const double before = principal_eigenpair(assemble(g, all_vertices(g), xi.values)).lambda;
    for (auto& v : xi.values) v += 0.25;
    const double after = principal_eigenpair(assemble(g, all_vertices(g), xi.values)).lambda;
    CHECK(after == doctest::Approx(before + 0.25).epsilon(1e-10));
    xi.values[s % g.size()] += 3.0;
    CHECK(principal_eigenpair(assemble(g, all_vertices(g), xi.values)).lambda >= after - 1e-12);
  }
}

TEST_CASE("eigenvalue sandwich holds on nested domains") {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto g = random_graph(80, 200 + s);
    const auto xi = sample_double_exponential(g, 0.5 + 0.1 * s, s);
    for (int r = 0; r <= 3; ++r) {
      const auto lam = ball(g, 0, r + 1);
      const auto gam = ball(g, 0, r);
      const auto rep = eigenvalue_sandwich_check(g, xi.values, lam.members, gam.members);
      CHECK(rep.holds);
      CHECK(rep.lower == doctest::Approx(
                             max_in_ball(xi, gam).second - static_cast<double>(g.d_max())));
    }
  }
  const auto g = random_graph(10, 1);
  const std::vector<double> zero(10, 0.0);
  const std::vector<VertexId> lam{0, 1}, gam{0, 5};
  if (!std::binary_search(lam.begin(), lam.end(), VertexId{5}))
    CHECK_THROWS_AS(eigenvalue_sandwich_check(g, zero, lam, gam), Error);
}

TEST_CASE("disconnected domains pick the top component") {
  const auto path = homogeneous_tree(2, 3);  // path of 7 vertices
  std::vector<double> q(path.size(), 0.0);
  const auto d = path.distances_from(0);
  std::vector<VertexId> leaves;
  for (VertexId v = 0; v < path.size(); ++v)
    if (d[v] == 3) leaves.push_back(v);
  REQUIRE(leaves.size() == 2);
  const auto h = assemble(path, leaves, q);
  CHECK(h.components().size() == 2);
  const auto p = principal_eigenpair(h);
  CHECK(p.degenerate);
  CHECK(p.lambda == -1.0);
  q[leaves[1]] = 1.0;
  const auto p2 = principal_eigenpair(assemble(path, leaves, q));
  CHECK_FALSE(p2.degenerate);
  CHECK(p2.lambda == 0.0);
  CHECK(p2.phi(1) == 1.0);
  CHECK(p2.phi(0) == 0.0);
}

TEST_CASE("full spectrum refuses large domains") {
  const auto t = homogeneous_tree(3, 9);
  std::vector<double> q(t.size(), 0.0);
  const auto h = assemble(t, ball(t, 0, 8).members, q);
  REQUIRE(h.size() > kDenseLimit);
  CHECK_THROWS_AS(full_spectrum(h), Error);
  // Auto falls back to Lanczos above the dense limit.
  const auto p = principal_eigenpair(h);
  CHECK(p.residual <= 1e-10);
  CHECK(p.lambda < 0.0);
  CHECK(p.lambda > -3.0);
}
