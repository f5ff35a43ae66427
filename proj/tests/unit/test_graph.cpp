#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "pam/error.hpp"
#include "pam/graph.hpp"
#include "pam/rng.hpp"

using namespace pam;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidInput;
}

std::size_t degree_sum(const RootedGraph& g) {
  std::size_t s = 0;
  for (VertexId v = 0; v < g.size(); ++v) s += g.degree(v);
  return s;
}

// Random labelled tree on n vertices from a random parent array.
RootedGraph random_tree(std::size_t n, CounterRng& rng, int d_max = 4) {
  std::vector<Edge> edges;
  std::vector<int> deg(n, 0);
  for (VertexId v = 1; v < n; ++v) {
    VertexId p;
    do {
      p = static_cast<VertexId>(rng.below(v));
    } while (deg[p] >= d_max);
    ++deg[p];
    ++deg[v];
    edges.emplace_back(p, v);
  }
  return build_graph(edges, 0, d_max, n);
}

}  // namespace

TEST_CASE("build_graph accepts K2 and rejects malformed edge lists") {
  const std::vector<Edge> k2{{0, 1}};
  const auto g = build_graph(k2, 0);
  CHECK(g.size() == 2);
  CHECK(g.edge_count() == 1);
  CHECK(g.root() == 0);

  const std::vector<Edge> dup{{0, 1}, {1, 0}};
  CHECK(code_of([&] { build_graph(dup, 0); }) == ErrorCode::DuplicateEdge);
  const std::vector<Edge> split{{0, 1}, {2, 3}};
  CHECK(code_of([&] { build_graph(split, 0); }) == ErrorCode::Disconnected);
  const std::vector<Edge> loop{{0, 0}};
  CHECK(code_of([&] { build_graph(loop, 0); }) == ErrorCode::SelfLoop);
  const std::vector<Edge> star{{0, 1}, {0, 2}, {0, 3}};
  CHECK(code_of([&] { build_graph(star, 0, 2); }) == ErrorCode::DegreeBoundExceeded);
}

TEST_CASE("single isolated root is a valid graph") {
  const auto g = build_graph({}, 0);
  CHECK(g.size() == 1);
  CHECK(g.edge_count() == 0);
  CHECK(g.is_tree());
}

TEST_CASE("balls count vertices by BFS distance") {
  const std::vector<Edge> k2{{0, 1}};
  const auto g = build_graph(k2, 0);
  const auto b0 = ball(g, 0, 0);
  CHECK(b0.size() == 1);
  CHECK(b0.members.front() == 0);

  CHECK(ball(homogeneous_tree(3, 2), 0, 1).size() == 4);
  const auto t3 = homogeneous_tree(3, 3);
  const auto b2 = ball(t3, 0, 2);
  CHECK(b2.size() == 10);
  CHECK(b2.boundary.size() == 6);
}

TEST_CASE("homogeneous and half-homogeneous tree sizes") {
  CHECK(homogeneous_tree(3, 1).size() == 4);
  CHECK(homogeneous_tree(3, 3).size() == 22);
  const auto path = homogeneous_tree(2, 5);
  CHECK(path.size() == 11);
  CHECK(path.max_degree() == 2);
  CHECK(path.eccentricity(path.root()) == 5);

  CHECK(half_homogeneous_tree(3, 1).size() == 3);
  CHECK(half_homogeneous_tree(3, 2).size() == 7);
  CHECK(half_homogeneous_tree(2, 4).size() == 5);
  CHECK(half_homogeneous_tree(3, 2).degree(0) == 2);

  CHECK(code_of([] { homogeneous_tree(3, 40, 1000); }) == ErrorCode::SizeOverflow);
}

TEST_CASE("homogeneous tree size matches the geometric sum") {
  for (int d = 3; d <= 4; ++d) {
    for (int R = 0; R <= 6; ++R) {
      const auto t = homogeneous_tree(d, R);
      std::size_t power = 1;
      for (int i = 0; i < R; ++i) power *= static_cast<std::size_t>(d - 1);
      const std::size_t expected = 1 + d * (power - 1) / (d - 2);
      CHECK(t.size() == expected);
      CHECK(t.is_tree());
      for (VertexId v = 0; v < t.size(); ++v) {
        const int depth = t.distances_from(0)[v];
        CHECK(t.degree(v) == (depth < R ? d : (R == 0 ? 0 : 1)));
      }
    }
  }
}

TEST_CASE("glue_two joins disjoint graphs with one edge") {
  const std::vector<Edge> k2{{0, 1}};
  const auto a = build_graph(k2, 0);
  const auto p4 = glue_two(a, 0, a, 0, 2);
  CHECK(p4.size() == 4);
  CHECK(p4.edge_count() == 3);
  CHECK(p4.max_degree() == 2);

  const auto t = homogeneous_tree(3, 2);
  const auto glued = glue_two(t, t.root(), t, t.root(), 4);
  CHECK(glued.size() == 20);
  CHECK(glued.edge_count() == 19);
  CHECK(glued.degree(glued.root()) == 4);

  CHECK(code_of([&] { glue_two(t, t.root(), t, t.root()); }) ==
        ErrorCode::DegreeBoundExceeded);
}

TEST_CASE("glue_star adds a hub joined to each component") {
  const auto k1 = build_graph({}, 0);
  std::vector<std::pair<RootedGraph, VertexId>> one{{k1, 0}};
  const auto k2 = glue_star(one);
  CHECK(k2.size() == 2);
  CHECK(k2.root() == 1);

  std::vector<std::pair<RootedGraph, VertexId>> three{{k1, 0}, {k1, 0}, {k1, 0}};
  const auto star = glue_star(three, 3);
  CHECK(star.size() == 4);
  CHECK(star.degree(star.root()) == 3);

  const auto half = half_homogeneous_tree(3, 2);
  std::vector<std::pair<RootedGraph, VertexId>> two{{half, 0}, {half, 0}};
  const auto joined = glue_star(two, 3);
  CHECK(joined.size() == 15);
  CHECK(joined.degree(joined.root()) == 2);
  CHECK(joined.is_tree());
  CHECK(code_of([&] { glue_star(three, 2); }) == ErrorCode::DegreeBoundExceeded);
}

TEST_CASE("realize builds glued tree families") {
  TreeSpec spec{TreeKind::HalfHomogeneous, 3, 3, {}};
  CHECK(realize(spec).size() == half_homogeneous_tree(3, 3).size());
  spec.attachments = {0};
  const auto t = realize(spec);
  // ring tree of radius 3 plus a half tree of radius 2 hanging off the root
  CHECK(t.size() == 15 + 7);
  CHECK(t.degree(0) == 3);
  CHECK(t.eccentricity(0) == 3);
}

TEST_CASE("handshake identity and nested balls on random trees") {
  CounterRng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_tree(2 + rng.below(40), rng);
    CHECK(degree_sum(g) == 2 * g.edge_count());
    const int ecc = g.eccentricity(g.root());
    std::size_t prev = 0;
    for (int r = 0; r <= ecc; ++r) {
      const auto b = ball(g, g.root(), r);
      CHECK(b.size() >= prev);
      CHECK(b.size() >= static_cast<std::size_t>(r + 1));
      prev = b.size();
    }
    CHECK(prev == g.size());
  }
}

TEST_CASE("rooted isomorphism on small trees") {
  const auto a = homogeneous_tree(3, 2);
  const auto b = homogeneous_tree(3, 3);
  CHECK(rooted_isomorphic(ball(a, 0, 2), ball(b, 0, 2)));
  CHECK_FALSE(rooted_isomorphic(ball(a, 0, 2), ball(homogeneous_tree(4, 2), 0, 2)));

  // Same level degree profile, different shape.
  const std::vector<Edge> e1{{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 5}};
  const std::vector<Edge> e2{{0, 1}, {0, 2}, {1, 3}, {2, 4}, {2, 5}};
  const std::vector<Edge> e3{{0, 1}, {0, 2}, {1, 3}, {3, 4}, {1, 5}};
  const auto t1 = build_graph(e1, 0);
  const auto t2 = build_graph(e2, 0);
  const auto t3 = build_graph(e3, 0);
  CHECK(rooted_isomorphic(ball(t1, 0, 3), ball(t2, 0, 3)));
  CHECK_FALSE(rooted_isomorphic(ball(t1, 0, 3), ball(t3, 0, 3)));
  CHECK(canonical_tree_code(t1) == canonical_tree_code(t2));
  CHECK(canonical_tree_code(build_graph(std::vector<Edge>{}, 0)) == "()");
}

TEST_CASE("tree codes agree with backtracking search") {
  CounterRng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g1 = random_tree(2 + rng.below(9), rng, 3);
    const auto g2 = random_tree(g1.size(), rng, 3);
    const int radius = std::max(g1.eccentricity(0), g2.eccentricity(0));
    const bool by_code = canonical_tree_code(g1) == canonical_tree_code(g2);
    const bool by_search = find_ball_isomorphism(g1, 0, g2, 0, radius).has_value();
    CHECK(by_code == by_search);
  }
}

TEST_CASE("rooted isomorphism is an equivalence relation") {
  CounterRng rng(17);
  std::vector<RootedGraph> sample;
  for (int i = 0; i < 30; ++i) sample.push_back(random_tree(3 + rng.below(4), rng, 3));
  auto iso = [&](std::size_t i, std::size_t j) {
    return rooted_isomorphic(ball(sample[i], 0, 6), ball(sample[j], 0, 6));
  };
  for (std::size_t i = 0; i < sample.size(); ++i) {
    CHECK(iso(i, i));
    for (std::size_t j = 0; j < sample.size(); ++j) {
      CHECK(iso(i, j) == iso(j, i));
      for (std::size_t k = 0; k < sample.size(); ++k)
        if (iso(i, j) && iso(j, k)) CHECK(iso(i, k));
    }
  }
}

TEST_CASE("isomorphism on balls with cycles") {
  // 4-cycle with a pendant vs the same graph relabelled.
  const std::vector<Edge> e1{{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 4}};
  const std::vector<Edge> e2{{4, 2}, {2, 0}, {0, 1}, {1, 4}, {4, 3}};
  const auto g1 = build_graph(e1, 0);
  const auto g2 = build_graph(e2, 4);
  CHECK(rooted_isomorphic(ball(g1, 0, 2), ball(g2, 4, 2)));
  const auto map = find_ball_isomorphism(g1, 0, g2, 4, 2);
  REQUIRE(map.has_value());
  for (const auto& [a, b] : *map)
    for (const auto& [c, d] : *map) CHECK(g1.adjacent(a, c) == g2.adjacent(b, d));
  // Rooting the second graph at the pendant vertex breaks the match.
  CHECK_FALSE(rooted_isomorphic(ball(g1, 0, 2), ball(g2, 3, 2)));
  // A predicate can veto every pairing.
  CHECK_FALSE(find_ball_isomorphism(g1, 0, g2, 4, 2, [](VertexId, VertexId) { return false; })
                  .has_value());
}

TEST_CASE("graph JSON round trip") {
  const auto t = homogeneous_tree(3, 2);
  const auto back = graph_from_json(to_json(t));
  CHECK(back.size() == t.size());
  CHECK(back.edges() == t.edges());
  CHECK(back.d_max() == 3);
  nlohmann::json bad = {{"root", 0}, {"edges", {{0, 1}, {1, 0}}}};
  CHECK(code_of([&] { graph_from_json(bad); }) == ErrorCode::DuplicateEdge);
}

TEST_CASE("paths are validated against the graph") {
  const auto t = homogeneous_tree(3, 2);
  validate_path(t, VertexPath{{0, 1, 0, 2}});
  CHECK(VertexPath{{0, 1, 0, 2}}.length() == 3);
  CHECK(VertexPath{{0, 1, 0, 2}}.support().size() == 3);
  CHECK(code_of([&] { validate_path(t, VertexPath{{0, 4}}); }) == ErrorCode::PathNotInGraph);
}
