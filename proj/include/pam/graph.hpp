#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace pam {

using VertexId = std::uint32_t;
using Edge = std::pair<VertexId, VertexId>;

/// Finite, simple, connected, undirected graph with a distinguished root.
///
/// Vertices are dense indices [0, size()). Neighbor lists are sorted. The
/// declared degree bound is enforced at construction; instances are immutable
/// afterwards and safe to share between threads.
class RootedGraph {
 public:
  /// Validates simplicity, symmetry, connectivity and the degree bound.
  RootedGraph(std::vector<std::vector<VertexId>> adjacency, VertexId root, int d_max);

  std::size_t size() const { return adj_.size(); }
  VertexId root() const { return root_; }
  int d_max() const { return d_max_; }
  int degree(VertexId v) const { return static_cast<int>(adj_[v].size()); }
  std::span<const VertexId> neighbors(VertexId v) const { return adj_[v]; }
  std::size_t edge_count() const { return edge_count_; }
  bool adjacent(VertexId a, VertexId b) const;
  bool is_tree() const { return edge_count_ + 1 == size(); }
  int max_degree() const;

  /// Edges as (a, b) with a < b, in lexicographic order.
  std::vector<Edge> edges() const;

  /// BFS distances from `source`; -1 marks unreachable vertices (never in a
  /// connected graph, kept for use on induced subsets).
  std::vector<int> distances_from(VertexId source) const;

  /// BFS distances restricted to a maximum depth; vertices beyond stay -1.
  std::vector<int> distances_from(VertexId source, int max_depth) const;

  int eccentricity(VertexId v) const;

  /// Same graph with a different root.
  RootedGraph rerooted(VertexId new_root) const;

  const std::vector<std::vector<VertexId>>& adjacency() const { return adj_; }

 private:
  std::vector<std::vector<VertexId>> adj_;
  VertexId root_;
  int d_max_;
  std::size_t edge_count_ = 0;
};

/// Builds a validated graph. `vertex_count` defaults to 1 + the largest index
/// mentioned (or the root); `d_max` defaults to the realized maximum degree.
RootedGraph build_graph(std::span<const Edge> edges, VertexId root,
                        std::optional<int> d_max = std::nullopt,
                        std::optional<std::size_t> vertex_count = std::nullopt);

/// Graph-distance ball around `center`.
struct Ball {
  const RootedGraph* graph = nullptr;
  VertexId center = 0;
  int radius = 0;
  std::vector<VertexId> members;   // BFS order, center first
  std::vector<int> member_dist;    // distance of members[i] from center
  std::vector<VertexId> boundary;  // members at distance exactly `radius`

  std::size_t size() const { return members.size(); }
  bool contains(VertexId v) const;
};

Ball ball(const RootedGraph& g, VertexId center, int r);

/// Induced subgraph on the members of `b`, rooted at the ball center, with
/// vertices relabeled in BFS order. `original_ids[i]` maps back.
struct InducedSubgraph {
  RootedGraph graph;
  std::vector<VertexId> original_ids;
};
InducedSubgraph induced_ball(const Ball& b);

/// Induced subgraph on an arbitrary connected vertex set; root is `root`.
InducedSubgraph induced_subgraph(const RootedGraph& g, std::span<const VertexId> vertices,
                                 VertexId root);

/// Vertex budget used by the deterministic tree builders.
inline constexpr std::size_t kDefaultVertexBudget = 4'000'000;

/// Homogeneous tree of degree d truncated at radius R (leaves at distance R).
RootedGraph homogeneous_tree(int d, int R, std::size_t vertex_budget = kDefaultVertexBudget);

/// Tree whose root has degree d-1 and every other internal vertex degree d.
RootedGraph half_homogeneous_tree(int d, int R, std::size_t vertex_budget = kDefaultVertexBudget);

/// Disjoint union plus the edge {x1, x2}; g1's root is kept. The degree bound
/// is `d_max` when given, else max(g1.d_max(), g2.d_max()).
RootedGraph glue_two(const RootedGraph& g1, VertexId x1, const RootedGraph& g2, VertexId x2,
                     std::optional<int> d_max = std::nullopt);

/// New hub joined to the designated vertex of each component; the hub is the
/// new root and gets the largest index. The degree bound is `d_max` when given,
/// else the largest of the components' bounds.
RootedGraph glue_star(std::span<const std::pair<RootedGraph, VertexId>> components,
                      std::optional<int> d_max = std::nullopt);

enum class TreeKind { Homogeneous, HalfHomogeneous };

/// Deterministic tree family member truncated at `radius`.
///
/// The base tree is homogeneous or half-homogeneous of degree `d`. Each entry
/// of `attachments` names a vertex (in the numbering of the tree built so far)
/// that receives one extra edge to the root of a fresh half-homogeneous copy;
/// the copy is truncated so that every vertex stays within `radius` of the
/// root. Zero attachments on a half-homogeneous base give the half tree, n
/// attachments give a member of the n-th glued family.
struct TreeSpec {
  TreeKind kind = TreeKind::Homogeneous;
  int d = 3;
  int radius = 0;
  std::vector<VertexId> attachments;
};

RootedGraph realize(const TreeSpec& spec, std::size_t vertex_budget = kDefaultVertexBudget);

/// AHU canonical code of a rooted tree: "()" for a leaf, children codes sorted.
std::string canonical_tree_code(const RootedGraph& tree);

/// Root-preserving isomorphism search between the balls of radius `radius`
/// around r1 in g1 and r2 in g2 (induced subgraphs). `accept(v1, v2)` may veto
/// individual vertex pairings. Returns the map g1-vertex -> g2-vertex on the
/// ball members, or nullopt.
using PairPredicate = std::function<bool(VertexId, VertexId)>;
std::optional<std::vector<std::pair<VertexId, VertexId>>> find_ball_isomorphism(
    const RootedGraph& g1, VertexId r1, const RootedGraph& g2, VertexId r2, int radius,
    const PairPredicate& accept = {}, std::size_t size_limit = 64);

/// Largest ball handled by the non-tree isomorphism search.
inline constexpr std::size_t kIsomorphismLimit = 64;

/// True iff the two balls are isomorphic as rooted graphs (induced
/// subgraphs, centers matched). Trees use canonical codes; other balls use
/// backtracking and throw SizeLimit above `general_limit` vertices.
bool rooted_isomorphic(const Ball& b1, const Ball& b2,
                       std::size_t general_limit = kIsomorphismLimit);

/// Code used to bucket balls: the AHU code for trees; for balls with cycles a
/// level-wise degree signature prefixed by "cyc", which is an invariant only.
std::string ball_code(const Ball& b);

/// Nearest-neighbour path pi_0 ... pi_l. length() is the number of steps.
struct VertexPath {
  std::vector<VertexId> vertices;

  std::size_t length() const { return vertices.empty() ? 0 : vertices.size() - 1; }
  /// Distinct visited vertices, sorted.
  std::vector<VertexId> support() const;
};

/// Throws PathNotInGraph if the path is empty, leaves V, or takes a non-edge step.
void validate_path(const RootedGraph& g, const VertexPath& path);

nlohmann::json to_json(const RootedGraph& g);
RootedGraph graph_from_json(const nlohmann::json& j);
RootedGraph load_graph(const std::string& path);
void save_graph(const RootedGraph& g, const std::string& path);

}  // namespace pam
