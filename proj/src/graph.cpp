#include "pam/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pam/error.hpp"

namespace pam {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::DegreeBoundExceeded: return "DegreeBoundExceeded";
    case ErrorCode::SizeOverflow: return "SizeOverflow";
    case ErrorCode::SizeLimit: return "SizeLimit";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::VertexBudgetExceeded: return "VertexBudgetExceeded";
    case ErrorCode::NonExpanding: return "NonExpanding";
    case ErrorCode::OddTotalDegree: return "OddTotalDegree";
    case ErrorCode::MaxAttemptsExceeded: return "MaxAttemptsExceeded";
    case ErrorCode::PathNotInGraph: return "PathNotInGraph";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::EmptyDomain: return "EmptyDomain";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DomainTooLarge: return "DomainTooLarge";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::StepControlFailure: return "StepControlFailure";
    case ErrorCode::GammaTooSmall: return "GammaTooSmall";
    case ErrorCode::InfeasibleBoundary: return "InfeasibleBoundary";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::CouplingRegimeViolated: return "CouplingRegimeViolated";
  }
  return "Unknown";
}

RootedGraph::RootedGraph(std::vector<std::vector<VertexId>> adjacency, VertexId root, int d_max)
    : adj_(std::move(adjacency)), root_(root), d_max_(d_max) {
  const std::size_t n = adj_.size();
  if (n == 0) throw Error(ErrorCode::InvalidInput, "graph has no vertices");
  if (root_ >= n) throw Error(ErrorCode::InvalidInput, "root out of range");
  if (d_max_ < 1) throw Error(ErrorCode::InvalidInput, "d_max must be positive");
  std::size_t degree_sum = 0;
  for (VertexId v = 0; v < n; ++v) {
    auto& nb = adj_[v];
    std::sort(nb.begin(), nb.end());
    for (std::size_t i = 0; i < nb.size(); ++i) {
      if (nb[i] >= n) throw Error(ErrorCode::InvalidInput, "neighbor index out of range");
      if (nb[i] == v) throw Error(ErrorCode::SelfLoop, "self-loop at vertex " + std::to_string(v));
      if (i > 0 && nb[i] == nb[i - 1])
        throw Error(ErrorCode::DuplicateEdge,
                    "parallel edge {" + std::to_string(v) + "," + std::to_string(nb[i]) + "}");
    }
    if (static_cast<int>(nb.size()) > d_max_)
      throw Error(ErrorCode::DegreeBoundExceeded,
                  "vertex " + std::to_string(v) + " has degree " + std::to_string(nb.size()) +
                      " > d_max " + std::to_string(d_max_));
    degree_sum += nb.size();
  }
  for (VertexId v = 0; v < n; ++v)
    for (VertexId w : adj_[v])
      if (!std::binary_search(adj_[w].begin(), adj_[w].end(), v))
        throw Error(ErrorCode::InvalidInput, "adjacency is not symmetric");
  edge_count_ = degree_sum / 2;
  const auto dist = distances_from(root_);
  if (std::any_of(dist.begin(), dist.end(), [](int d) { return d < 0; }))
    throw Error(ErrorCode::Disconnected, "graph is not connected from the root");
}

bool RootedGraph::adjacent(VertexId a, VertexId b) const {
  return std::binary_search(adj_[a].begin(), adj_[a].end(), b);
}

int RootedGraph::max_degree() const {
  int m = 0;
  for (const auto& nb : adj_) m = std::max(m, static_cast<int>(nb.size()));
  return m;
}

std::vector<Edge> RootedGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (VertexId v = 0; v < adj_.size(); ++v)
    for (VertexId w : adj_[v])
      if (v < w) out.emplace_back(v, w);
  return out;
}

std::vector<int> RootedGraph::distances_from(VertexId source) const {
  return distances_from(source, -1);
}

std::vector<int> RootedGraph::distances_from(VertexId source, int max_depth) const {
  std::vector<int> dist(adj_.size(), -1);
  std::vector<VertexId> frontier{source};
  dist[source] = 0;
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    const VertexId v = frontier[head];
    if (max_depth >= 0 && dist[v] >= max_depth) continue;
    for (VertexId w : adj_[v]) {
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        frontier.push_back(w);
      }
    }
  }
  return dist;
}

int RootedGraph::eccentricity(VertexId v) const {
  const auto dist = distances_from(v);
  return *std::max_element(dist.begin(), dist.end());
}

RootedGraph RootedGraph::rerooted(VertexId new_root) const {
  return RootedGraph(adj_, new_root, d_max_);
}

RootedGraph build_graph(std::span<const Edge> edges, VertexId root, std::optional<int> d_max,
                        std::optional<std::size_t> vertex_count) {
  std::size_t n = static_cast<std::size_t>(root) + 1;
  for (const auto& [a, b] : edges) n = std::max<std::size_t>(n, std::max(a, b) + 1ull);
  if (vertex_count) {
    if (*vertex_count < n) throw Error(ErrorCode::InvalidInput, "vertex_count too small");
    n = *vertex_count;
  }
  std::vector<std::vector<VertexId>> adj(n);
  for (const auto& [a, b] : edges) {
    if (a == b) throw Error(ErrorCode::SelfLoop, "self-loop at vertex " + std::to_string(a));
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  int realized = 0;
  for (const auto& nb : adj) realized = std::max(realized, static_cast<int>(nb.size()));
  return RootedGraph(std::move(adj), root, d_max.value_or(std::max(1, realized)));
}

bool Ball::contains(VertexId v) const {
  return std::find(members.begin(), members.end(), v) != members.end();
}

Ball ball(const RootedGraph& g, VertexId center, int r) {
  if (center >= g.size()) throw Error(ErrorCode::InvalidInput, "ball center out of range");
  Ball b;
  b.graph = &g;
  b.center = center;
  b.radius = r;
  std::vector<int> dist(g.size(), -1);
  dist[center] = 0;
  b.members.push_back(center);
  for (std::size_t head = 0; head < b.members.size(); ++head) {
    const VertexId v = b.members[head];
    if (dist[v] >= r) continue;
    for (VertexId w : g.neighbors(v)) {
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        b.members.push_back(w);
      }
    }
  }
  b.member_dist.reserve(b.members.size());
  for (VertexId v : b.members) {
    b.member_dist.push_back(dist[v]);
    if (dist[v] == r) b.boundary.push_back(v);
  }
  return b;
}

InducedSubgraph induced_subgraph(const RootedGraph& g, std::span<const VertexId> vertices,
                                 VertexId root) {
  std::vector<std::int64_t> local(g.size(), -1);
  std::vector<VertexId> ids(vertices.begin(), vertices.end());
  // Put the root first so relabeled root is 0.
  auto it = std::find(ids.begin(), ids.end(), root);
  if (it == ids.end()) throw Error(ErrorCode::InvalidInput, "root not in vertex set");
  std::rotate(ids.begin(), it, it + 1);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (local[ids[i]] >= 0) throw Error(ErrorCode::InvalidInput, "repeated vertex");
    local[ids[i]] = static_cast<std::int64_t>(i);
  }
  std::vector<std::vector<VertexId>> adj(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (VertexId w : g.neighbors(ids[i]))
      if (local[w] >= 0) adj[i].push_back(static_cast<VertexId>(local[w]));
  int realized = 1;
  for (const auto& nb : adj) realized = std::max(realized, static_cast<int>(nb.size()));
  return {RootedGraph(std::move(adj), 0, std::max(realized, g.d_max())), std::move(ids)};
}

InducedSubgraph induced_ball(const Ball& b) {
  return induced_subgraph(*b.graph, b.members, b.center);
}

namespace {

std::size_t tree_size(int root_children, int d, int R, std::size_t budget) {
  // 1 + c + c(d-1) + ... up to depth R, saturating at budget + 1.
  std::size_t total = 1;
  std::size_t level = 1;
  for (int k = 1; k <= R; ++k) {
    const std::size_t branching = (k == 1) ? static_cast<std::size_t>(root_children)
                                           : static_cast<std::size_t>(d - 1);
    if (branching == 0) break;
    if (level > (budget + 1) / branching) return budget + 1;
    level *= branching;
    total += level;
    if (total > budget) return budget + 1;
  }
  return total;
}

RootedGraph regular_branching_tree(int root_children, int d, int R, std::size_t budget) {
  if (d < 2) throw Error(ErrorCode::InvalidInput, "tree degree must be >= 2");
  if (R < 0) throw Error(ErrorCode::InvalidInput, "radius must be >= 0");
  const std::size_t n = tree_size(root_children, d, R, budget);
  if (n > budget)
    throw Error(ErrorCode::SizeOverflow,
                "tree of degree " + std::to_string(d) + " and radius " + std::to_string(R) +
                    " exceeds vertex budget " + std::to_string(budget));
  std::vector<std::vector<VertexId>> adj(n);
  std::vector<int> depth(n, 0);
  VertexId next = 1;
  for (VertexId v = 0; v < n && next < n; ++v) {
    if (depth[v] >= R) continue;
    const int kids = (v == 0) ? root_children : d - 1;
    for (int c = 0; c < kids; ++c) {
      const VertexId w = next++;
      depth[w] = depth[v] + 1;
      adj[v].push_back(w);
      adj[w].push_back(v);
    }
  }
  return RootedGraph(std::move(adj), 0, d);
}

}  // namespace

RootedGraph homogeneous_tree(int d, int R, std::size_t vertex_budget) {
  return regular_branching_tree(d, d, R, vertex_budget);
}

RootedGraph half_homogeneous_tree(int d, int R, std::size_t vertex_budget) {
  return regular_branching_tree(d - 1, d, R, vertex_budget);
}

RootedGraph glue_two(const RootedGraph& g1, VertexId x1, const RootedGraph& g2, VertexId x2,
                     std::optional<int> d_max) {
  if (x1 >= g1.size() || x2 >= g2.size())
    throw Error(ErrorCode::InvalidInput, "glue vertex out of range");
  const int bound = d_max.value_or(std::max(g1.d_max(), g2.d_max()));
  if (g1.degree(x1) + 1 > bound || g2.degree(x2) + 1 > bound)
    throw Error(ErrorCode::DegreeBoundExceeded, "glue vertex already has degree d_max");
  const auto offset = static_cast<VertexId>(g1.size());
  std::vector<std::vector<VertexId>> adj = g1.adjacency();
  adj.reserve(g1.size() + g2.size());
  for (VertexId v = 0; v < g2.size(); ++v) {
    std::vector<VertexId> nb;
    nb.reserve(g2.degree(v) + 1);
    for (VertexId w : g2.neighbors(v)) nb.push_back(w + offset);
    adj.push_back(std::move(nb));
  }
  adj[x1].push_back(x2 + offset);
  adj[x2 + offset].push_back(x1);
  return RootedGraph(std::move(adj), g1.root(), bound);
}

RootedGraph glue_star(std::span<const std::pair<RootedGraph, VertexId>> components,
                      std::optional<int> d_max) {
  if (components.empty()) throw Error(ErrorCode::InvalidInput, "glue_star needs k >= 1");
  int bound = 1;
  for (const auto& [g, y] : components) bound = std::max(bound, g.d_max());
  bound = d_max.value_or(bound);
  if (static_cast<int>(components.size()) > bound)
    throw Error(ErrorCode::DegreeBoundExceeded, "hub degree exceeds d_max");
  std::vector<std::vector<VertexId>> adj;
  std::vector<VertexId> attach;
  for (const auto& [g, y] : components) {
    if (y >= g.size()) throw Error(ErrorCode::InvalidInput, "glue vertex out of range");
    if (g.degree(y) + 1 > bound)
      throw Error(ErrorCode::DegreeBoundExceeded, "component vertex already has degree d_max");
    const auto offset = static_cast<VertexId>(adj.size());
    for (VertexId v = 0; v < g.size(); ++v) {
      std::vector<VertexId> nb;
      for (VertexId w : g.neighbors(v)) nb.push_back(w + offset);
      adj.push_back(std::move(nb));
    }
    attach.push_back(y + offset);
  }
  const auto hub = static_cast<VertexId>(adj.size());
  adj.emplace_back();
  for (VertexId y : attach) {
    adj[hub].push_back(y);
    adj[y].push_back(hub);
  }
  return RootedGraph(std::move(adj), hub, bound);
}

RootedGraph realize(const TreeSpec& spec, std::size_t vertex_budget) {
  RootedGraph tree = spec.kind == TreeKind::Homogeneous
                         ? homogeneous_tree(spec.d, spec.radius, vertex_budget)
                         : half_homogeneous_tree(spec.d, spec.radius, vertex_budget);
  if (spec.attachments.empty()) return tree;
  int bound = spec.d;
  for (VertexId at : spec.attachments) {
    if (at >= tree.size()) throw Error(ErrorCode::InvalidInput, "attachment vertex out of range");
    const int depth = tree.distances_from(tree.root())[at];
    const int remaining = spec.radius - depth - 1;
    if (remaining < 0)
      throw Error(ErrorCode::InvalidInput, "attachment vertex lies on the truncation boundary");
    bound = std::max(bound, tree.degree(at) + 1);
    const RootedGraph copy = half_homogeneous_tree(spec.d, remaining, vertex_budget);
    if (tree.size() + copy.size() > vertex_budget)
      throw Error(ErrorCode::SizeOverflow, "glued tree exceeds vertex budget");
    tree = glue_two(tree, at, copy, copy.root(), bound);
  }
  return tree;
}

namespace {

// Canonical AHU codes for the tree induced on `vertices` (a connected tree),
// computed bottom-up from BFS order without recursion.
std::string ahu_code(const RootedGraph& tree) {
  const std::size_t n = tree.size();
  std::vector<VertexId> order{tree.root()};
  std::vector<std::int64_t> parent(n, -1);
  parent[tree.root()] = tree.root();
  for (std::size_t head = 0; head < order.size(); ++head) {
    const VertexId v = order[head];
    for (VertexId w : tree.neighbors(v))
      if (parent[w] < 0) {
        parent[w] = v;
        order.push_back(w);
      }
  }
  std::vector<std::vector<std::string>> child_codes(n);
  std::vector<std::string> code(n);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const VertexId v = *it;
    auto& kids = child_codes[v];
    std::sort(kids.begin(), kids.end());
    std::string c = "(";
    for (auto& k : kids) c += k;
    c += ")";
    kids.clear();
    kids.shrink_to_fit();
    if (v != tree.root()) child_codes[static_cast<VertexId>(parent[v])].push_back(std::move(c));
    else code[v] = std::move(c);
  }
  return code[tree.root()];
}

}  // namespace

std::string canonical_tree_code(const RootedGraph& tree) {
  if (!tree.is_tree()) throw Error(ErrorCode::InvalidInput, "canonical_tree_code needs a tree");
  return ahu_code(tree);
}

std::optional<std::vector<std::pair<VertexId, VertexId>>> find_ball_isomorphism(
    const RootedGraph& g1, VertexId r1, const RootedGraph& g2, VertexId r2, int radius,
    const PairPredicate& accept, std::size_t size_limit) {
  const Ball b1 = ball(g1, r1, radius);
  const Ball b2 = ball(g2, r2, radius);
  if (b1.size() != b2.size()) return std::nullopt;
  if (b1.size() > size_limit)
    throw Error(ErrorCode::SizeLimit, "ball has " + std::to_string(b1.size()) +
                                          " vertices, limit " + std::to_string(size_limit));
  const InducedSubgraph s1 = induced_ball(b1);
  const InducedSubgraph s2 = induced_ball(b2);
  const RootedGraph& h1 = s1.graph;
  const RootedGraph& h2 = s2.graph;
  if (h1.edge_count() != h2.edge_count()) return std::nullopt;
  const std::size_t n = h1.size();
  // Induced balls are relabeled in BFS order, so local distances follow member_dist.
  const auto& d1 = b1.member_dist;
  const auto& d2 = b2.member_dist;
  // Level profiles and degree multisets per level must agree.
  {
    std::vector<std::pair<int, int>> p1, p2;
    for (std::size_t i = 0; i < n; ++i) {
      p1.emplace_back(d1[i], h1.degree(static_cast<VertexId>(i)));
      p2.emplace_back(d2[i], h2.degree(static_cast<VertexId>(i)));
    }
    std::sort(p1.begin(), p1.end());
    std::sort(p2.begin(), p2.end());
    if (p1 != p2) return std::nullopt;
  }
  // BFS parent of each h1 vertex (some earlier neighbor at distance - 1).
  std::vector<VertexId> bfs_parent(n, 0);
  for (std::size_t i = 1; i < n; ++i)
    for (VertexId w : h1.neighbors(static_cast<VertexId>(i)))
      if (d1[w] == d1[i] - 1) {
        bfs_parent[i] = w;
        break;
      }
  std::vector<std::int64_t> map(n, -1), inverse(n, -1);
  auto consistent = [&](std::size_t v, VertexId c) {
    if (d1[v] != d2[c] || h1.degree(static_cast<VertexId>(v)) != h2.degree(c)) return false;
    if (accept && !accept(s1.original_ids[v], s2.original_ids[c])) return false;
    // Adjacency to every already-mapped vertex must be preserved both ways.
    int mapped_nb1 = 0;
    for (VertexId w : h1.neighbors(static_cast<VertexId>(v))) {
      if (map[w] < 0) continue;
      ++mapped_nb1;
      if (!h2.adjacent(c, static_cast<VertexId>(map[w]))) return false;
    }
    int mapped_nb2 = 0;
    for (VertexId w : h2.neighbors(c))
      if (inverse[w] >= 0) ++mapped_nb2;
    return mapped_nb1 == mapped_nb2;
  };
  std::function<bool(std::size_t)> extend = [&](std::size_t v) -> bool {
    if (v == n) return true;
    const auto anchor = static_cast<VertexId>(map[bfs_parent[v]]);
    for (VertexId c : h2.neighbors(anchor)) {
      if (inverse[c] >= 0 || !consistent(v, c)) continue;
      map[v] = c;
      inverse[c] = static_cast<std::int64_t>(v);
      if (extend(v + 1)) return true;
      map[v] = -1;
      inverse[c] = -1;
    }
    return false;
  };
  if (!consistent(0, 0)) return std::nullopt;
  map[0] = 0;
  inverse[0] = 0;
  if (!extend(1)) return std::nullopt;
  std::vector<std::pair<VertexId, VertexId>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.emplace_back(s1.original_ids[i], s2.original_ids[static_cast<std::size_t>(map[i])]);
  return out;
}

bool rooted_isomorphic(const Ball& b1, const Ball& b2, std::size_t general_limit) {
  if (b1.size() != b2.size()) return false;
  const InducedSubgraph s1 = induced_ball(b1);
  const InducedSubgraph s2 = induced_ball(b2);
  if (s1.graph.edge_count() != s2.graph.edge_count()) return false;
  if (s1.graph.is_tree()) return ahu_code(s1.graph) == ahu_code(s2.graph);
  if (b1.size() > general_limit)
    throw Error(ErrorCode::SizeLimit, "non-tree ball with " + std::to_string(b1.size()) +
                                          " vertices exceeds limit " +
                                          std::to_string(general_limit));
  const int radius = std::max(b1.radius, b2.radius);
  return find_ball_isomorphism(*b1.graph, b1.center, *b2.graph, b2.center, radius, {},
                               general_limit)
      .has_value();
}

std::string ball_code(const Ball& b) {
  const InducedSubgraph s = induced_ball(b);
  if (s.graph.is_tree()) return ahu_code(s.graph);
  std::ostringstream os;
  os << "cyc" << s.graph.size() << "e" << s.graph.edge_count();
  std::vector<std::vector<int>> levels(static_cast<std::size_t>(b.radius) + 1);
  for (std::size_t i = 0; i < s.graph.size(); ++i)
    levels[static_cast<std::size_t>(b.member_dist[i])].push_back(
        s.graph.degree(static_cast<VertexId>(i)));
  for (auto& lv : levels) {
    std::sort(lv.begin(), lv.end());
    os << "|";
    for (int d : lv) os << d;
  }
  return os.str();
}

std::vector<VertexId> VertexPath::support() const {
  std::vector<VertexId> s = vertices;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

void validate_path(const RootedGraph& g, const VertexPath& path) {
  if (path.vertices.empty()) throw Error(ErrorCode::PathNotInGraph, "empty path");
  for (std::size_t i = 0; i < path.vertices.size(); ++i) {
    if (path.vertices[i] >= g.size())
      throw Error(ErrorCode::PathNotInGraph, "vertex " + std::to_string(path.vertices[i]) +
                                                 " not in graph");
    if (i > 0 && !g.adjacent(path.vertices[i - 1], path.vertices[i]))
      throw Error(ErrorCode::PathNotInGraph, "step " + std::to_string(i) + " is not an edge");
  }
}

nlohmann::json to_json(const RootedGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : g.edges()) edges.push_back({a, b});
  return {{"root", g.root()}, {"edges", edges}, {"d_max", g.d_max()}, {"n", g.size()}};
}

RootedGraph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("root") || !j.contains("edges"))
    throw Error(ErrorCode::InvalidInput, "graph JSON needs \"root\" and \"edges\"");
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2)
      throw Error(ErrorCode::InvalidInput, "edge entries must be [int, int]");
    const auto a = e[0].get<std::int64_t>();
    const auto b = e[1].get<std::int64_t>();
    if (a < 0 || b < 0) throw Error(ErrorCode::InvalidInput, "negative vertex index");
    edges.emplace_back(static_cast<VertexId>(a), static_cast<VertexId>(b));
  }
  std::optional<int> d_max;
  if (j.contains("d_max")) d_max = j.at("d_max").get<int>();
  std::optional<std::size_t> n;
  if (j.contains("n")) n = j.at("n").get<std::size_t>();
  return build_graph(edges, j.at("root").get<VertexId>(), d_max, n);
}

RootedGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidInput, path + ": " + e.what());
  }
  return graph_from_json(j);
}

void save_graph(const RootedGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + path);
  out << to_json(g).dump() << "\n";
}

}  // namespace pam
