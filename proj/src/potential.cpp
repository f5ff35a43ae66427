#include "pam/potential.hpp"

#include <algorithm>
#include <cmath>

#include "pam/error.hpp"
#include "pam/rng.hpp"

namespace pam {

nlohmann::json Potential::to_json() const {
  nlohmann::json vals = nlohmann::json::object();
  for (std::size_t i = 0; i < values.size(); ++i) vals[std::to_string(i)] = values[i];
  return {{"rho", rho}, {"seed", seed}, {"values", vals}};
}

Potential Potential::from_json(const nlohmann::json& j) {
  Potential p;
  p.rho = j.at("rho").get<double>();
  p.seed = j.value("seed", std::uint64_t{0});
  const auto& vals = j.at("values");
  if (vals.is_array()) {
    p.values = vals.get<std::vector<double>>();
  } else {
    p.values.assign(vals.size(), 0.0);
    for (const auto& [key, v] : vals.items()) {
      const auto idx = std::stoul(key);
      if (idx >= p.values.size()) throw Error(ErrorCode::InvalidInput, "potential ids not dense");
      p.values[idx] = v.get<double>();
    }
  }
  for (double v : p.values)
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidInput, "potential values must be >= 0");
  return p;
}

Potential sample_double_exponential(std::size_t n, double rho, std::uint64_t seed) {
  if (!(rho > 0.0)) throw Error(ErrorCode::InvalidInput, "rho must be positive");
  CounterRng rng(seed);
  Potential p;
  p.rho = rho;
  p.seed = seed;
  p.values.resize(n);
  for (auto& v : p.values) v = std::max(0.0, rho * std::log(-std::log(rng.uniform())));
  return p;
}

Potential sample_double_exponential(const RootedGraph& g, double rho, std::uint64_t seed) {
  return sample_double_exponential(g.size(), rho, seed);
}

double double_exponential_cdf(double u, double rho) {
  if (u < 0.0) return 0.0;
  return 1.0 - std::exp(-std::exp(u / rho));
}

double a_scale(double L, double rho) {
  constexpr double kEE = 15.154262241479259;  // e^e
  return rho * std::log(std::log(std::max(L, kEE)));
}

std::pair<VertexId, double> max_in_ball(const Potential& xi, const Ball& b) {
  VertexId best = b.members.front();
  for (VertexId v : b.members)
    if (xi[v] > xi[best] || (xi[v] == xi[best] && v < best)) best = v;
  return {best, xi[best]};
}

void LandscapeConfig::validate() const {
  if (!(A > 0.0)) throw Error(ErrorCode::InvalidInput, "A must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidInput, "alpha must be in (0,1)");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw Error(ErrorCode::InvalidInput, "epsilon must be in (0,1)");
}

nlohmann::json LandscapeConfig::to_json() const {
  return {{"A", A}, {"alpha", alpha}, {"epsilon", epsilon}, {"M_A", M_A}};
}

int IslandDecomposition::component_of(VertexId v) const {
  for (std::size_t i = 0; i < components.size(); ++i)
    if (std::binary_search(components[i].vertices.begin(), components[i].vertices.end(), v))
      return static_cast<int>(i);
  return -1;
}

bool IslandDecomposition::in_Pi(VertexId v) const {
  return std::binary_search(Pi.begin(), Pi.end(), v);
}

bool IslandDecomposition::in_D(VertexId v) const {
  return std::binary_search(D.begin(), D.end(), v);
}

IslandDecomposition decompose_islands(const Potential& xi, const Ball& b,
                                      const LandscapeConfig& cfg) {
  cfg.validate();
  const RootedGraph& g = *b.graph;
  IslandDecomposition d;
  d.r = b.radius;
  d.L_r = b.size();
  d.a_L = a_scale(static_cast<double>(d.L_r), xi.rho);
  d.threshold = d.a_L - 2.0 * cfg.A;
  d.S_r = b.radius > 1 ? std::pow(std::log(static_cast<double>(b.radius)), cfg.alpha) : 0.0;
  const int reach = static_cast<int>(std::floor(d.S_r));

  std::vector<char> in_ball(g.size(), 0);
  for (VertexId v : b.members) in_ball[v] = 1;
  for (VertexId v : b.members)
    if (xi[v] > d.threshold) d.Pi.push_back(v);
  std::sort(d.Pi.begin(), d.Pi.end());

  // Multi-source BFS from Pi in the whole graph, cut at depth `reach`.
  std::vector<int> dist(g.size(), -1);
  std::vector<VertexId> queue(d.Pi.begin(), d.Pi.end());
  for (VertexId v : queue) dist[v] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const VertexId v = queue[head];
    if (dist[v] >= reach) continue;
    for (VertexId w : g.neighbors(v))
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
  }
  for (VertexId v : queue)
    if (in_ball[v]) d.D.push_back(v);
  std::sort(d.D.begin(), d.D.end());

  std::vector<char> in_D(g.size(), 0), seen(g.size(), 0);
  for (VertexId v : d.D) in_D[v] = 1;
  for (VertexId start : d.D) {
    if (seen[start]) continue;
    Island island;
    std::vector<VertexId> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      const VertexId v = stack.back();
      stack.pop_back();
      island.vertices.push_back(v);
      for (VertexId w : g.neighbors(v))
        if (in_D[w] && !seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
    std::sort(island.vertices.begin(), island.vertices.end());
    island.z = island.vertices.front();
    for (VertexId v : island.vertices)
      if (xi[v] > xi[island.z]) island.z = v;
    island.z_value = xi[island.z];
    d.components.push_back(std::move(island));
  }
  return d;
}

IslandReport island_stats(const IslandDecomposition& d, const RootedGraph& g,
                          const LandscapeConfig& cfg) {
  IslandReport rep;
  const double M = static_cast<double>(cfg.M_A);
  for (const auto& island : d.components) {
    IslandRow row;
    row.size = island.vertices.size();
    for (VertexId v : island.vertices)
      if (d.in_Pi(v)) ++row.pi_count;
    const auto sub = induced_subgraph(g, island.vertices, island.vertices.front());
    for (VertexId v = 0; v < sub.graph.size(); ++v)
      row.diameter = std::max(row.diameter, sub.graph.eccentricity(v));
    if (cfg.M_A > 0) {
      row.pi_violation = row.pi_count > cfg.M_A;
      row.diameter_violation = row.diameter > 2.0 * M * d.S_r;
      row.size_violation =
          static_cast<double>(row.size) > M * std::pow(static_cast<double>(g.d_max()), d.S_r);
    }
    rep.max_pi_count = std::max(rep.max_pi_count, row.pi_count);
    rep.max_diameter = std::max(rep.max_diameter, row.diameter);
    rep.max_size = std::max(rep.max_size, row.size);
    rep.violations += row.pi_violation + row.diameter_violation + row.size_violation;
    rep.rows.push_back(row);
  }
  return rep;
}

nlohmann::json IslandReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows)
    rows_json.push_back({{"size", r.size},
                         {"pi_count", r.pi_count},
                         {"diameter", r.diameter},
                         {"pi_violation", r.pi_violation},
                         {"diameter_violation", r.diameter_violation},
                         {"size_violation", r.size_violation}});
  return {{"rows", rows_json},
          {"max_pi_count", max_pi_count},
          {"max_diameter", max_diameter},
          {"max_size", max_size},
          {"violations", violations}};
}

std::size_t low_point_count(const Potential& xi, const VertexPath& path, double a_L,
                            double epsilon) {
  const double level = (1.0 - epsilon) * a_L;
  std::size_t m = 0;
  for (std::size_t i = 0; i < path.length(); ++i)
    if (xi[path.vertices[i]] <= level) ++m;
  return m;
}

PeakCounts path_peak_counts(const Potential& xi, const VertexPath& path, const Ball& b,
                            const LandscapeConfig& cfg) {
  validate_path(*b.graph, path);
  const double a_L = a_scale(static_cast<double>(b.size()), xi.rho);
  PeakCounts c;
  for (VertexId v : path.support()) {
    if (xi[v] > (1.0 - cfg.epsilon) * a_L) ++c.N_eps;
    if (xi[v] > a_L - 2.0 * cfg.A) ++c.N_high;
  }
  c.M_eps = low_point_count(xi, path, a_L, cfg.epsilon);
  return c;
}

}  // namespace pam
