#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pam/graph.hpp"
#include "pam/rng.hpp"

namespace pam {

/// Law of a positive integer degree with finite support.
class DegreeLaw {
 public:
  /// Validates: support sorted, distinct, >= 1; probabilities >= 0 summing to
  /// 1 within 1e-12. Zero-probability atoms are dropped.
  DegreeLaw(std::vector<int> support, std::vector<double> probabilities);

  static DegreeLaw constant(int d);
  static DegreeLaw uniform(std::vector<int> support);

  const std::vector<int>& support() const { return support_; }
  const std::vector<double>& probabilities() const { return probs_; }
  int min_degree() const { return support_.front(); }
  int max_degree() const { return support_.back(); }
  bool is_constant() const { return support_.size() == 1; }
  double mean() const;
  /// E[f(D)] for a function of the degree.
  template <class F>
  double expect(F f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) s += probs_[i] * f(support_[i]);
    return s;
  }
  double probability(int k) const;

  /// One draw by inversion; a constant law consumes no randomness.
  int sample(CounterRng& rng) const;

  nlohmann::json to_json() const;
  static DegreeLaw from_json(const nlohmann::json& j);

 private:
  std::vector<int> support_;
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

/// Galton-Watson tree with root offspring D_0 and D_g - 1 offspring below.
struct GWSpec {
  DegreeLaw initial = DegreeLaw::constant(3);
  DegreeLaw general = DegreeLaw::constant(3);
  int radius = 0;
  std::uint64_t seed = 0;
  std::size_t vertex_budget = kDefaultVertexBudget;
  /// Checks min supp(D_g) >= 2 and E[D_g] > 2.
  bool enforce_bounded_degree = true;

  int d_max() const { return std::max(initial.max_degree(), general.max_degree()); }
};

/// Throws InvalidInput when the bounded-degree assumptions fail.
void validate(const GWSpec& spec);

/// Breadth-first GW sample truncated at `spec.radius`. Vertices are numbered in
/// BFS order; leaves at depth `radius` are the truncation boundary.
RootedGraph sample_gw_tree(const GWSpec& spec);

/// log E[D_g - 1]. Throws NonExpanding if E[D_g - 1] <= 1.
double volume_growth_rate(const DegreeLaw& general);

/// P(D_* = k) = k P(D = k) / E[D].
DegreeLaw size_biased_law(const DegreeLaw& law);

/// E[D(D - 1)] / E[D].
double nu(const DegreeLaw& law);

/// Limit law e^{-nu/2 - nu^2/4} of the probability that the configuration
/// model is simple.
double simplicity_probability_limit(const DegreeLaw& law);

struct DegreeSequence {
  std::vector<int> degrees;

  std::size_t n() const { return degrees.size(); }
  long long total_degree() const;
  /// Empirical law of a uniformly chosen vertex's degree.
  DegreeLaw empirical_law() const;
};

/// Degree sequence of n vertices whose empirical law is as close as possible
/// to `law` (largest-remainder rounding; parity fixed by bumping one vertex).
DegreeSequence sequence_from_law(const DegreeLaw& law, std::size_t n);

/// Phi_n = 1 / max(1/n, TV(empirical law, limit)).
double phi_n(const DegreeSequence& ds, const DegreeLaw& limit);

/// Total variation distance between two degree laws.
double total_variation(const DegreeLaw& a, const DegreeLaw& b);

DegreeSequence load_degree_sequence(const std::string& path);  // .csv or .json

/// Multigraph from a half-edge matching, with defect counts.
struct Multigraph {
  std::size_t n = 0;
  std::vector<Edge> edges;  // one entry per matched pair, loops as (v, v)
  VertexId root = 0;
  std::size_t loops = 0;
  std::size_t multi_edges = 0;  // pairs beyond the first between two vertices

  bool simple() const { return loops == 0 && multi_edges == 0; }
  std::vector<std::vector<VertexId>> adjacency() const;
  bool connected() const;
  /// The connected component of the root as a rooted simple graph, with the
  /// map from new to old vertex ids. Requires simple().
  InducedSubgraph root_component(int d_max) const;
  nlohmann::json to_json() const;
};

struct SampleReport {
  std::size_t attempts = 1;
  bool simple = false;
  bool connected = false;

  nlohmann::json to_json() const;
};

/// Uniform perfect matching of half-edges (Fisher-Yates over the half-edge
/// array, consecutive entries paired); root uniform over the vertices.
/// Throws OddTotalDegree.
std::pair<Multigraph, SampleReport> sample_configuration_model(const DegreeSequence& ds,
                                                               std::uint64_t seed);

/// Rejection sampling of the configuration model until simple (and connected
/// when `require_connected`). Attempts abort at the first defect. Throws
/// MaxAttemptsExceeded.
std::pair<Multigraph, SampleReport> sample_uniform_simple_graph(const DegreeSequence& ds,
                                                                std::uint64_t seed,
                                                                std::size_t max_attempts,
                                                                bool require_connected = false);

struct CouplingReport {
  int radius = 0;
  std::size_t trials = 0;
  std::size_t isomorphic = 0;
  double frequency = 0.0;
  /// Standard error of `frequency`.
  double std_error = 0.0;
  /// Fraction of graph balls that are trees.
  double tree_fraction = 0.0;
  /// TV distance between empirical ball-code distributions of the two sides.
  double tv_estimate = 0.0;
  std::map<std::string, std::size_t> graph_codes;
  std::map<std::string, std::size_t> tree_codes;
  double log_phi_n = 0.0;

  nlohmann::json to_json() const;
};

/// Trial k draws a fresh uniform simple graph and a fresh GW tree from seed
/// streams 2k and 2k+1 and compares their radius-m balls around the roots.
/// Throws SizeLimit when a cyclic ball exceeds the isomorphism limit.
CouplingReport coupling_check(const DegreeSequence& ds, const GWSpec& gw, int m,
                              std::size_t trials, std::uint64_t seed,
                              std::size_t max_attempts = 10000);

}  // namespace pam
