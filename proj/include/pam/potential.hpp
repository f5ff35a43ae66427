#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pam/graph.hpp"

namespace pam {

/// Field xi: V -> [0, inf), indexed by VertexId.
struct Potential {
  std::vector<double> values;
  double rho = 1.0;
  std::uint64_t seed = 0;

  double operator[](VertexId v) const { return values[v]; }
  std::size_t size() const { return values.size(); }
  nlohmann::json to_json() const;
  static Potential from_json(const nlohmann::json& j);
};

/// i.i.d. draws with P(xi > u) = exp(-e^{u/rho}) for u >= 0 and an atom at 0
/// of mass 1 - e^{-1}; sampled as max(0, rho log(-log V)), V uniform on (0,1).
Potential sample_double_exponential(std::size_t n, double rho, std::uint64_t seed);
Potential sample_double_exponential(const RootedGraph& g, double rho, std::uint64_t seed);

/// Target CDF of a single draw.
double double_exponential_cdf(double u, double rho);

/// rho * loglog(max(L, e^e)).
double a_scale(double L, double rho);

/// Argmax and max of xi on the ball; ties go to the smallest VertexId.
std::pair<VertexId, double> max_in_ball(const Potential& xi, const Ball& b);

struct LandscapeConfig {
  double A = 1.0;
  double alpha = 0.5;
  double epsilon = 0.1;
  /// Cap on |C ∩ Pi| used only for violation flags; 0 disables the flags.
  std::size_t M_A = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

struct Island {
  std::vector<VertexId> vertices;  // sorted
  VertexId z = 0;                  // argmax of xi on the island
  double z_value = 0.0;
};

struct IslandDecomposition {
  int r = 0;
  std::size_t L_r = 0;
  double a_L = 0.0;
  double threshold = 0.0;  // a_L - 2A
  double S_r = 0.0;        // (log r)^alpha
  std::vector<VertexId> Pi;  // sorted
  std::vector<VertexId> D;   // sorted
  std::vector<Island> components;

  /// Index of the island containing v, or -1.
  int component_of(VertexId v) const;
  bool in_Pi(VertexId v) const;
  bool in_D(VertexId v) const;
};

/// Pi = {xi > a_{L_r} - 2A} within the ball; D = ball vertices within graph
/// distance floor(S_r) of Pi (distances measured in the whole graph);
/// components of the subgraph induced by D. S_r is 0 for r <= 1.
IslandDecomposition decompose_islands(const Potential& xi, const Ball& b,
                                      const LandscapeConfig& cfg);

struct IslandRow {
  std::size_t size = 0;
  std::size_t pi_count = 0;
  int diameter = 0;  // within the island
  bool pi_violation = false;
  bool diameter_violation = false;
  bool size_violation = false;
};

struct IslandReport {
  std::vector<IslandRow> rows;
  std::size_t max_pi_count = 0;
  int max_diameter = 0;
  std::size_t max_size = 0;
  std::size_t violations = 0;

  nlohmann::json to_json() const;
};

/// Per-island |C ∩ Pi|, diameter and size against M_A, 2 M_A S_r and
/// M_A d_max^{S_r}. Flags are only raised when cfg.M_A > 0.
IslandReport island_stats(const IslandDecomposition& d, const RootedGraph& g,
                          const LandscapeConfig& cfg);

struct PeakCounts {
  std::size_t N_eps = 0;   // support points with xi > (1 - eps) a_L
  std::size_t N_high = 0;  // support points with xi > a_L - 2A
  std::size_t M_eps = 0;   // steps i < |pi| with xi(pi_i) <= (1 - eps) a_L
};

/// Throws PathNotInGraph.
PeakCounts path_peak_counts(const Potential& xi, const VertexPath& path, const Ball& b,
                            const LandscapeConfig& cfg);

/// M_pi^{r,eps} for a path given the level a_L.
std::size_t low_point_count(const Potential& xi, const VertexPath& path, double a_L,
                            double epsilon);

}  // namespace pam
