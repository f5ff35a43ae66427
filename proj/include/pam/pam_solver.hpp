#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pam/graph.hpp"
#include "pam/potential.hpp"

namespace pam {

struct MassCurve {
  std::vector<double> times;
  std::vector<double> U;
  std::vector<double> logU;
  std::vector<double> logU_over_t;  // 0 at t = 0
  /// log(1 + K/U) where K is the mass lost through the Dirichlet boundary,
  /// propagated afterwards at rate max xi on the domain. 0 when no edge leaves.
  std::vector<double> error_estimate;
  /// Share of the mass sitting on domain vertices with an edge leaving it.
  std::vector<double> boundary_mass;
  std::vector<double> std_error;  // Monte Carlo only, else 0
  int truncation_radius = 0;      // -1 when the whole graph is used
  std::size_t domain_size = 0;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

struct SolverConfig {
  enum class Method { Deterministic, FeynmanKac };
  Method method = Method::Deterministic;
  double c = 1.0;    // l_t = max(ceil(c t log t), r_min)
  int r_min = 4;
  bool whole_graph = false;  // evolve on all of V regardless of l_t
  int krylov_dim = 30;
  double rel_tol = 1e-8;     // local error target per substep
  std::size_t vertex_budget = 4'000'000;
  std::size_t n_paths = 100000;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

/// max(ceil(c t log t), r_min); r_min for t <= 1.
int truncation_radius(double t, double c, int r_min);

/// Total mass from u(0) = 1_root on B_l(root) with Dirichlet boundary, l the
/// truncation radius for the largest time (all of V if it fits inside the
/// ball or whole_graph is set). Krylov propagation of e^{t(H - max q)} with
/// scale tracking, so logU is finite even where U overflows. Times must be
/// nonnegative and nondecreasing. Throws BudgetExceeded, StepControlFailure.
MassCurve total_mass_deterministic(const RootedGraph& g, const Potential& xi,
                                   std::span<const double> t_grid, const SolverConfig& cfg = {});

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// E_root[exp(int_0^t xi(X_s) ds)] for the walk with unit rate per edge on the
/// whole graph. Path k uses stream split(k) of the seed; weights are summed in
/// path order, so the result does not depend on PAM_THREADS.
MonteCarloEstimate total_mass_feynman_kac(const RootedGraph& g, const Potential& xi, double t,
                                          std::size_t n_paths, std::uint64_t seed);

/// Geometric grid t_min * ratio^k, k = 0..count-1.
std::vector<double> geometric_grid(double t_min, double ratio, std::size_t count);

/// prod_{i<l} deg(pi_i) / (gamma - xi(pi_i) + deg(pi_i)). Throws GammaTooSmall
/// unless gamma exceeds max_{i<l}(xi - deg) by at least 1e-9, PathNotInGraph.
double path_evaluation(const RootedGraph& g, const Potential& xi, const VertexPath& path,
                       double gamma);

/// Same expectation by sampling the holding times of the fixed jump chain.
MonteCarloEstimate path_evaluation_mc(const RootedGraph& g, const Potential& xi,
                                      const VertexPath& path, double gamma, std::size_t n,
                                      std::uint64_t seed);

struct ExcursionDecomposition {
  std::vector<VertexPath> check;  // start outside D (first one anywhere), end in Pi
  std::vector<VertexPath> hat;    // start in Pi, stay in D before the last point
  VertexPath terminal;            // never in Pi, or length 0 inside D
  std::size_t m = 0;
  std::size_t s = 0;
  std::size_t k = 0;

  /// Check/hat pairs in order followed by the terminal path, glued at shared endpoints.
  VertexPath concatenate() const;
  nlohmann::json to_json() const;
};

/// Splits a path into excursions between Pi and the complement of D. When the
/// path misses Pi: m = 0, s = |pi|, k = M_pi and the whole path is the terminal
/// piece. Counters k use M_pi^{r,eps} with the islands' a_L.
ExcursionDecomposition decompose_excursions(const Potential& xi, const VertexPath& path,
                                            const IslandDecomposition& islands, double epsilon);

struct ExcursionBoundReport {
  std::size_t length = 0;
  std::size_t M = 0;        // low-point count
  double exact = 1.0;       // path_evaluation
  double mc = 1.0;
  double mc_std_error = 0.0;
  double q_A = 0.0;
  double log3_L = 0.0;      // logloglog L_r, clamped at 0
  double c_min = 0.0;       // smallest c for which the bound holds (0 if M = 0)
  double c_reference = 0.0; // log(max(1, 2 d_max / (q_A eps rho)))
  double bound = 1.0;       // with c_reference
  bool satisfied = false;   // exact <= bound
  bool mc_consistent = false;  // mc <= bound + 3 std errors

  nlohmann::json to_json() const;
};

/// Conditional excursion mass against q_A^l e^{(c - logloglog L_r) M}.
/// Throws PreconditionViolated if the path visits Pi before its last point or
/// gamma <= a_L - A.
ExcursionBoundReport excursion_bound_check(const RootedGraph& g, const Potential& xi,
                                           const IslandDecomposition& islands,
                                           const VertexPath& path, double gamma,
                                           const LandscapeConfig& cfg, std::size_t n_mc,
                                           std::uint64_t seed);

struct ExitMassReport {
  double exact = 0.0;  // from the linear system (gamma - H_Lambda) w = out-degree
  double mc = 0.0;
  double mc_std_error = 0.0;
  double lambda = 0.0;
  double bound = 0.0;  // 1 + d_max |Lambda| / (gamma - lambda)
  bool satisfied = false;

  nlohmann::json to_json() const;
};

/// E_y[exp(int_0^tau (xi - gamma))] up to the exit time of Lambda. Throws
/// PreconditionViolated if gamma <= lambda_Lambda, DomainTooLarge.
ExitMassReport exit_mass_check(const RootedGraph& g, const Potential& xi,
                               std::span<const VertexId> Lambda, VertexId y, double gamma,
                               std::size_t n_mc, std::uint64_t seed);

struct SolutionBoundsReport {
  double lower = 0.0;       // e^{t lambda} phi(y)^2
  double at_y = 0.0;        // u(y, t), spectral
  double survival = 0.0;    // sum_x u(x, t), spectral
  double at_y_mc = 0.0;
  double at_y_se = 0.0;
  double survival_mc = 0.0;
  double survival_se = 0.0;
  double upper = 0.0;       // e^{t lambda} |Lambda|^{1/2}
  bool holds_exact = false;  // tolerance 1e-9 relative
  bool holds_mc = false;     // each link within 3 std errors

  nlohmann::json to_json() const;
};

/// The chain e^{t lambda} phi(y)^2 <= E[.., X_t = y] <= E[..] <= e^{t lambda}|Lambda|^{1/2}
/// with dense spectral values and Monte Carlo estimates (n_mc = 0 skips MC).
/// Throws DomainTooLarge, InvalidInput.
SolutionBoundsReport lemma21_sandwich(const RootedGraph& g, const Potential& xi,
                                      std::span<const VertexId> Lambda, VertexId y, double t,
                                      std::size_t n_mc, std::uint64_t seed);

}  // namespace pam
