#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pam/graph.hpp"
#include "pam/random_graphs.hpp"

namespace pam {

/// Stand-in for q = -inf in dual potentials, in units of rho.
inline constexpr double kMinusInfinityScale = -1e6;

/// I_E(p) = sum over edges of (sqrt p(x) - sqrt p(y))^2; p indexed by vertex.
double I_functional(const RootedGraph& g, std::span<const double> p);

/// -sum p log p with 0 log 0 = 0.
double J_functional(std::span<const double> p);

struct ChiOptions {
  int restarts = 8;          // multistart count, >= 1
  double grad_tol = 1e-9;    // primal: Riemannian gradient norm
  double dual_tol = 1e-13;   // dual: change of lambda between sweeps
  int max_iter = 100000;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

struct ChiResult {
  double value = 0.0;
  std::string method;              // "primal", "dual", "boundary"
  std::vector<VertexId> domain;
  std::vector<double> p;           // minimizing measure per domain position
  std::vector<double> q;           // dual only: maximizing potential
  int iterations = 0;              // of the best start
  double residual = 0.0;
  int restarts = 0;

  nlohmann::json to_json() const;
};

/// inf over p supported in Lambda of I_E(p) + rho J(p), with I_E summed over
/// all edges of g (edges leaving Lambda count p(x)). Riemannian gradient
/// descent in s = sqrt p on the unit sphere with Barzilai-Borwein steps and a
/// nonmonotone Armijo test; best of several starts. Throws NoConvergence.
ChiResult chi_primal(const RootedGraph& g, std::span<const VertexId> Lambda, double rho,
                     const ChiOptions& opts = {});
ChiResult chi_primal(const RootedGraph& g, double rho, const ChiOptions& opts = {});

/// -sup { lambda_Lambda(q) : sum_V e^{q/rho} <= 1 }. Self-consistent ascent
/// q <- rho log phi^2, which keeps sum e^{q/rho} = 1 and never lowers lambda;
/// best of several starts. Throws NoConvergence.
ChiResult chi_dual(const RootedGraph& g, std::span<const VertexId> Lambda, double rho,
                   const ChiOptions& opts = {});

/// Gradient of F(s) = s^T K s - rho sum s^2 log s^2 on the domain, K = -H(0).
std::vector<double> primal_gradient(const RootedGraph& g, std::span<const VertexId> Lambda,
                                    double rho, std::span<const double> s);
double primal_objective(const RootedGraph& g, std::span<const VertexId> Lambda, double rho,
                        std::span<const double> s);

/// chi with p(x) = b. b = 1 gives deg(x); b < 1 on a one-vertex graph is +inf.
/// Throws InfeasibleBoundary unless 0 <= b <= 1.
double chi_boundary(const RootedGraph& g, VertexId x, double b, double rho,
                    const ChiOptions& opts = {});

struct BallSequence {
  std::vector<int> radii;
  std::vector<double> values;
  std::vector<std::size_t> sizes;
  double limit = 0.0;        // extrapolated from the last three values
  double uncertainty = 0.0;  // last decrement
  bool monotone = true;      // non-increasing within 1e-9

  nlohmann::json to_json() const;
};

/// chi_dual on B_r(root) for each r, the tree realized one level deeper so
/// that boundary degrees are exact. Throws BudgetExceeded.
BallSequence chi_ball_sequence(const TreeSpec& tree, double rho, std::span<const int> radii,
                               const ChiOptions& opts = {},
                               std::size_t vertex_budget = kDefaultVertexBudget);
/// Same on an already realized graph (caller guarantees depth > max radius).
BallSequence chi_ball_sequence(const RootedGraph& g, double rho, std::span<const int> radii,
                               const ChiOptions& opts = {});

/// Geometric extrapolation: with ratio q = d_last / d_prev in (0,1) the limit is
/// last + d_last q / (1 - q); otherwise the last value. Uncertainty |d_last|.
std::pair<double, double> extrapolate_limit(std::span<const double> values);

struct Component {
  RootedGraph graph;
  VertexId y = 0;  // vertex joined to the new hub
};

struct GridOptions {
  int points = 33;
  int refinements = 2;
  double gap_tol = 1e-3;
  ChiOptions chi;
};

struct GlueFormulaResult {
  double value = 0.0;            // formula minimum after polishing
  double coarse = 0.0;           // value per grid level
  std::vector<double> levels;
  double gap = 0.0;              // |last level - previous level|
  std::vector<double> a;         // optimal masses per component
  std::vector<double> v;         // optimal boundary values c_i / a_i
  std::size_t boundary_evaluations = 0;

  nlohmann::json to_json() const;
};

/// Minimum over a_i, c_i of the glue-many-plus-vertex expression, with
/// chi^{(y_i, v)} from chi_boundary. Nested grid search with local refinement
/// and a final coordinate polish. Throws GridTooCoarse when the gap between the
/// last two grid levels exceeds gap_tol, InvalidInput for k outside 1..2.
GlueFormulaResult glue_formula_A4(const std::vector<Component>& components, double rho,
                                  const GridOptions& opts = {});

/// Star graph: components plus a hub joined to each y_i (the hub is the root).
RootedGraph glue_components(const std::vector<Component>& components);

struct GlueTwoReport {
  double chi1 = 0.0, chi2 = 0.0, chi_glued = 0.0;
  bool holds = false;  // chi_glued >= min(chi1, chi2) - 1e-6

  nlohmann::json to_json() const;
};

GlueTwoReport glue_inequality_A3(const RootedGraph& g1, VertexId x1, const RootedGraph& g2,
                                 VertexId x2, double rho, const ChiOptions& opts = {});

struct PropagationReport {
  bool rho_condition = false;   // rho >= C / log(k + 1)
  double inf_without_one = 0.0; // inf_j chi(G-bar^j_k)
  double inf_boundary = 0.0;    // inf_j inf_v chi^{(y_j, v)} = inf_j chi(G_j)
  bool hypotheses = false;
  double chi_full = 0.0;        // chi(G-bar_{k+1})
  bool conclusion = false;      // chi_full >= M - 1e-6
  bool implication_holds = false;

  nlohmann::json to_json() const;
};

/// Instance check of the propagation-of-lower-bounds implication for k + 1
/// components (at least 2).
PropagationReport propagation_check_A6(const std::vector<Component>& components, double rho,
                                       double M, double C, const ChiOptions& opts = {});

struct CatalogRow {
  std::size_t id = 0;
  std::string kind;  // "minimal", "gw", "glued"
  std::string code;  // canonical code of B_r
  std::size_t ball_size = 0;
  double chi = 0.0;
  double gap_to_min = 0.0;  // chi - chi(T_dmin)
};

struct Theorem12Report {
  int d_min = 0;
  std::vector<int> degree_set;
  double rho = 0.0;
  int r = 0;
  bool large_rho = false;  // rho >= 1 / log(d_min + 1)
  std::vector<CatalogRow> rows;
  std::size_t argmin = 0;
  bool minimal_is_min = false;  // every row >= row 0 - tol
  double tol = 1e-4;
  double half_tree = 0.0;   // chi-hat_{B_r} of the half tree
  double full_tree = 0.0;   // chi-hat_{B_r} of T_dmin
  bool a9_lower = false;    // half <= full
  bool a9_upper = false;    // full <= half + 1
  std::vector<std::string> warnings;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// Catalog of trees with degrees in degree_set; row 0 is T_dmin, then
/// Galton-Watson trees with uniform degrees and glued trees (T_dmin with extra
/// half-tree copies). Each is compared through chi-hat on B_r. Outside the
/// large-rho regime the report carries a warning and asserts nothing.
Theorem12Report theorem12_check(int d_min, const std::vector<int>& degree_set, double rho, int r,
                                std::size_t catalog_size, std::uint64_t seed,
                                const ChiOptions& opts = {});

struct SandwichA9 {
  double half_tree = 0.0, full_tree = 0.0;
  bool lower = false, upper = false;
};

/// chi-hat_{B_r} of the half tree and of T_d, and the two a priori inequalities (slack 1e-9).
SandwichA9 a9_sandwich(int d, int r, double rho, const ChiOptions& opts = {});

}  // namespace pam
