#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pam/graph.hpp"
#include "pam/pam_solver.hpp"
#include "pam/potential.hpp"
#include "pam/random_graphs.hpp"
#include "pam/variational.hpp"

namespace pam {

enum class ExperimentKind { LyapunovGW, LyapunovCM, ChiCatalog, Islands, Coupling, LowerBoundCertificate };

std::string_view to_string(ExperimentKind kind);
/// Throws InvalidInput for unknown names.
ExperimentKind experiment_kind_from_string(std::string_view name);

/// One batch run. Fields not used by a kind are still validated and echoed in
/// the resolved config, so a report fully determines its own rerun.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::LyapunovGW;
  DegreeLaw degree_law = DegreeLaw::constant(3);  // D_g, or the limit law of the CM sequence
  std::optional<DegreeLaw> root_law;              // GW root law; defaults to degree_law
  std::size_t n = 10000;                          // CM vertex count
  int radius = 10;        // islands: ball radius; catalog: r; certificate: search radius l
  int profile_radius = 1; // certificate: R
  double rho = 1.0;
  LandscapeConfig landscape;
  std::vector<double> times{1.0, 2.0, 4.0, 8.0};
  std::vector<int> chi_radii{1, 2, 3, 4, 5, 6};  // balls used for the chi-tilde estimate
  std::size_t seeds = 20;
  std::uint64_t seed = 0;
  SolverConfig solver;
  ChiOptions chi;
  std::size_t catalog_size = 20;
  int coupling_radius = 2;
  std::size_t trials = 500;
  double eps = 0.5;              // islands: slack in the eigenvalue bound; certificate: epsilon in s
  double regime_fraction = 0.5;  // CM: warn when t log t exceeds this fraction of log Phi_n
  std::size_t planted = 0;       // certificate: the first `planted` instances get a planted profile
  std::string output_dir;

  /// Throws InvalidInput with the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  /// Unknown keys are rejected; missing keys keep their defaults.
  static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Everything a run emits. `report` embeds the resolved config.
struct RunOutput {
  nlohmann::json report;
  std::string csv;                           // data.csv
  std::map<std::string, std::string> plots;  // file name -> two-column .dat text
  bool property_violation = false;
};

/// Writes data.csv, report.json, config.resolved.json and the .dat files into
/// `dir` (created if needed).
void write_run(const RunOutput& out, const ExperimentConfig& cfg, const std::string& dir);

/// report.json text as written by write_run.
std::string serialize_report(const RunOutput& out);

/// Dispatches on cfg.kind.
RunOutput run_experiment(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Lyapunov exponents.

/// loglog t for t > e, else 1 (keeps the theory curve finite for small t).
double loglog_clamped(double t);

/// rho log(rho theta t / loglog t) - rho.
double theory_leading(double rho, double theta, double t);

struct LyapunovRow {
  double t = 0.0;
  double simulated_mean = 0.0;    // mean over seeds of (1/t) log U(t)
  double simulated_std = 0.0;     // sample standard deviation over seeds
  double leading = 0.0;           // theory_leading
  double theory = 0.0;            // leading - chi_est
  double residual_mean = 0.0;     // simulated - leading
  double residual_std = 0.0;
  double max_error_estimate = 0.0;
};

struct LyapunovReport {
  std::string graph;  // "gw" or "cm"
  double rho = 0.0;
  double theta = 0.0;
  double chi_est = 0.0;
  double chi_uncertainty = 0.0;
  BallSequence chi_sequence;
  std::vector<LyapunovRow> rows;
  std::vector<std::vector<double>> per_seed;  // [seed][t index] of (1/t) log U(t)
  std::vector<std::vector<double>> per_seed_error;
  std::vector<std::size_t> graph_sizes;
  std::vector<std::string> warnings;
  std::string caveat;
  bool all_finite = false;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Throws BudgetExceeded, InvalidInput (t <= 0).
LyapunovReport run_lyapunov_gw(const ExperimentConfig& cfg);
/// Regime violations are recorded as warnings, not thrown.
LyapunovReport run_lyapunov_cm(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Lower-bound certificates.

/// Dual potential on B_R of a tree realized to radius R + 1 (root = centre).
struct QProfile {
  RootedGraph tree;
  int R = 0;
  double rho = 1.0;
  std::vector<double> q;  // per tree vertex; vertices outside B_R carry the sentinel
  double lambda = 0.0;    // principal eigenvalue of the tree operator on B_R with q
  double phi_root2 = 0.0; // squared eigenvector entry at the root
  double mass = 0.0;      // sum over B_R of e^{q/rho}

  nlohmann::json to_json() const;
  static QProfile from_json(const nlohmann::json& j);
};

/// Optimal dual potential of chi-hat_{B_R}(tree). Throws InvalidInput if the
/// tree is shallower than R + 1.
QProfile make_profile(const RootedGraph& tree, int R, double rho, const ChiOptions& opts = {});

struct LowerBoundCertificate {
  VertexId z = 0;
  int depth = 0;          // |z|
  int search_radius = 0;  // l
  double depth_ratio = 0.0;  // |z| / l, recorded without asserting a bound
  int R = 0;
  double rho = 0.0;
  std::size_t ball_size = 0;  // |B_l|
  double a = 0.0;             // rho loglog |B_l|
  std::vector<VertexId> path;      // root ... z
  std::vector<int> path_degrees;   // degrees of the path vertices before z
  std::vector<VertexId> ball;      // B_R(z), matched to the profile
  std::vector<double> xi_ball;
  std::vector<double> q_ball;
  double profile_lambda = 0.0;
  double phi_root2 = 0.0;
  double eigen_lower = 0.0;  // a + profile_lambda <= lambda_{B_R(z)}(xi)
  double t = 0.0;
  double s = 0.0;            // time budget for reaching z
  double log_path_probability = 0.0;  // -sum log deg along the path
  double log_time_probability = 0.0;  // log P(Poisson(d_lo s) >= |z|)
  double waiting_bound = 0.0;         // sum of the two
  double bound = 0.0;                 // certified lower bound on (1/t) log U(t)
  // Cross-check against the solver, filled by the caller.
  double simulated = 0.0;
  double solver_error = 0.0;
  bool consistent = false;  // bound <= simulated + solver_error + 1e-6

  nlohmann::json to_json() const;
  static LowerBoundCertificate from_json(const nlohmann::json& j);
};

/// Scans B_l(root) in BFS order for z whose (R+1)-ball is a tree isomorphic to
/// the profile's and on whose R-ball xi >= a + q. The first hit is certified
/// at time t. Throws NotFound with the search coverage.
LowerBoundCertificate find_lower_bound_certificate(const RootedGraph& g, const Potential& xi,
                                                   int search_radius, const QProfile& profile,
                                                   double t, double eps);

/// Recomputes the bound chain from the stored values only: domination on the
/// ball, the waiting-time terms, the final bound. True if all agree to 1e-9.
bool recheck_certificate(const LowerBoundCertificate& c);

/// log P(Poisson(mu) >= k), summed in log space.
double log_poisson_tail(double mu, int k);

// ---------------------------------------------------------------------------
// Other runners.

RunOutput run_chi_catalog(const ExperimentConfig& cfg);
RunOutput run_islands(const ExperimentConfig& cfg);
RunOutput run_coupling(const ExperimentConfig& cfg);
RunOutput run_certificates(const ExperimentConfig& cfg);

}  // namespace pam
