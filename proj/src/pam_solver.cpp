#include "pam/pam_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "pam/error.hpp"
#include "pam/format.hpp"
#include "pam/parallel.hpp"
#include "pam/rng.hpp"
#include "pam/spectral.hpp"

namespace pam {

namespace {

// expm1(z)/z with the removable singularity at 0.
double phi1(double z) { return std::abs(z) < 1e-12 ? 1.0 + 0.5 * z : std::expm1(z) / z; }

MonteCarloEstimate summarize(const std::vector<double>& w) {
  MonteCarloEstimate e;
  e.n = w.size();
  if (w.empty()) return e;
  double sum = 0.0;
  for (double x : w) sum += x;
  e.estimate = sum / static_cast<double>(w.size());
  if (w.size() > 1) {
    double ss = 0.0;
    for (double x : w) ss += (x - e.estimate) * (x - e.estimate);
    e.std_error = std::sqrt(ss / static_cast<double>(w.size() - 1) / static_cast<double>(w.size()));
  }
  return e;
}

bool leq(double a, double b, double rel) { return a <= b + rel * std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace

std::string MassCurve::to_csv() const {
  std::ostringstream out;
  out << "t,U,logU_over_t,stderr,truncation_radius,logU,error_estimate,boundary_mass\n";
  for (std::size_t i = 0; i < times.size(); ++i)
    out << format_double(times[i]) << ',' << format_double(U[i]) << ','
        << format_double(logU_over_t[i]) << ',' << format_double(std_error[i]) << ','
        << truncation_radius << ',' << format_double(logU[i]) << ','
        << format_double(error_estimate[i]) << ',' << format_double(boundary_mass[i]) << '\n';
  return out.str();
}

nlohmann::json MassCurve::to_json() const {
  return {{"times", times},
          {"U", U},
          {"logU", logU},
          {"logU_over_t", logU_over_t},
          {"error_estimate", error_estimate},
          {"boundary_mass", boundary_mass},
          {"std_error", std_error},
          {"truncation_radius", truncation_radius},
          {"domain_size", domain_size}};
}

void SolverConfig::validate() const {
  if (!(c > 0.0)) throw Error(ErrorCode::InvalidInput, "truncation constant must be positive");
  if (r_min < 0) throw Error(ErrorCode::InvalidInput, "r_min must be >= 0");
  if (krylov_dim < 2) throw Error(ErrorCode::InvalidInput, "krylov_dim must be >= 2");
  if (!(rel_tol > 0.0)) throw Error(ErrorCode::InvalidInput, "rel_tol must be positive");
  if (vertex_budget == 0 || n_paths == 0) throw Error(ErrorCode::InvalidInput, "budgets must be positive");
}

nlohmann::json SolverConfig::to_json() const {
  return {{"method", method == Method::Deterministic ? "deterministic" : "feynman-kac"},
          {"c", c},
          {"r_min", r_min},
          {"whole_graph", whole_graph},
          {"krylov_dim", krylov_dim},
          {"rel_tol", rel_tol},
          {"vertex_budget", vertex_budget},
          {"n_paths", n_paths},
          {"seed", seed}};
}

int truncation_radius(double t, double c, int r_min) {
  if (t <= 1.0) return r_min;
  return std::max(static_cast<int>(std::ceil(c * t * std::log(t))), r_min);
}

std::vector<double> geometric_grid(double t_min, double ratio, std::size_t count) {
  if (!(t_min > 0.0) || !(ratio > 1.0)) throw Error(ErrorCode::InvalidInput, "need t_min > 0, ratio > 1");
  std::vector<double> t(count);
  for (std::size_t k = 0; k < count; ++k) t[k] = t_min * std::pow(ratio, static_cast<double>(k));
  return t;
}

MassCurve total_mass_deterministic(const RootedGraph& g, const Potential& xi,
                                   std::span<const double> t_grid, const SolverConfig& cfg) {
  cfg.validate();
  if (t_grid.empty()) throw Error(ErrorCode::InvalidInput, "empty time grid");
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    if (!(t_grid[i] >= 0.0) || (i > 0 && t_grid[i] < t_grid[i - 1]))
      throw Error(ErrorCode::InvalidInput, "times must be nonnegative and nondecreasing");
  if (xi.size() < g.size()) throw Error(ErrorCode::InvalidInput, "potential shorter than graph");

  MassCurve curve;
  const int ell = truncation_radius(t_grid.back(), cfg.c, cfg.r_min);
  const int ecc = g.eccentricity(g.root());
  const bool whole = cfg.whole_graph || ecc <= ell;
  curve.truncation_radius = whole ? -1 : ell;
  const Ball b = ball(g, g.root(), whole ? ecc : ell);
  if (b.size() > cfg.vertex_budget)
    throw Error(ErrorCode::BudgetExceeded, "truncated ball has " + std::to_string(b.size()) +
                                               " vertices, budget " + std::to_string(cfg.vertex_budget));
  const Hamiltonian h = assemble(g, b.members, xi.values);
  curve.domain_size = h.size();

  const auto n = static_cast<Eigen::Index>(h.size());
  const double sigma = h.max_q();
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = h.out_degree()[static_cast<std::size_t>(i)];
  const bool leaks = out.sum() > 0;

  // u(t) = exp(sigma t + log_scale) v with |v| = 1; K = exp(sigma t + log_scale) k_tilde.
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v(0) = 1.0;  // the root is first in BFS order
  double log_scale = 0.0, k_tilde = 0.0, t_cur = 0.0, tau_try = 1.0;
  const Eigen::Index m = std::min<Eigen::Index>(cfg.krylov_dim, n);
  Eigen::MatrixXd V(n, m + 1);
  Eigen::VectorXd alpha(m), beta(m), w(n);

  auto record = [&](double t) {
    const double mass = v.sum();
    const double logU = sigma * t + log_scale + std::log(mass);
    curve.times.push_back(t);
    curve.logU.push_back(logU);
    curve.U.push_back(std::exp(logU));
    curve.logU_over_t.push_back(t > 0 ? logU / t : 0.0);
    curve.error_estimate.push_back(leaks ? std::log1p(k_tilde / mass) : 0.0);
    double edge = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (out(i) > 0) edge += v(i);
    curve.boundary_mass.push_back(edge / mass);
    curve.std_error.push_back(0.0);
  };

  for (double T : t_grid) {
    while (t_cur < T) {
      // Lanczos basis of H - sigma from v; independent of the step length.
      V.col(0) = v;
      Eigen::Index k = m;
      double h_next = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        h.apply(V.col(j).data(), w.data());
        w -= sigma * V.col(j);
        alpha(j) = V.col(j).dot(w);
        w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
        beta(j) = w.norm();
        if (beta(j) <= 1e-12 * (std::abs(alpha(j)) + 1.0)) {
          k = j + 1;
          h_next = 0.0;
          break;
        }
        if (j + 1 < m) {
          V.col(j + 1) = w / beta(j);
        } else {
          h_next = beta(j);
        }
      }
      Eigen::VectorXd theta;
      Eigen::MatrixXd Q;
      if (k == 1) {
        theta = Eigen::VectorXd::Constant(1, alpha(0));
        Q = Eigen::MatrixXd::Ones(1, 1);
      } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
        tri.computeFromTridiagonal(alpha.head(k), beta.head(k - 1));
        theta = tri.eigenvalues();
        Q = tri.eigenvectors();
      }
      const Eigen::VectorXd q0 = Q.row(0).transpose();
      double tau = std::min(tau_try, T - t_cur);
      Eigen::VectorXd y;
      double err = 0.0;
      for (;;) {
        y = Q * (theta.array() * tau).exp().matrix().cwiseProduct(q0);
        Eigen::VectorXd p1(k);
        for (Eigen::Index j = 0; j < k; ++j) p1(j) = phi1(tau * theta(j)) * q0(j);
        err = tau * h_next * std::abs((Q * p1)(k - 1));
        if (err <= cfg.rel_tol * y.norm()) break;
        tau *= 0.5;
        if (tau < 1e-13 * std::max(1.0, T))
          throw Error(ErrorCode::StepControlFailure,
                      "Krylov step collapsed at t = " + format_double(t_cur));
      }
      if (leaks) {
        const Eigen::VectorXd c = (Q.transpose() * (V.leftCols(k).transpose() * out)).cwiseProduct(q0);
        for (Eigen::Index j = 0; j < k; ++j) k_tilde += c(j) * tau * phi1(tau * theta(j));
      }
      w = V.leftCols(k) * y;
      const double norm = w.norm();
      log_scale += std::log(norm);
      v = w / norm;
      k_tilde /= norm;
      const bool clipped = tau == T - t_cur;
      t_cur = clipped ? T : t_cur + tau;
      if (!clipped || tau >= tau_try) tau_try = err < 0.1 * cfg.rel_tol ? 2.0 * tau : tau;
    }
    record(T);
  }
  return curve;
}

MonteCarloEstimate total_mass_feynman_kac(const RootedGraph& g, const Potential& xi, double t,
                                          std::size_t n_paths, std::uint64_t seed) {
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidInput, "t must be >= 0");
  if (n_paths == 0) throw Error(ErrorCode::InvalidInput, "n_paths must be positive");
  if (xi.size() < g.size()) throw Error(ErrorCode::InvalidInput, "potential shorter than graph");
  const CounterRng base(seed);
  std::vector<double> weights(n_paths);
  parallel_for(n_paths, [&](std::size_t k) {
    CounterRng rng = base.split(k);
    VertexId x = g.root();
    double s = 0.0, integral = 0.0;
    for (;;) {
      const int d = g.degree(x);
      const double hold = d > 0 ? rng.exponential(d) : std::numeric_limits<double>::infinity();
      if (s + hold >= t) {
        integral += xi[x] * (t - s);
        break;
      }
      integral += xi[x] * hold;
      s += hold;
      x = g.neighbors(x)[rng.below(static_cast<std::uint64_t>(d))];
    }
    weights[k] = std::exp(integral);
  });
  return summarize(weights);
}

double path_evaluation(const RootedGraph& g, const Potential& xi, const VertexPath& path,
                       double gamma) {
  validate_path(g, path);
  const std::size_t ell = path.length();
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ell; ++i) {
    const VertexId v = path.vertices[i];
    worst = std::max(worst, xi[v] - g.degree(v));
  }
  if (ell > 0 && !(gamma >= worst + 1e-9))
    throw Error(ErrorCode::GammaTooSmall, "gamma = " + format_double(gamma) +
                                              " must exceed max(xi - deg) = " + format_double(worst));
  double prod = 1.0;
  for (std::size_t i = 0; i < ell; ++i) {
    const VertexId v = path.vertices[i];
    const double d = g.degree(v);
    prod *= d / (gamma - (xi[v] - d));
  }
  return prod;
}

MonteCarloEstimate path_evaluation_mc(const RootedGraph& g, const Potential& xi,
                                      const VertexPath& path, double gamma, std::size_t n,
                                      std::uint64_t seed) {
  validate_path(g, path);
  if (n == 0) throw Error(ErrorCode::InvalidInput, "sample count must be positive");
  const CounterRng base(seed);
  std::vector<double> w(n);
  parallel_for(n, [&](std::size_t k) {
    CounterRng rng = base.split(k);
    double e = 0.0;
    for (std::size_t i = 0; i < path.length(); ++i) {
      const VertexId v = path.vertices[i];
      e += (xi[v] - gamma) * rng.exponential(g.degree(v));
    }
    w[k] = std::exp(e);
  });
  return summarize(w);
}

VertexPath ExcursionDecomposition::concatenate() const {
  VertexPath out;
  auto glue = [&out](const VertexPath& p) {
    if (p.vertices.empty()) return;
    const std::size_t skip = out.vertices.empty() ? 0 : 1;
    out.vertices.insert(out.vertices.end(), p.vertices.begin() + static_cast<std::ptrdiff_t>(skip),
                        p.vertices.end());
  };
  for (std::size_t i = 0; i < check.size(); ++i) {
    glue(check[i]);
    if (i < hat.size()) glue(hat[i]);
  }
  glue(terminal);
  return out;
}

nlohmann::json ExcursionDecomposition::to_json() const {
  auto paths = [](const std::vector<VertexPath>& ps) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : ps) a.push_back(p.vertices);
    return a;
  };
  return {{"check", paths(check)}, {"hat", paths(hat)}, {"terminal", terminal.vertices},
          {"m", m},                {"s", s},            {"k", k}};
}

ExcursionDecomposition decompose_excursions(const Potential& xi, const VertexPath& path,
                                            const IslandDecomposition& islands, double epsilon) {
  if (path.vertices.empty()) throw Error(ErrorCode::PathNotInGraph, "empty path");
  const auto& p = path.vertices;
  const std::size_t last = p.size() - 1;
  auto slice = [&p](std::size_t a, std::size_t b) {
    return VertexPath{std::vector<VertexId>(p.begin() + static_cast<std::ptrdiff_t>(a),
                                            p.begin() + static_cast<std::ptrdiff_t>(b) + 1)};
  };
  auto low = [&](const VertexPath& piece) {
    return low_point_count(xi, piece, islands.a_L, epsilon);
  };
  ExcursionDecomposition d;
  std::size_t i = 0;
  for (;;) {
    std::size_t j = i;
    while (j <= last && !islands.in_Pi(p[j])) ++j;
    if (j > last) {
      d.terminal = slice(i, last);
      break;
    }
    d.check.push_back(slice(i, j));
    std::size_t k = j;
    while (k <= last && islands.in_D(p[k])) ++k;
    if (k > last) {
      d.hat.push_back(slice(j, last));
      d.terminal = slice(last, last);
      break;
    }
    d.hat.push_back(slice(j, k));
    i = k;
  }
  d.m = d.check.size();
  if (d.m == 0) {
    d.s = path.length();
    d.k = low(path);
    return d;
  }
  for (const auto& c : d.check) {
    d.s += c.length();
    d.k += low(c);
  }
  d.s += d.terminal.length();
  d.k += low(d.terminal);
  return d;
}

nlohmann::json ExcursionBoundReport::to_json() const {
  return {{"length", length}, {"M", M},
          {"exact", exact},   {"mc", mc},
          {"mc_std_error", mc_std_error}, {"q_A", q_A},
          {"log3_L", log3_L}, {"c_min", c_min},
          {"c_reference", c_reference}, {"bound", bound},
          {"satisfied", satisfied}, {"mc_consistent", mc_consistent}};
}

ExcursionBoundReport excursion_bound_check(const RootedGraph& g, const Potential& xi,
                                           const IslandDecomposition& islands,
                                           const VertexPath& path, double gamma,
                                           const LandscapeConfig& cfg, std::size_t n_mc,
                                           std::uint64_t seed) {
  cfg.validate();
  validate_path(g, path);
  const std::size_t ell = path.length();
  for (std::size_t i = 0; i < ell; ++i)
    if (islands.in_Pi(path.vertices[i]))
      throw Error(ErrorCode::PreconditionViolated, "path visits Pi before its last point");
  if (!(gamma > islands.a_L - cfg.A))
    throw Error(ErrorCode::PreconditionViolated, "gamma must exceed a_L - A");

  ExcursionBoundReport r;
  r.length = ell;
  r.M = low_point_count(xi, path, islands.a_L, cfg.epsilon);
  r.exact = path_evaluation(g, xi, path, gamma);
  if (n_mc > 0 && ell > 0) {
    const auto e = path_evaluation_mc(g, xi, path, gamma, n_mc, seed);
    r.mc = e.estimate;
    r.mc_std_error = e.std_error;
  } else {
    r.mc = r.exact;
  }
  const double dmax = g.d_max();
  r.q_A = 1.0 / (1.0 + cfg.A / dmax);
  const double L = static_cast<double>(islands.L_r);
  const double ll = L > 1.0 ? std::log(std::log(L)) : 0.0;
  r.log3_L = ll > 1.0 ? std::log(ll) : 0.0;
  r.c_reference = std::log(std::max(1.0, 2.0 * dmax / (r.q_A * cfg.epsilon * xi.rho)));
  const double log_base = static_cast<double>(ell) * std::log(r.q_A);
  const double M = static_cast<double>(r.M);
  r.c_min = r.M > 0 ? (std::log(r.exact) - log_base) / M + r.log3_L : 0.0;
  r.bound = std::exp(log_base + (r.c_reference - r.log3_L) * M);
  r.satisfied = leq(r.exact, r.bound, 1e-12);
  r.mc_consistent = r.mc <= r.bound + 3.0 * r.mc_std_error + 1e-12 * r.bound;
  return r;
}

nlohmann::json ExitMassReport::to_json() const {
  return {{"exact", exact},   {"mc", mc},       {"mc_std_error", mc_std_error},
          {"lambda", lambda}, {"bound", bound}, {"satisfied", satisfied}};
}

ExitMassReport exit_mass_check(const RootedGraph& g, const Potential& xi,
                               std::span<const VertexId> Lambda, VertexId y, double gamma,
                               std::size_t n_mc, std::uint64_t seed) {
  const Hamiltonian h = assemble(g, Lambda, xi.values);
  if (h.size() > kDenseLimit) throw Error(ErrorCode::DomainTooLarge, "domain too large for a dense solve");
  const auto y_local = h.local_index(y);
  if (y_local < 0) throw Error(ErrorCode::InvalidInput, "start vertex not in domain");
  ExitMassReport r;
  r.lambda = principal_eigenpair(h).lambda;
  if (!(gamma > r.lambda)) throw Error(ErrorCode::PreconditionViolated, "gamma must exceed lambda_Lambda");
  const auto n = static_cast<Eigen::Index>(h.size());
  Eigen::MatrixXd A = -h.dense();
  A.diagonal().array() += gamma;
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = h.out_degree()[static_cast<std::size_t>(i)];
  const Eigen::VectorXd w = A.ldlt().solve(out);
  r.exact = w(y_local);
  r.bound = 1.0 + g.d_max() * static_cast<double>(n) / (gamma - r.lambda);
  r.satisfied = leq(r.exact, r.bound, 1e-9);
  if (n_mc > 0) {
    const CounterRng base(seed);
    std::vector<double> weights(n_mc);
    parallel_for(n_mc, [&](std::size_t k) {
      CounterRng rng = base.split(k);
      VertexId x = y;
      double e = 0.0;
      for (;;) {
        const int d = g.degree(x);
        if (d == 0 || e < -60.0) {  // never exits, or weight below e^-60
          e = -std::numeric_limits<double>::infinity();
          break;
        }
        e += (xi[x] - gamma) * rng.exponential(d);
        x = g.neighbors(x)[rng.below(static_cast<std::uint64_t>(d))];
        if (h.local_index(x) < 0) break;
      }
      weights[k] = std::exp(e);
    });
    const auto s = summarize(weights);
    r.mc = s.estimate;
    r.mc_std_error = s.std_error;
  }
  return r;
}

nlohmann::json SolutionBoundsReport::to_json() const {
  return {{"lower", lower},           {"at_y", at_y},           {"survival", survival},
          {"at_y_mc", at_y_mc},       {"at_y_se", at_y_se},     {"survival_mc", survival_mc},
          {"survival_se", survival_se}, {"upper", upper},       {"holds_exact", holds_exact},
          {"holds_mc", holds_mc}};
}

SolutionBoundsReport lemma21_sandwich(const RootedGraph& g, const Potential& xi,
                                      std::span<const VertexId> Lambda, VertexId y, double t,
                                      std::size_t n_mc, std::uint64_t seed) {
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidInput, "t must be positive");
  const Hamiltonian h = assemble(g, Lambda, xi.values);
  const auto y_local = h.local_index(y);
  if (y_local < 0) throw Error(ErrorCode::InvalidInput, "start vertex not in domain");
  const Spectrum s = full_spectrum(h);
  const auto top = s.values.size() - 1;
  const double lambda = s.values(top);
  const double phi_y = s.vectors(y_local, top);
  SolutionBoundsReport r;
  r.lower = std::exp(t * lambda) * phi_y * phi_y;
  const Eigen::VectorXd u = spectral_solution(h, static_cast<std::size_t>(y_local), t);
  r.at_y = u(y_local);
  r.survival = u.sum();
  r.upper = std::exp(t * lambda) * std::sqrt(static_cast<double>(h.size()));
  r.holds_exact = leq(r.lower, r.at_y, 1e-9) && leq(r.at_y, r.survival, 1e-9) &&
                  leq(r.survival, r.upper, 1e-9);
  if (n_mc == 0) return r;
  const CounterRng base(seed);
  std::vector<double> at(n_mc), alive(n_mc);
  parallel_for(n_mc, [&](std::size_t k) {
    CounterRng rng = base.split(k);
    VertexId x = y;
    double clock = 0.0, integral = 0.0;
    bool killed = false;
    for (;;) {
      const int d = g.degree(x);
      const double hold = d > 0 ? rng.exponential(d) : std::numeric_limits<double>::infinity();
      if (clock + hold >= t) {
        integral += xi[x] * (t - clock);
        break;
      }
      integral += xi[x] * hold;
      clock += hold;
      x = g.neighbors(x)[rng.below(static_cast<std::uint64_t>(d))];
      if (h.local_index(x) < 0) {
        killed = true;
        break;
      }
    }
    const double w = killed ? 0.0 : std::exp(integral);
    alive[k] = w;
    at[k] = x == y ? w : 0.0;
  });
  const auto a = summarize(at), b = summarize(alive);
  r.at_y_mc = a.estimate;
  r.at_y_se = a.std_error;
  r.survival_mc = b.estimate;
  r.survival_se = b.std_error;
  r.holds_mc = r.lower <= r.at_y_mc + 3.0 * r.at_y_se + 1e-12 &&
               r.at_y_mc <= r.survival_mc + 1e-12 &&
               r.survival_mc <= r.upper + 3.0 * r.survival_se + 1e-12;
  return r;
}

}  // namespace pam
