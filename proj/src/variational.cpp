#include "pam/variational.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
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

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<VertexId> all_vertices(const RootedGraph& g) {
  std::vector<VertexId> v(g.size());
  std::iota(v.begin(), v.end(), VertexId{0});
  return v;
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// Minimizes F(s) = -s^T H s - rho sum s^2 log s^2 (H at zero potential) over
// nonnegative s with the fixed coordinates held and |s_free|^2 = radius2.
struct SphereResult {
  std::vector<double> s;
  double value = kInf;
  double grad_norm = kInf;
  int iterations = 0;
  bool converged = false;
};

class SphereProblem {
 public:
  SphereProblem(const Hamiltonian& h, double rho, std::vector<char> free, double radius2)
      : h_(h), rho_(rho), free_(std::move(free)), radius2_(radius2), buf_(h.size()) {}

  double value(const std::vector<double>& s) const {
    h_.apply(s.data(), buf_.data());
    double quad = 0.0, ent = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      quad -= s[i] * buf_[i];
      ent += xlogx(s[i] * s[i]);
    }
    return quad - rho_ * ent;
  }

  void gradient(const std::vector<double>& s, std::vector<double>& g) const {
    h_.apply(s.data(), buf_.data());
    g.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double ent = s[i] > 0.0 ? 2.0 * rho_ * s[i] * (std::log(s[i] * s[i]) + 1.0) : 0.0;
      g[i] = -2.0 * buf_[i] - ent;
    }
  }

  // Tangent projection on the free block; fixed coordinates get zero.
  double project(const std::vector<double>& s, std::vector<double>& g) const {
    double gs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (free_[i]) gs += g[i] * s[i];
    double norm2 = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      g[i] = free_[i] ? g[i] - gs / radius2_ * s[i] : 0.0;
      norm2 += g[i] * g[i];
    }
    return std::sqrt(norm2);
  }

  void retract(std::vector<double>& s) const {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (free_[i]) {
        s[i] = std::abs(s[i]);
        norm2 += s[i] * s[i];
      }
    const double scale = std::sqrt(radius2_ / norm2);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (free_[i]) s[i] *= scale;
  }

  SphereResult run(std::vector<double> s, const ChiOptions& opts) const {
    retract(s);
    SphereResult r;
    std::vector<double> g, g_new, s_new(s.size());
    gradient(s, g);
    double gn = project(s, g);
    double f = value(s);
    std::deque<double> history{f};
    double alpha = 1.0 / std::max(gn, 1.0);
    int it = 0;
    for (; it < opts.max_iter && gn > opts.grad_tol; ++it) {
      const double fmax = *std::max_element(history.begin(), history.end());
      double step = alpha, f_new = kInf;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        for (std::size_t i = 0; i < s.size(); ++i) s_new[i] = s[i] - step * g[i];
        retract(s_new);
        f_new = value(s_new);
        if (f_new <= fmax - 1e-4 * step * gn * gn + 4e-16 * (1.0 + std::abs(fmax))) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      gradient(s_new, g_new);
      const double gn_new = project(s_new, g_new);
      double ss = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double ds = s_new[i] - s[i], dy = g_new[i] - g[i];
        ss += ds * ds;
        sy += ds * dy;
      }
      alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e10) : std::min(2.0 * step, 1e10);
      s.swap(s_new);
      g.swap(g_new);
      gn = gn_new;
      f = f_new;
      history.push_back(f);
      if (history.size() > 10) history.pop_front();
    }
    r.s = std::move(s);
    r.value = value(r.s);
    r.grad_norm = gn;
    r.iterations = it;
    r.converged = gn <= opts.grad_tol;
    return r;
  }

 private:
  const Hamiltonian& h_;
  double rho_;
  std::vector<char> free_;
  double radius2_;
  mutable std::vector<double> buf_;
};

void check_rho(double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw Error(ErrorCode::InvalidInput, "rho must be positive");
}

Hamiltonian zero_potential(const RootedGraph& g, std::span<const VertexId> Lambda) {
  return Hamiltonian(g, std::vector<VertexId>(Lambda.begin(), Lambda.end()),
                     std::vector<double>(Lambda.size(), 0.0));
}

// Best of the multistart runs; NoConvergence if none reaches a small gradient.
SphereResult best_sphere(const SphereProblem& prob, const std::vector<std::vector<double>>& starts,
                         const ChiOptions& opts, int& used) {
  SphereResult best;
  used = 0;
  for (const auto& p : starts) {
    std::vector<double> s(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) s[i] = std::sqrt(p[i]);
    auto r = prob.run(std::move(s), opts);
    ++used;
    const bool better = (r.converged && !best.converged) ||
                        (r.converged == best.converged && r.value < best.value);
    if (better) best = std::move(r);
  }
  if (!best.converged && !(best.grad_norm <= 1e3 * opts.grad_tol))
    throw Error(ErrorCode::NoConvergence, "primal descent stalled at value " + format_double(best.value) +
                                              " with gradient " + format_double(best.grad_norm));
  return best;
}

// Local optimum of the problem restricted to the radius-2 neighbourhood of
// `centre` (radius 1 if that is too large), as a measure on the full domain.
struct LocalCandidate {
  double value = kInf;
  std::size_t peak = 0;
  std::vector<double> p;
};

LocalCandidate screen_centre(const Hamiltonian& h, const std::vector<char>& free, std::size_t centre,
                             double rho) {
  constexpr std::size_t kMaxLocal = 64;
  std::vector<std::size_t> local{centre}, frontier{centre};
  std::vector<char> seen(h.size(), 0);
  seen[centre] = 1;
  for (int depth = 0; depth < 2; ++depth) {
    std::vector<std::size_t> next;
    for (auto i : frontier)
      for (auto j : h.local_neighbors(i))
        if (free[j] && !seen[j]) {
          seen[j] = 1;
          next.push_back(j);
        }
    if (depth > 0 && local.size() + next.size() > kMaxLocal) break;
    local.insert(local.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  const Hamiltonian sub = h.restricted(local);
  const std::size_t m = local.size();
  SphereProblem prob(sub, rho, std::vector<char>(m, 1), 1.0);
  std::vector<double> s(m, std::sqrt(0.5 / static_cast<double>(m)));
  s[0] = std::sqrt(0.5 + 0.5 / static_cast<double>(m));
  ChiOptions o;
  o.grad_tol = 1e-6;
  o.max_iter = 500;
  const SphereResult r = prob.run(std::move(s), o);
  LocalCandidate c;
  c.value = r.value;
  c.p.assign(h.size(), 0.0);
  double top = -1.0;
  for (std::size_t k = 0; k < m; ++k) {
    c.p[local[k]] = r.s[k] * r.s[k];
    if (c.p[local[k]] > top) {
      top = c.p[local[k]];
      c.peak = local[k];
    }
  }
  return c;
}

// Positive start measures on the domain: uniform, then the best localized
// candidates (one per peak vertex), mixes centred on the first domain vertex
// and on high- and low-degree vertices, then Dirichlet(1) draws. The optimum
// is localized, so on large domains the screened candidates matter most.
std::vector<std::vector<double>> start_measures(const Hamiltonian& h, const std::vector<char>& free,
                                                double rho, int count, std::uint64_t seed) {
  constexpr std::size_t kScreenFrom = 24, kMaxScreened = 512;
  const std::size_t n = h.size();
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i)
    if (free[i]) idx.push_back(i);
  std::vector<std::vector<double>> starts;
  if (idx.empty()) return starts;
  auto mix = [&](std::size_t centre) {
    std::vector<double> p(n, 0.0);
    for (auto i : idx) p[i] = 0.5 / static_cast<double>(idx.size());
    p[centre] += 0.5;
    return p;
  };
  std::vector<double> uniform(n, 0.0);
  for (auto i : idx) uniform[i] = 1.0 / static_cast<double>(idx.size());
  starts.push_back(uniform);
  std::vector<std::size_t> by_degree = idx;
  // Fewest escaping edges first: those vertices can hold mass most cheaply.
  std::stable_sort(by_degree.begin(), by_degree.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = h.local_neighbors(a).size(), kb = h.local_neighbors(b).size();
    if (ka != kb) return ka > kb;
    return h.out_degree()[a] < h.out_degree()[b];
  });
  if (idx.size() > kScreenFrom && count > 2) {
    const std::size_t screened = std::min(by_degree.size(), kMaxScreened);
    std::vector<LocalCandidate> cands(screened);
    for (std::size_t k = 0; k < screened; ++k) cands[k] = screen_centre(h, free, by_degree[k], rho);
    std::stable_sort(cands.begin(), cands.end(),
                     [](const LocalCandidate& a, const LocalCandidate& b) { return a.value < b.value; });
    std::vector<std::size_t> peaks;
    const std::size_t keep = static_cast<std::size_t>(count) - 2;
    for (const auto& c : cands) {
      if (peaks.size() >= keep) break;
      if (std::find(peaks.begin(), peaks.end(), c.peak) != peaks.end()) continue;
      peaks.push_back(c.peak);
      std::vector<double> p(n, 0.0);
      for (auto i : idx) p[i] = 0.95 * c.p[i] + 0.05 * uniform[i];
      starts.push_back(std::move(p));
    }
  }
  if (idx.size() > 1) {
    std::vector<std::size_t> centres{idx.front()};
    for (std::size_t c : by_degree) {
      if (centres.size() >= 3) break;
      if (std::find(centres.begin(), centres.end(), c) == centres.end()) centres.push_back(c);
    }
    if (std::find(centres.begin(), centres.end(), by_degree.back()) == centres.end())
      centres.push_back(by_degree.back());
    for (auto c : centres) {
      if (static_cast<int>(starts.size()) >= count) break;
      starts.push_back(mix(c));
    }
  }
  const CounterRng base(seed);
  for (std::uint64_t k = 0; static_cast<int>(starts.size()) < count; ++k) {
    CounterRng rng = base.split(k);
    std::vector<double> p(n, 0.0);
    double total = 0.0;
    for (auto i : idx) total += p[i] = rng.exponential(1.0);
    for (auto i : idx) p[i] /= total;
    starts.push_back(p);
  }
  return starts;
}

}  // namespace

double I_functional(const RootedGraph& g, std::span<const double> p) {
  if (p.size() != g.size()) throw Error(ErrorCode::InvalidInput, "measure size does not match graph");
  double sum = 0.0;
  for (const auto& [x, y] : g.edges()) {
    const double d = std::sqrt(p[x]) - std::sqrt(p[y]);
    sum += d * d;
  }
  return sum;
}

double J_functional(std::span<const double> p) {
  double sum = 0.0;
  for (double x : p) {
    if (x < 0.0) throw Error(ErrorCode::InvalidInput, "negative weight");
    sum -= xlogx(x);
  }
  return sum;
}

nlohmann::json ChiOptions::to_json() const {
  return {{"restarts", restarts}, {"grad_tol", grad_tol}, {"dual_tol", dual_tol},
          {"max_iter", max_iter}, {"seed", seed}};
}

nlohmann::json ChiResult::to_json() const {
  nlohmann::json pm = nlohmann::json::object(), qm = nlohmann::json::object();
  for (std::size_t i = 0; i < domain.size(); ++i) {
    if (i < p.size() && p[i] > 0.0) pm[std::to_string(domain[i])] = p[i];
    if (i < q.size()) qm[std::to_string(domain[i])] = q[i];
  }
  nlohmann::json j = {{"value", value},           {"method", method},   {"iterations", iterations},
                      {"residual", residual},     {"restarts", restarts}, {"minimizer", pm}};
  if (!q.empty()) j["potential"] = qm;
  return j;
}

double primal_objective(const RootedGraph& g, std::span<const VertexId> Lambda, double rho,
                        std::span<const double> s) {
  const Hamiltonian h = zero_potential(g, Lambda);
  SphereProblem prob(h, rho, std::vector<char>(h.size(), 1), 1.0);
  return prob.value(std::vector<double>(s.begin(), s.end()));
}

std::vector<double> primal_gradient(const RootedGraph& g, std::span<const VertexId> Lambda,
                                    double rho, std::span<const double> s) {
  const Hamiltonian h = zero_potential(g, Lambda);
  SphereProblem prob(h, rho, std::vector<char>(h.size(), 1), 1.0);
  std::vector<double> grad;
  prob.gradient(std::vector<double>(s.begin(), s.end()), grad);
  return grad;
}

ChiResult chi_primal(const RootedGraph& g, std::span<const VertexId> Lambda, double rho,
                     const ChiOptions& opts) {
  check_rho(rho);
  const Hamiltonian h = zero_potential(g, Lambda);
  ChiResult res;
  res.method = "primal";
  res.domain = h.domain();
  if (h.size() == 1) {
    res.value = static_cast<double>(g.degree(h.domain()[0]));
    res.p = {1.0};
    return res;
  }
  const std::vector<char> free(h.size(), 1);
  SphereProblem prob(h, rho, free, 1.0);
  const auto starts = start_measures(h, free, rho, std::max(opts.restarts, 1), opts.seed);
  const auto best = best_sphere(prob, starts, opts, res.restarts);
  res.value = best.value;
  res.p.resize(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) res.p[i] = best.s[i] * best.s[i];
  res.iterations = best.iterations;
  res.residual = best.grad_norm;
  return res;
}

ChiResult chi_primal(const RootedGraph& g, double rho, const ChiOptions& opts) {
  const auto v = all_vertices(g);
  return chi_primal(g, v, rho, opts);
}

ChiResult chi_dual(const RootedGraph& g, std::span<const VertexId> Lambda, double rho,
                   const ChiOptions& opts) {
  check_rho(rho);
  Hamiltonian h = zero_potential(g, Lambda);
  const std::size_t n = h.size();
  ChiResult res;
  res.method = "dual";
  res.domain = h.domain();
  const double sentinel = kMinusInfinityScale * rho;
  const auto starts = start_measures(h, std::vector<char>(n, 1), rho, std::max(opts.restarts, 1), opts.seed);
  EigenOptions eig;
  eig.method = n > 64 ? EigenOptions::Method::Krylov : EigenOptions::Method::Dense;
  eig.tol = 1e-10;
  double best_lambda = -kInf;
  bool any_converged = false;
  for (const auto& p0 : starts) {
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = p0[i] > 0.0 ? rho * std::log(p0[i]) : sentinel;
    h.set_q(q);
    eig.start = nullptr;
    Eigenpair pair = principal_eigenpair(h, eig);
    double lambda_prev = pair.lambda;
    bool converged = false;
    int it = 0;
    double residual = 0.0;
    for (; it < opts.max_iter; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        const double w = pair.phi(static_cast<Eigen::Index>(i)) * pair.phi(static_cast<Eigen::Index>(i));
        q[i] = w > 0.0 ? std::max(rho * std::log(w), sentinel) : sentinel;
      }
      h.set_q(q);
      const Eigen::VectorXd warm = pair.phi;
      eig.start = &warm;
      pair = principal_eigenpair(h, eig);
      eig.start = nullptr;
      if (std::abs(pair.lambda - lambda_prev) <= opts.dual_tol * (1.0 + std::abs(pair.lambda))) {
        converged = true;
        ++it;
        break;
      }
      lambda_prev = pair.lambda;
    }
    residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = pair.phi(static_cast<Eigen::Index>(i)) * pair.phi(static_cast<Eigen::Index>(i));
      residual += std::abs(w - std::exp(q[i] / rho));
    }
    ++res.restarts;
    if (converged) any_converged = true;
    if (pair.lambda > best_lambda) {
      best_lambda = pair.lambda;
      res.value = -pair.lambda;
      res.q = q;
      res.p.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        res.p[i] = pair.phi(static_cast<Eigen::Index>(i)) * pair.phi(static_cast<Eigen::Index>(i));
      res.iterations = it;
      res.residual = residual;
    }
  }
  if (!any_converged)
    throw Error(ErrorCode::NoConvergence,
                "dual ascent did not settle; best value " + format_double(res.value));
  return res;
}

double chi_boundary(const RootedGraph& g, VertexId x, double b, double rho, const ChiOptions& opts) {
  check_rho(rho);
  if (x >= g.size()) throw Error(ErrorCode::InvalidInput, "boundary vertex not in graph");
  if (!(b >= 0.0 && b <= 1.0))
    throw Error(ErrorCode::InfeasibleBoundary, "boundary value " + format_double(b) + " outside [0,1]");
  if (b == 1.0) return static_cast<double>(g.degree(x));
  if (g.size() == 1) return kInf;
  const auto v = all_vertices(g);
  const Hamiltonian h = zero_potential(g, v);
  std::vector<char> free(h.size(), 1);
  free[x] = 0;
  SphereProblem prob(h, rho, free, 1.0 - b);
  auto starts = start_measures(h, free, rho, std::max(opts.restarts, 1), opts.seed);
  for (auto& p : starts) {
    for (auto& w : p) w *= 1.0 - b;
    p[x] = b;
  }
  int used = 0;
  return best_sphere(prob, starts, opts, used).value;
}

nlohmann::json BallSequence::to_json() const {
  return {{"radii", radii},          {"values", values},           {"sizes", sizes},
          {"limit", limit},          {"uncertainty", uncertainty}, {"monotone", monotone}};
}

std::pair<double, double> extrapolate_limit(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::InvalidInput, "no values to extrapolate");
  const double last = values.back();
  if (values.size() < 2) return {last, 0.0};
  const double d_last = values[values.size() - 1] - values[values.size() - 2];
  if (values.size() < 3) return {last, std::abs(d_last)};
  const double d_prev = values[values.size() - 2] - values[values.size() - 3];
  double limit = last;
  if (d_prev != 0.0) {
    const double q = d_last / d_prev;
    if (q > 0.0 && q < 1.0) limit = last + d_last * q / (1.0 - q);
  }
  return {limit, std::abs(d_last)};
}

BallSequence chi_ball_sequence(const RootedGraph& g, double rho, std::span<const int> radii,
                               const ChiOptions& opts) {
  if (radii.empty()) throw Error(ErrorCode::InvalidInput, "no radii");
  BallSequence seq;
  for (int r : radii) {
    if (r < 0) throw Error(ErrorCode::InvalidInput, "negative radius");
    const Ball b = ball(g, g.root(), r);
    seq.radii.push_back(r);
    seq.sizes.push_back(b.size());
    seq.values.push_back(chi_dual(g, b.members, rho, opts).value);
  }
  for (std::size_t i = 1; i < seq.values.size(); ++i)
    if (seq.radii[i] > seq.radii[i - 1] && seq.values[i] > seq.values[i - 1] + 1e-9) seq.monotone = false;
  const auto [limit, unc] = extrapolate_limit(seq.values);
  seq.limit = limit;
  seq.uncertainty = unc;
  return seq;
}

BallSequence chi_ball_sequence(const TreeSpec& tree, double rho, std::span<const int> radii,
                               const ChiOptions& opts, std::size_t vertex_budget) {
  if (radii.empty()) throw Error(ErrorCode::InvalidInput, "no radii");
  TreeSpec spec = tree;
  spec.radius = *std::max_element(radii.begin(), radii.end()) + 1;
  RootedGraph g = [&] {
    try {
      return realize(spec, vertex_budget);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SizeOverflow)
        throw Error(ErrorCode::BudgetExceeded, std::string("tree truncation exceeds budget: ") + e.what());
      throw;
    }
  }();
  return chi_ball_sequence(g, rho, radii, opts);
}

// ---------------------------------------------------------------------------
// Glueing.

RootedGraph glue_components(const std::vector<Component>& components) {
  if (components.empty()) throw Error(ErrorCode::InvalidInput, "no components");
  std::vector<std::pair<RootedGraph, VertexId>> parts;
  int bound = static_cast<int>(components.size());
  for (const auto& c : components) {
    if (c.y >= c.graph.size()) throw Error(ErrorCode::InvalidInput, "attachment vertex not in component");
    parts.emplace_back(c.graph, c.y);
    bound = std::max({bound, c.graph.d_max(), c.graph.degree(c.y) + 1});
  }
  return glue_star(parts, bound);
}

nlohmann::json GlueFormulaResult::to_json() const {
  return {{"value", value}, {"levels", levels}, {"gap", gap},
          {"a", a},         {"v", v},           {"boundary_evaluations", boundary_evaluations}};
}

GlueFormulaResult glue_formula_A4(const std::vector<Component>& components, double rho,
                                  const GridOptions& opts) {
  check_rho(rho);
  const std::size_t k = components.size();
  if (k < 1 || k > 2) throw Error(ErrorCode::InvalidInput, "grid evaluation supports 1 or 2 components");
  if (opts.points < 3 || opts.refinements < 1) throw Error(ErrorCode::InvalidInput, "grid too small");

  GlueFormulaResult res;
  std::vector<std::map<double, double>> cache(k);
  auto f = [&](std::size_t i, double v) {
    v = std::clamp(v, 0.0, 1.0);
    auto it = cache[i].find(v);
    if (it != cache[i].end()) return it->second;
    const double val = chi_boundary(components[i].graph, components[i].y, v, rho, opts.chi);
    ++res.boundary_evaluations;
    cache[i].emplace(v, val);
    return val;
  };
  // Grid and polish run in amplitudes t_i = sqrt(a_i), w_i = sqrt(v_i), where
  // the square roots of the hub edges become smooth near the corners.
  // Contribution of component i for amplitudes t_i, t0 and boundary amplitude w.
  auto term = [&](std::size_t i, double ti, double t0, double w) {
    if (ti <= 0.0) return t0 * t0;
    const double ai = ti * ti;
    const double fv = f(i, w * w);
    if (!std::isfinite(fv)) return kInf;
    const double d = ti * w - t0;
    return ai * fv + d * d - rho * xlogx(ai);
  };
  auto total = [&](const std::vector<double>& t, const std::vector<double>& w) {
    double sum_a = 0.0;
    for (double x : t) sum_a += x * x;
    if (sum_a > 1.0 + 1e-12) return kInf;
    const double a0 = std::max(0.0, 1.0 - sum_a);
    double val = -rho * xlogx(a0);
    for (std::size_t i = 0; i < k; ++i) val += term(i, t[i], std::sqrt(a0), w[i]);
    return val;
  };
  auto grid = [&](double lo, double hi) {
    std::vector<double> pts(static_cast<std::size_t>(opts.points));
    for (int j = 0; j < opts.points; ++j)
      pts[static_cast<std::size_t>(j)] = j + 1 == opts.points ? hi : lo + (hi - lo) * j / (opts.points - 1);
    return pts;
  };

  std::vector<double> a_lo(k, 0.0), a_hi(k, 1.0), v_lo(k, 0.0), v_hi(k, 1.0);
  std::vector<double> best_a(k, 0.0), best_v(k, 1.0);
  double best = kInf;
  for (int level = 0; level <= opts.refinements; ++level) {
    std::vector<std::vector<double>> ag(k), vg(k);
    for (std::size_t i = 0; i < k; ++i) {
      ag[i] = grid(a_lo[i], a_hi[i]);
      vg[i] = grid(v_lo[i], v_hi[i]);
    }
    // The inner minimum over v_i separates once a is fixed.
    std::vector<double> a(k);
    std::vector<std::size_t> pos(k, 0);
    double level_best = kInf;
    std::vector<double> level_a(k), level_v(k);
    for (;;) {
      for (std::size_t i = 0; i < k; ++i) a[i] = ag[i][pos[i]];
      double sum_a = 0.0;
      for (double x : a) sum_a += x * x;
      if (sum_a <= 1.0 + 1e-12) {
        const double a0 = std::max(0.0, 1.0 - sum_a);
        const double t0 = std::sqrt(a0);
        double val = -rho * xlogx(a0);
        std::vector<double> vbest(k, 1.0);
        for (std::size_t i = 0; i < k && std::isfinite(val); ++i) {
          double m = kInf;
          for (double v : vg[i]) {
            const double t = term(i, a[i], t0, v);
            if (t < m) {
              m = t;
              vbest[i] = v;
            }
          }
          val += m;
        }
        if (val < level_best) {
          level_best = val;
          level_a = a;
          level_v = vbest;
        }
      }
      std::size_t d = 0;
      while (d < k && ++pos[d] == ag[d].size()) pos[d++] = 0;
      if (d == k) break;
    }
    res.levels.push_back(level_best);
    if (level_best <= best) {
      best = level_best;
      best_a = level_a;
      best_v = level_v;
    }
    for (std::size_t i = 0; i < k; ++i) {
      const double ha = 2.0 * (a_hi[i] - a_lo[i]) / (opts.points - 1);
      const double hv = 2.0 * (v_hi[i] - v_lo[i]) / (opts.points - 1);
      a_lo[i] = std::max(0.0, best_a[i] - ha);
      a_hi[i] = std::min(1.0, best_a[i] + ha);
      // With no mass on a component its boundary value is undetermined; keep
      // the full range so a later level can still pick it up.
      if (best_a[i] > 0.0) {
        v_lo[i] = std::max(0.0, best_v[i] - hv);
        v_hi[i] = std::min(1.0, best_v[i] + hv);
      }
    }
  }
  res.coarse = res.levels.front();
  res.gap = std::abs(res.levels.back() - res.levels[res.levels.size() - 2]);

  // Coordinate golden-section polish with direct evaluations. Windows span one
  // coarse cell around the current point, so small masses cut off by the
  // local refinement can still be recovered.
  std::vector<double> a = best_a, v = best_v;
  // Same for the polish start: pick the boundary value that is best for a small
  // amount of mass, otherwise the zero-mass saddle never moves.
  for (std::size_t i = 0; i < k; ++i)
    if (a[i] == 0.0) {
      const double t0 = std::sqrt(std::max(0.0, 1.0 - std::inner_product(a.begin(), a.end(), a.begin(), 0.0)));
      double m = kInf;
      for (int j = 0; j < opts.points; ++j) {
        const double w = static_cast<double>(j) / (opts.points - 1);
        const double t = term(i, 1e-3, t0, w);
        if (t < m) m = t, v[i] = w;
      }
    }
  double current = total(a, v);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  const double window = 1.0 / (opts.points - 1);
  for (int round = 0; round < 200; ++round) {
    const double before = current;
    for (std::size_t var = 0; var < 2 * k; ++var) {
      std::vector<double>& vec = var < k ? a : v;
      const std::size_t i = var % k;
      const double lo = std::max(0.0, vec[i] - window);
      const double hi = std::min(1.0, vec[i] + window);
      auto eval = [&](double x) {
        const double keep = vec[i];
        vec[i] = x;
        const double val = total(a, v);
        vec[i] = keep;
        return val;
      };
      double lo_x = lo, hi_x = hi;
      double x1 = hi_x - phi * (hi_x - lo_x), x2 = lo_x + phi * (hi_x - lo_x);
      double f1 = eval(x1), f2 = eval(x2);
      for (int it = 0; it < 40; ++it) {
        if (f1 <= f2) {
          hi_x = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi_x - phi * (hi_x - lo_x);
          f1 = eval(x1);
        } else {
          lo_x = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo_x + phi * (hi_x - lo_x);
          f2 = eval(x2);
        }
      }
      const double x = f1 <= f2 ? x1 : x2;
      const double fx = std::min(f1, f2);
      if (fx < current) {
        vec[i] = x;
        current = fx;
      }
    }
    if (before - current < 1e-14) break;
  }
  res.value = std::min(current, best);
  res.a = current <= best ? a : best_a;
  res.v = current <= best ? v : best_v;
  for (auto& x : res.a) x *= x;
  for (auto& x : res.v) x *= x;
  if (res.gap > opts.gap_tol)
    throw Error(ErrorCode::GridTooCoarse, "refinement gap " + format_double(res.gap) +
                                              " exceeds tolerance " + format_double(opts.gap_tol));
  return res;
}

nlohmann::json GlueTwoReport::to_json() const {
  return {{"chi1", chi1}, {"chi2", chi2}, {"chi_glued", chi_glued}, {"holds", holds}};
}

GlueTwoReport glue_inequality_A3(const RootedGraph& g1, VertexId x1, const RootedGraph& g2,
                                 VertexId x2, double rho, const ChiOptions& opts) {
  const int bound = std::max({g1.d_max(), g2.d_max(), g1.degree(x1) + 1, g2.degree(x2) + 1});
  const RootedGraph glued = glue_two(g1, x1, g2, x2, bound);
  GlueTwoReport r;
  r.chi1 = chi_primal(g1, rho, opts).value;
  r.chi2 = chi_primal(g2, rho, opts).value;
  r.chi_glued = chi_primal(glued, rho, opts).value;
  r.holds = r.chi_glued >= std::min(r.chi1, r.chi2) - 1e-6;
  return r;
}

nlohmann::json PropagationReport::to_json() const {
  return {{"rho_condition", rho_condition},
          {"inf_without_one", inf_without_one},
          {"inf_boundary", inf_boundary},
          {"hypotheses", hypotheses},
          {"chi_full", chi_full},
          {"conclusion", conclusion},
          {"implication_holds", implication_holds}};
}

PropagationReport propagation_check_A6(const std::vector<Component>& components, double rho,
                                       double M, double C, const ChiOptions& opts) {
  check_rho(rho);
  if (components.size() < 2) throw Error(ErrorCode::InvalidInput, "need at least two components");
  if (!(C > 0.0)) throw Error(ErrorCode::InvalidInput, "C must be positive");
  const double k = static_cast<double>(components.size() - 1);
  PropagationReport r;
  r.rho_condition = rho >= C / std::log(k + 1.0);
  r.inf_without_one = kInf;
  r.inf_boundary = kInf;
  for (std::size_t j = 0; j < components.size(); ++j) {
    std::vector<Component> rest;
    for (std::size_t i = 0; i < components.size(); ++i)
      if (i != j) rest.push_back(components[i]);
    r.inf_without_one = std::min(r.inf_without_one, chi_primal(glue_components(rest), rho, opts).value);
    r.inf_boundary = std::min(r.inf_boundary, chi_primal(components[j].graph, rho, opts).value);
  }
  r.hypotheses = r.rho_condition && r.inf_without_one >= M && r.inf_boundary >= M - C;
  r.chi_full = chi_primal(glue_components(components), rho, opts).value;
  r.conclusion = r.chi_full >= M - 1e-6;
  r.implication_holds = !r.hypotheses || r.conclusion;
  return r;
}

// ---------------------------------------------------------------------------
// Minimal trees.

SandwichA9 a9_sandwich(int d, int r, double rho, const ChiOptions& opts) {
  SandwichA9 s;
  const RootedGraph half = half_homogeneous_tree(d, r + 1);
  const RootedGraph full = homogeneous_tree(d, r + 1);
  s.half_tree = chi_dual(half, ball(half, half.root(), r).members, rho, opts).value;
  s.full_tree = chi_dual(full, ball(full, full.root(), r).members, rho, opts).value;
  s.lower = s.half_tree <= s.full_tree + 1e-9;
  s.upper = s.full_tree <= s.half_tree + 1.0 + 1e-9;
  return s;
}

std::string Theorem12Report::to_csv() const {
  std::ostringstream out;
  out << "tree_id,kind,canonical_code,r,ball_size,chi,gap_to_min\n";
  for (const auto& row : rows)
    out << row.id << ',' << row.kind << ',' << row.code << ',' << r << ',' << row.ball_size << ','
        << format_double(row.chi) << ',' << format_double(row.gap_to_min) << '\n';
  return out.str();
}

nlohmann::json Theorem12Report::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows)
    rows_json.push_back({{"id", row.id},
                         {"kind", row.kind},
                         {"ball_size", row.ball_size},
                         {"chi", row.chi},
                         {"gap_to_min", row.gap_to_min}});
  return {{"d_min", d_min},
          {"degree_set", degree_set},
          {"rho", rho},
          {"r", r},
          {"large_rho", large_rho},
          {"rows", rows_json},
          {"argmin", argmin},
          {"minimal_is_min", minimal_is_min},
          {"tol", tol},
          {"half_tree", half_tree},
          {"full_tree", full_tree},
          {"a9_lower", a9_lower},
          {"a9_upper", a9_upper},
          {"warnings", warnings}};
}

Theorem12Report theorem12_check(int d_min, const std::vector<int>& degree_set, double rho, int r,
                                std::size_t catalog_size, std::uint64_t seed,
                                const ChiOptions& opts) {
  check_rho(rho);
  if (degree_set.empty() || r < 0 || catalog_size == 0)
    throw Error(ErrorCode::InvalidInput, "need a degree set, r >= 0 and a nonempty catalog");
  std::vector<int> ds = degree_set;
  std::sort(ds.begin(), ds.end());
  ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
  if (ds.front() != d_min) throw Error(ErrorCode::InvalidInput, "d_min must be the smallest degree");
  if (d_min < 2) throw Error(ErrorCode::InvalidInput, "d_min must be >= 2");

  Theorem12Report rep;
  rep.d_min = d_min;
  rep.degree_set = ds;
  rep.rho = rho;
  rep.r = r;
  rep.large_rho = rho >= 1.0 / std::log(d_min + 1.0);
  if (!rep.large_rho)
    rep.warnings.push_back("rho below 1/log(d_min+1): minimality is not expected to hold here; data only");

  const bool can_glue = std::binary_search(ds.begin(), ds.end(), d_min + 1);
  std::vector<RootedGraph> trees;
  std::vector<std::string> kinds;
  trees.push_back(homogeneous_tree(d_min, r + 1));
  kinds.push_back("minimal");
  const CounterRng base(seed);
  // B_r of T_dmin in BFS numbering holds exactly the vertices at depth <= r.
  const std::size_t inner = ball(trees[0], 0, r).size();
  for (std::size_t i = 1; i < catalog_size; ++i) {
    CounterRng rng = base.split(i);
    if (can_glue && i % 2 == 0) {
      TreeSpec spec;
      spec.kind = TreeKind::Homogeneous;
      spec.d = d_min;
      spec.radius = r + 1;
      const std::size_t count = 1 + rng.below(std::min<std::size_t>(4, inner));
      while (spec.attachments.size() < count) {
        const auto v = static_cast<VertexId>(rng.below(inner));
        if (std::find(spec.attachments.begin(), spec.attachments.end(), v) == spec.attachments.end())
          spec.attachments.push_back(v);
      }
      trees.push_back(realize(spec));
      kinds.push_back("glued");
    } else {
      GWSpec spec;
      spec.initial = DegreeLaw::uniform(ds);
      spec.general = DegreeLaw::uniform(ds);
      spec.radius = r + 1;
      spec.seed = rng();
      trees.push_back(sample_gw_tree(spec));
      kinds.push_back("gw");
    }
  }
  rep.rows.resize(trees.size());
  parallel_for(trees.size(), [&](std::size_t i) {
    const Ball b = ball(trees[i], trees[i].root(), r);
    CatalogRow row;
    row.id = i;
    row.kind = kinds[i];
    row.code = canonical_tree_code(induced_ball(b).graph);
    row.ball_size = b.size();
    row.chi = chi_dual(trees[i], b.members, rho, opts).value;
    rep.rows[i] = std::move(row);
  });
  const double ref = rep.rows[0].chi;
  rep.minimal_is_min = true;
  for (auto& row : rep.rows) {
    row.gap_to_min = row.chi - ref;
    if (row.chi < rep.rows[rep.argmin].chi) rep.argmin = row.id;
    if (row.chi < ref - rep.tol) rep.minimal_is_min = false;
  }
  const SandwichA9 s = a9_sandwich(d_min, r, rho, opts);
  rep.half_tree = s.half_tree;
  rep.full_tree = s.full_tree;
  rep.a9_lower = s.lower;
  rep.a9_upper = s.upper;
  return rep;
}

}  // namespace pam
