#include "pam/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "pam/error.hpp"
#include "pam/format.hpp"
#include "pam/parallel.hpp"
#include "pam/rng.hpp"
#include "pam/spectral.hpp"

namespace pam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const char* const kCaveat =
    "Finite-time values. The o(1) corrections in the Lyapunov asymptotics decay like "
    "1/loglog t, so at t <= 8 residual gaps of order one are expected; read the trend, "
    "not the value.";

struct SeedStreams {
  std::uint64_t graph = 0;
  std::uint64_t potential = 0;
};

SeedStreams streams(std::uint64_t seed, std::size_t index) {
  CounterRng rng = CounterRng(seed).split(index);
  SeedStreams s;
  s.graph = rng();
  s.potential = rng();
  return s;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string dat(const std::vector<std::pair<double, double>>& points) {
  std::string out;
  for (const auto& [x, y] : points) out += format_double(x) + ' ' + format_double(y) + '\n';
  return out;
}

RootedGraph gw_tree(const ExperimentConfig& cfg, int radius, std::uint64_t seed) {
  GWSpec spec;
  spec.general = cfg.degree_law;
  spec.initial = cfg.root_law ? *cfg.root_law : cfg.degree_law;
  spec.radius = radius;
  spec.seed = seed;
  spec.vertex_budget = cfg.solver.vertex_budget;
  try {
    return sample_gw_tree(spec);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::VertexBudgetExceeded || e.code() == ErrorCode::SizeOverflow)
      throw Error(ErrorCode::BudgetExceeded, e.what());
    throw;
  }
}

BallSequence chi_estimate(const ExperimentConfig& cfg) {
  TreeSpec spec;
  spec.kind = TreeKind::Homogeneous;
  spec.d = cfg.degree_law.min_degree();
  return chi_ball_sequence(spec, cfg.rho, cfg.chi_radii, cfg.chi, cfg.solver.vertex_budget);
}

// AHU codes of every subtree of a rooted tree.
std::vector<std::string> subtree_codes(const RootedGraph& t, std::vector<int>& parent,
                                       std::vector<VertexId>& order) {
  const std::size_t n = t.size();
  parent.assign(n, -1);
  order.assign(1, t.root());
  std::vector<char> seen(n, 0);
  seen[t.root()] = 1;
  for (std::size_t i = 0; i < order.size(); ++i)
    for (VertexId w : t.neighbors(order[i]))
      if (!seen[w]) {
        seen[w] = 1;
        parent[w] = static_cast<int>(order[i]);
        order.push_back(w);
      }
  std::vector<std::vector<std::string>> child_codes(n);
  std::vector<std::string> code(n);
  for (std::size_t i = order.size(); i-- > 0;) {
    const VertexId v = order[i];
    auto& cs = child_codes[v];
    std::sort(cs.begin(), cs.end());
    code[v] = "(";
    for (const auto& c : cs) code[v] += c;
    code[v] += ")";
    if (parent[v] >= 0) child_codes[static_cast<std::size_t>(parent[v])].push_back(code[v]);
  }
  return code;
}

// Vertex map from tree a onto tree b (both rooted), or empty if not isomorphic.
std::vector<VertexId> tree_isomorphism(const RootedGraph& a, const RootedGraph& b) {
  if (a.size() != b.size() || !a.is_tree() || !b.is_tree()) return {};
  std::vector<int> pa, pb;
  std::vector<VertexId> oa, ob;
  const auto ca = subtree_codes(a, pa, oa);
  const auto cb = subtree_codes(b, pb, ob);
  if (ca[a.root()] != cb[b.root()]) return {};
  std::vector<VertexId> map(a.size(), 0);
  map[a.root()] = b.root();
  for (VertexId u : oa) {
    const VertexId v = map[u];
    std::vector<std::pair<std::string, VertexId>> ka, kb;
    for (VertexId w : a.neighbors(u))
      if (pa[w] == static_cast<int>(u)) ka.emplace_back(ca[w], w);
    for (VertexId w : b.neighbors(v))
      if (pb[w] == static_cast<int>(v)) kb.emplace_back(cb[w], w);
    std::sort(ka.begin(), ka.end());
    std::sort(kb.begin(), kb.end());
    for (std::size_t i = 0; i < ka.size(); ++i) map[ka[i].second] = kb[i].second;
  }
  return map;
}

std::vector<VertexId> path_to_root(const RootedGraph& g, VertexId z) {
  const auto dist = g.distances_from(g.root());
  std::vector<VertexId> path{z};
  while (path.back() != g.root()) {
    const VertexId v = path.back();
    for (VertexId w : g.neighbors(v))
      if (dist[w] == dist[v] - 1) {
        path.push_back(w);
        break;
      }
  }
  std::reverse(path.begin(), path.end());
  return path;
}

// Profile values on B_R(z) in G when B_{R+1}(z) matches the profile tree;
// returns the ball vertices in G and the matched q values.
bool match_profile(const RootedGraph& g, VertexId z, const QProfile& profile,
                   std::vector<VertexId>& ball_out, std::vector<double>& q_out) {
  const Ball outer = ball(g, z, profile.R + 1);
  if (outer.size() != profile.tree.size()) return false;
  const InducedSubgraph sub = induced_ball(outer);
  const auto map = tree_isomorphism(sub.graph, profile.tree);
  if (map.empty()) return false;
  ball_out.clear();
  q_out.clear();
  for (VertexId local = 0; local < sub.graph.size(); ++local) {
    const VertexId v = sub.original_ids[local];
    if (outer.member_dist[local] > profile.R) continue;
    ball_out.push_back(v);
    q_out.push_back(profile.q[map[local]]);
  }
  return true;
}

double certificate_bound(const LowerBoundCertificate& c) {
  const double rate = c.a + c.profile_lambda;
  // Remaining time t - tau lies in [t - s, t]; take the worse end.
  const double t_rem = rate >= 0.0 ? c.t - c.s : c.t;
  return (c.waiting_bound + std::log(c.phi_root2) + t_rem * rate) / c.t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config.

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::LyapunovGW: return "lyapunov-gw";
    case ExperimentKind::LyapunovCM: return "lyapunov-cm";
    case ExperimentKind::ChiCatalog: return "chi-catalog";
    case ExperimentKind::Islands: return "islands";
    case ExperimentKind::Coupling: return "coupling";
    case ExperimentKind::LowerBoundCertificate: return "lower-bound-certificate";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(std::string_view name) {
  for (auto k : {ExperimentKind::LyapunovGW, ExperimentKind::LyapunovCM, ExperimentKind::ChiCatalog,
                 ExperimentKind::Islands, ExperimentKind::Coupling,
                 ExperimentKind::LowerBoundCertificate})
    if (to_string(k) == name) return k;
  throw Error(ErrorCode::InvalidInput, "unknown experiment kind '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidInput, what); };
  if (!(rho > 0.0) || !std::isfinite(rho)) fail("rho must be positive");
  if (times.empty()) fail("times must be nonempty");
  for (double t : times)
    if (!(t > 0.0) || !std::isfinite(t)) fail("times must be positive (log of t is taken)");
  if (!std::is_sorted(times.begin(), times.end())) fail("times must be ascending");
  if (chi_radii.empty()) fail("chi_radii must be nonempty");
  for (int r : chi_radii)
    if (r < 0) fail("chi_radii must be >= 0");
  if (seeds == 0) fail("seeds must be >= 1");
  if (radius < 0) fail("radius must be >= 0");
  if (profile_radius < 0) fail("profile_radius must be >= 0");
  if (n < 2) fail("n must be >= 2");
  if (catalog_size == 0) fail("catalog_size must be >= 1");
  if (coupling_radius < 0) fail("coupling_radius must be >= 0");
  if (trials == 0) fail("trials must be >= 1");
  if (!(eps >= 0.0)) fail("eps must be >= 0");
  if (!(regime_fraction > 0.0)) fail("regime_fraction must be positive");
  if (planted > seeds) fail("planted must not exceed seeds");
  if (chi.restarts < 1 || chi.max_iter < 1) fail("chi options must allow at least one run");
  landscape.validate();
  solver.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j = {{"kind", std::string(to_string(kind))},
                      {"degree_law", degree_law.to_json()},
                      {"n", n},
                      {"radius", radius},
                      {"profile_radius", profile_radius},
                      {"rho", rho},
                      {"landscape", landscape.to_json()},
                      {"times", times},
                      {"chi_radii", chi_radii},
                      {"seeds", seeds},
                      {"seed", seed},
                      {"solver", solver.to_json()},
                      {"chi", chi.to_json()},
                      {"catalog_size", catalog_size},
                      {"coupling_radius", coupling_radius},
                      {"trials", trials},
                      {"eps", eps},
                      {"regime_fraction", regime_fraction},
                      {"planted", planted},
                      {"output_dir", output_dir}};
  j["root_law"] = root_law ? root_law->to_json() : nlohmann::json(nullptr);
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "config must be a JSON object");
  static const std::set<std::string> keys{
      "kind",   "degree_law", "root_law",     "n",           "radius",          "profile_radius",
      "rho",    "landscape",  "times",        "chi_radii",   "seeds",           "seed",
      "solver", "chi",        "catalog_size", "coupling_radius", "trials",      "eps",
      "regime_fraction", "planted", "output_dir"};
  for (const auto& [key, value] : j.items())
    if (!keys.count(key)) throw Error(ErrorCode::InvalidInput, "unknown config key '" + key + "'");
  if (!j.contains("kind")) throw Error(ErrorCode::InvalidInput, "config needs 'kind'");
  ExperimentConfig c;
  try {
    c.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("degree_law")) c.degree_law = DegreeLaw::from_json(j.at("degree_law"));
    if (j.contains("root_law") && !j.at("root_law").is_null())
      c.root_law = DegreeLaw::from_json(j.at("root_law"));
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("n", c.n);
    get("radius", c.radius);
    get("profile_radius", c.profile_radius);
    get("rho", c.rho);
    get("times", c.times);
    get("chi_radii", c.chi_radii);
    get("seeds", c.seeds);
    get("seed", c.seed);
    get("catalog_size", c.catalog_size);
    get("coupling_radius", c.coupling_radius);
    get("trials", c.trials);
    get("eps", c.eps);
    get("regime_fraction", c.regime_fraction);
    get("planted", c.planted);
    get("output_dir", c.output_dir);
    if (j.contains("landscape")) {
      const auto& l = j.at("landscape");
      static const std::set<std::string> lk{"A", "alpha", "epsilon", "M_A"};
      for (const auto& [key, value] : l.items())
        if (!lk.count(key)) throw Error(ErrorCode::InvalidInput, "unknown landscape key '" + key + "'");
      if (l.contains("A")) c.landscape.A = l.at("A").get<double>();
      if (l.contains("alpha")) c.landscape.alpha = l.at("alpha").get<double>();
      if (l.contains("epsilon")) c.landscape.epsilon = l.at("epsilon").get<double>();
      if (l.contains("M_A")) c.landscape.M_A = l.at("M_A").get<std::size_t>();
    }
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      static const std::set<std::string> sk{"method",  "c",      "r_min",   "whole_graph", "krylov_dim",
                                            "rel_tol", "vertex_budget", "n_paths", "seed"};
      for (const auto& [key, value] : s.items())
        if (!sk.count(key)) throw Error(ErrorCode::InvalidInput, "unknown solver key '" + key + "'");
      if (s.contains("method")) {
        const auto m = s.at("method").get<std::string>();
        if (m == "deterministic") c.solver.method = SolverConfig::Method::Deterministic;
        else if (m == "feynman-kac") c.solver.method = SolverConfig::Method::FeynmanKac;
        else throw Error(ErrorCode::InvalidInput, "unknown solver method '" + m + "'");
      }
      if (s.contains("c")) c.solver.c = s.at("c").get<double>();
      if (s.contains("r_min")) c.solver.r_min = s.at("r_min").get<int>();
      if (s.contains("whole_graph")) c.solver.whole_graph = s.at("whole_graph").get<bool>();
      if (s.contains("krylov_dim")) c.solver.krylov_dim = s.at("krylov_dim").get<int>();
      if (s.contains("rel_tol")) c.solver.rel_tol = s.at("rel_tol").get<double>();
      if (s.contains("vertex_budget")) c.solver.vertex_budget = s.at("vertex_budget").get<std::size_t>();
      if (s.contains("n_paths")) c.solver.n_paths = s.at("n_paths").get<std::size_t>();
      if (s.contains("seed")) c.solver.seed = s.at("seed").get<std::uint64_t>();
    }
    if (j.contains("chi")) {
      const auto& s = j.at("chi");
      static const std::set<std::string> ck{"restarts", "grad_tol", "dual_tol", "max_iter", "seed"};
      for (const auto& [key, value] : s.items())
        if (!ck.count(key)) throw Error(ErrorCode::InvalidInput, "unknown chi key '" + key + "'");
      if (s.contains("restarts")) c.chi.restarts = s.at("restarts").get<int>();
      if (s.contains("grad_tol")) c.chi.grad_tol = s.at("grad_tol").get<double>();
      if (s.contains("dual_tol")) c.chi.dual_tol = s.at("dual_tol").get<double>();
      if (s.contains("max_iter")) c.chi.max_iter = s.at("max_iter").get<int>();
      if (s.contains("seed")) c.chi.seed = s.at("seed").get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("config type error: ") + e.what());
  }
  c.validate();
  return c;
}

std::string serialize_report(const RunOutput& out) { return out.report.dump(2) + "\n"; }

void write_run(const RunOutput& out, const ExperimentConfig& cfg, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidInput, "cannot write " + (fs::path(dir) / name).string());
    f << text;
  };
  write("data.csv", out.csv);
  write("report.json", serialize_report(out));
  write("config.resolved.json", cfg.to_json().dump(2) + "\n");
  for (const auto& [name, text] : out.plots) write(name, text);
}

// ---------------------------------------------------------------------------
// Lyapunov.

double loglog_clamped(double t) { return t > std::exp(1.0) ? std::log(std::log(t)) : 1.0; }

double theory_leading(double rho, double theta, double t) {
  return rho * std::log(rho * theta * t / loglog_clamped(t)) - rho;
}

nlohmann::json LyapunovReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows)
    rows_json.push_back({{"t", r.t},
                         {"simulated_mean", r.simulated_mean},
                         {"simulated_std", r.simulated_std},
                         {"theory_leading", r.leading},
                         {"theory", r.theory},
                         {"residual_mean", r.residual_mean},
                         {"residual_std", r.residual_std},
                         {"max_error_estimate", r.max_error_estimate}});
  return {{"graph", graph},
          {"rho", rho},
          {"theta", theta},
          {"chi_est", chi_est},
          {"chi_uncertainty", chi_uncertainty},
          {"chi_provenance",
           {{"source", "extrapolated chi-hat on balls of the minimal homogeneous tree (dual solver)"},
            {"sequence", chi_sequence.to_json()}}},
          {"rows", rows_json},
          {"per_seed", per_seed},
          {"per_seed_error", per_seed_error},
          {"graph_sizes", graph_sizes},
          {"warnings", warnings},
          {"caveat", caveat},
          {"all_finite", all_finite}};
}

std::string LyapunovReport::to_csv() const {
  std::ostringstream out;
  out << "seed_index,t,log_U_over_t,error_estimate,theory_leading,residual,theory\n";
  for (std::size_t s = 0; s < per_seed.size(); ++s)
    for (std::size_t i = 0; i < rows.size(); ++i)
      out << s << ',' << format_double(rows[i].t) << ',' << format_double(per_seed[s][i]) << ','
          << format_double(per_seed_error[s][i]) << ',' << format_double(rows[i].leading) << ','
          << format_double(per_seed[s][i] - rows[i].leading) << ',' << format_double(rows[i].theory)
          << '\n';
  return out.str();
}

namespace {

template <class MakeGraph>
LyapunovReport lyapunov_common(const ExperimentConfig& cfg, const std::string& kind, double theta,
                               MakeGraph make_graph) {
  cfg.validate();
  LyapunovReport rep;
  rep.graph = kind;
  rep.rho = cfg.rho;
  rep.theta = theta;
  rep.caveat = kCaveat;
  rep.chi_sequence = chi_estimate(cfg);
  rep.chi_est = rep.chi_sequence.limit;
  rep.chi_uncertainty = rep.chi_sequence.uncertainty;
  rep.per_seed.assign(cfg.seeds, {});
  rep.per_seed_error.assign(cfg.seeds, {});
  rep.graph_sizes.assign(cfg.seeds, 0);
  parallel_for(cfg.seeds, [&](std::size_t s) {
    const SeedStreams st = streams(cfg.seed, s);
    const RootedGraph g = make_graph(st.graph);
    const Potential xi = sample_double_exponential(g, cfg.rho, st.potential);
    SolverConfig solver = cfg.solver;
    solver.seed = st.potential;
    std::vector<double> values, errors;
    if (solver.method == SolverConfig::Method::Deterministic) {
      const MassCurve c = total_mass_deterministic(g, xi, cfg.times, solver);
      values = c.logU_over_t;
      errors = c.error_estimate;
    } else {
      for (double t : cfg.times) {
        const auto mc = total_mass_feynman_kac(g, xi, t, solver.n_paths, solver.seed);
        values.push_back(std::log(mc.estimate) / t);
        errors.push_back(mc.std_error / mc.estimate / t);
      }
    }
    rep.per_seed[s] = std::move(values);
    rep.per_seed_error[s] = std::move(errors);
    rep.graph_sizes[s] = g.size();
  });
  rep.all_finite = std::isfinite(rep.chi_est);
  for (std::size_t i = 0; i < cfg.times.size(); ++i) {
    LyapunovRow row;
    row.t = cfg.times[i];
    row.leading = theory_leading(cfg.rho, theta, row.t);
    row.theory = row.leading - rep.chi_est;
    std::vector<double> sim, res;
    for (std::size_t s = 0; s < cfg.seeds; ++s) {
      sim.push_back(rep.per_seed[s][i]);
      res.push_back(rep.per_seed[s][i] - row.leading);
      row.max_error_estimate = std::max(row.max_error_estimate, rep.per_seed_error[s][i]);
      if (!std::isfinite(rep.per_seed[s][i])) rep.all_finite = false;
    }
    row.simulated_mean = mean_of(sim);
    row.simulated_std = sample_std(sim);
    row.residual_mean = mean_of(res);
    row.residual_std = sample_std(res);
    if (!std::isfinite(row.leading)) rep.all_finite = false;
    rep.rows.push_back(row);
  }
  if (cfg.rho < 1.0 / std::log(cfg.degree_law.min_degree() + 1.0))
    rep.warnings.push_back("rho below 1/log(d_min+1): chi-tilde need not be attained by the minimal tree");
  return rep;
}

}  // namespace

LyapunovReport run_lyapunov_gw(const ExperimentConfig& cfg) {
  const double theta = volume_growth_rate(cfg.degree_law);
  const int radius = truncation_radius(cfg.times.back(), cfg.solver.c, cfg.solver.r_min) + 1;
  return lyapunov_common(cfg, "gw", theta,
                         [&](std::uint64_t seed) { return gw_tree(cfg, radius, seed); });
}

LyapunovReport run_lyapunov_cm(const ExperimentConfig& cfg) {
  const double theta = std::log(nu(cfg.degree_law));
  const DegreeSequence ds = sequence_from_law(cfg.degree_law, cfg.n);
  auto rep = lyapunov_common(cfg, "cm", theta, [&](std::uint64_t seed) {
    const auto [mg, report] = sample_uniform_simple_graph(ds, seed, 100000);
    return mg.root_component(cfg.degree_law.max_degree()).graph;
  });
  const double log_phi = std::log(phi_n(ds, cfg.degree_law));
  for (double t : cfg.times) {
    const double load = t * std::log(std::max(t, 1.0));
    if (load > cfg.regime_fraction * log_phi)
      rep.warnings.push_back(std::string(to_string(ErrorCode::CouplingRegimeViolated)) + ": t log t = " +
                             format_double(load) + " exceeds " + format_double(cfg.regime_fraction) +
                             " log Phi_n = " + format_double(cfg.regime_fraction * log_phi) +
                             " at t = " + format_double(t));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Certificates.

nlohmann::json QProfile::to_json() const {
  return {{"tree", pam::to_json(tree)}, {"R", R},         {"rho", rho},  {"q", q},
          {"lambda", lambda},           {"phi_root2", phi_root2}, {"mass", mass}};
}

QProfile QProfile::from_json(const nlohmann::json& j) {
  return QProfile{graph_from_json(j.at("tree")),          j.at("R").get<int>(),
                  j.at("rho").get<double>(),               j.at("q").get<std::vector<double>>(),
                  j.at("lambda").get<double>(),            j.at("phi_root2").get<double>(),
                  j.at("mass").get<double>()};
}

QProfile make_profile(const RootedGraph& tree, int R, double rho, const ChiOptions& opts) {
  if (R < 0) throw Error(ErrorCode::InvalidInput, "profile radius must be >= 0");
  const Ball outer = ball(tree, tree.root(), R + 1);
  const auto depth = tree.distances_from(tree.root());
  if (*std::max_element(depth.begin(), depth.end()) < R + 1)
    throw Error(ErrorCode::InvalidInput, "profile tree must reach radius R + 1");
  const InducedSubgraph sub = induced_ball(outer);
  const Ball inner = ball(sub.graph, sub.graph.root(), R);
  const ChiResult dual = chi_dual(sub.graph, inner.members, rho, opts);
  QProfile p{sub.graph, R, rho, std::vector<double>(sub.graph.size(), kMinusInfinityScale * rho),
             0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < inner.members.size(); ++i) {
    p.q[inner.members[i]] = dual.q[i];
    p.mass += std::exp(dual.q[i] / rho);
  }
  const Hamiltonian h = assemble(sub.graph, inner.members, p.q);
  const Eigenpair pair = principal_eigenpair(h);
  p.lambda = pair.lambda;
  p.phi_root2 = pair.phi(0) * pair.phi(0);  // the root is the first ball member
  return p;
}

double log_poisson_tail(double mu, int k) {
  if (k <= 0) return 0.0;
  if (!(mu > 0.0)) return -kInf;
  const double log_mu = std::log(mu);
  auto term = [&](int j) { return -mu + j * log_mu - std::lgamma(j + 1.0); };
  double peak = term(k);
  double sum = 0.0;
  std::vector<double> terms;
  for (int j = k;; ++j) {
    const double t = term(j);
    terms.push_back(t);
    peak = std::max(peak, t);
    if (j > mu && t < peak - 50.0) break;
  }
  for (double t : terms) sum += std::exp(t - peak);
  return peak + std::log(sum);
}

nlohmann::json LowerBoundCertificate::to_json() const {
  return {{"z", z},
          {"depth", depth},
          {"search_radius", search_radius},
          {"depth_ratio", depth_ratio},
          {"R", R},
          {"rho", rho},
          {"ball_size", ball_size},
          {"a", a},
          {"path", path},
          {"path_degrees", path_degrees},
          {"ball", ball},
          {"xi_ball", xi_ball},
          {"q_ball", q_ball},
          {"profile_lambda", profile_lambda},
          {"phi_root2", phi_root2},
          {"eigen_lower", eigen_lower},
          {"t", t},
          {"s", s},
          {"log_path_probability", log_path_probability},
          {"log_time_probability", log_time_probability},
          {"waiting_bound", waiting_bound},
          {"bound", bound},
          {"simulated", simulated},
          {"solver_error", solver_error},
          {"consistent", consistent}};
}

LowerBoundCertificate LowerBoundCertificate::from_json(const nlohmann::json& j) {
  LowerBoundCertificate c;
  c.z = j.at("z").get<VertexId>();
  c.depth = j.at("depth").get<int>();
  c.search_radius = j.at("search_radius").get<int>();
  c.depth_ratio = j.at("depth_ratio").get<double>();
  c.R = j.at("R").get<int>();
  c.rho = j.at("rho").get<double>();
  c.ball_size = j.at("ball_size").get<std::size_t>();
  c.a = j.at("a").get<double>();
  c.path = j.at("path").get<std::vector<VertexId>>();
  c.path_degrees = j.at("path_degrees").get<std::vector<int>>();
  c.ball = j.at("ball").get<std::vector<VertexId>>();
  c.xi_ball = j.at("xi_ball").get<std::vector<double>>();
  c.q_ball = j.at("q_ball").get<std::vector<double>>();
  c.profile_lambda = j.at("profile_lambda").get<double>();
  c.phi_root2 = j.at("phi_root2").get<double>();
  c.eigen_lower = j.at("eigen_lower").get<double>();
  c.t = j.at("t").get<double>();
  c.s = j.at("s").get<double>();
  c.log_path_probability = j.at("log_path_probability").get<double>();
  c.log_time_probability = j.at("log_time_probability").get<double>();
  c.waiting_bound = j.at("waiting_bound").get<double>();
  c.bound = j.at("bound").get<double>();
  c.simulated = j.at("simulated").get<double>();
  c.solver_error = j.at("solver_error").get<double>();
  c.consistent = j.at("consistent").get<bool>();
  return c;
}

LowerBoundCertificate find_lower_bound_certificate(const RootedGraph& g, const Potential& xi,
                                                   int search_radius, const QProfile& profile,
                                                   double t, double eps) {
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidInput, "t must be positive");
  if (xi.size() != g.size()) throw Error(ErrorCode::InvalidInput, "potential size does not match graph");
  if (profile.mass > 1.0 + 1e-9)
    throw Error(ErrorCode::PreconditionViolated, "profile has sum e^{q/rho} > 1");
  const Ball search = ball(g, g.root(), search_radius);
  const double a = a_scale(static_cast<double>(search.size()), profile.rho);
  std::size_t isomorphic = 0;
  double best_margin = -kInf;
  std::vector<VertexId> ball_v;
  std::vector<double> q_v;
  for (VertexId z : search.members) {
    if (!match_profile(g, z, profile, ball_v, q_v)) continue;
    ++isomorphic;
    double margin = kInf;
    for (std::size_t i = 0; i < ball_v.size(); ++i) margin = std::min(margin, xi[ball_v[i]] - a - q_v[i]);
    best_margin = std::max(best_margin, margin);
    if (margin < 0.0) continue;

    LowerBoundCertificate c;
    c.z = z;
    c.path = path_to_root(g, z);
    c.depth = static_cast<int>(c.path.size()) - 1;
    c.search_radius = search_radius;
    c.depth_ratio = search_radius > 0 ? static_cast<double>(c.depth) / search_radius : 0.0;
    c.R = profile.R;
    c.rho = profile.rho;
    c.ball_size = search.size();
    c.a = a;
    for (std::size_t i = 0; i + 1 < c.path.size(); ++i) c.path_degrees.push_back(g.degree(c.path[i]));
    c.ball = ball_v;
    for (VertexId v : ball_v) c.xi_ball.push_back(xi[v]);
    c.q_ball = q_v;
    c.profile_lambda = profile.lambda;
    c.phi_root2 = profile.phi_root2;
    c.eigen_lower = a + profile.lambda;
    c.t = t;
    if (c.depth > 0) {
      const int d_lo = *std::min_element(c.path_degrees.begin(), c.path_degrees.end());
      const double denom = d_lo + c.eigen_lower - eps;
      c.s = denom > 0.0 ? c.depth / denom : t / 2.0;
      c.s = std::clamp(c.s, 1e-12 * t, t);
      for (int d : c.path_degrees) c.log_path_probability -= std::log(static_cast<double>(d));
      c.log_time_probability = log_poisson_tail(d_lo * c.s, c.depth);
    }
    c.waiting_bound = c.log_path_probability + c.log_time_probability;
    c.bound = certificate_bound(c);
    return c;
  }
  throw Error(ErrorCode::NotFound, "scanned " + std::to_string(search.size()) + " vertices of B_" +
                                       std::to_string(search_radius) + ", " + std::to_string(isomorphic) +
                                       " with a matching ball, best domination margin " +
                                       format_double(best_margin));
}

bool recheck_certificate(const LowerBoundCertificate& c) {
  if (c.xi_ball.size() != c.q_ball.size() || c.ball.size() != c.q_ball.size()) return false;
  for (std::size_t i = 0; i < c.q_ball.size(); ++i)
    if (c.xi_ball[i] < c.a + c.q_ball[i]) return false;
  if (std::abs(c.a - a_scale(static_cast<double>(c.ball_size), c.rho)) > 1e-9) return false;
  if (std::abs(c.eigen_lower - (c.a + c.profile_lambda)) > 1e-9) return false;
  if (static_cast<int>(c.path_degrees.size()) != c.depth) return false;
  double lp = 0.0;
  for (int d : c.path_degrees) lp -= std::log(static_cast<double>(d));
  const double lt = c.depth > 0 ? log_poisson_tail(
                                      *std::min_element(c.path_degrees.begin(), c.path_degrees.end()) * c.s,
                                      c.depth)
                                : 0.0;
  if (std::abs(lp - c.log_path_probability) > 1e-9 || std::abs(lt - c.log_time_probability) > 1e-9)
    return false;
  if (std::abs(c.waiting_bound - (lp + lt)) > 1e-9) return false;
  return std::abs(certificate_bound(c) - c.bound) <= 1e-9 * (1.0 + std::abs(c.bound));
}

RunOutput run_certificates(const ExperimentConfig& cfg) {
  cfg.validate();
  const int d_min = cfg.degree_law.min_degree();
  const QProfile profile =
      make_profile(homogeneous_tree(d_min, cfg.profile_radius + 1), cfg.profile_radius, cfg.rho, cfg.chi);
  const int graph_radius = cfg.radius + cfg.profile_radius + 1;

  struct Instance {
    bool planted = false;
    std::size_t graph_size = 0;
    std::vector<std::optional<LowerBoundCertificate>> certs;
    std::string not_found;
    std::vector<double> simulated, errors;
  };
  std::vector<Instance> inst(cfg.seeds);
  parallel_for(cfg.seeds, [&](std::size_t s) {
    const SeedStreams st = streams(cfg.seed, s);
    const RootedGraph g = gw_tree(cfg, graph_radius, st.graph);
    Potential xi = sample_double_exponential(g, cfg.rho, st.potential);
    Instance& I = inst[s];
    I.planted = s < cfg.planted;
    I.graph_size = g.size();
    if (I.planted) {
      // Raise xi on the first matching ball at depth ceil(l / 2).
      const double a = a_scale(static_cast<double>(ball(g, g.root(), cfg.radius).size()), cfg.rho);
      const auto depth = g.distances_from(g.root());
      const int target = (cfg.radius + 1) / 2;
      std::vector<VertexId> bv;
      std::vector<double> qv;
      for (VertexId z = 0; z < g.size(); ++z)
        if (depth[z] == target && match_profile(g, z, profile, bv, qv)) {
          for (std::size_t i = 0; i < bv.size(); ++i)
            xi.values[bv[i]] = std::max(xi.values[bv[i]], a + qv[i] + 0.05);
          break;
        }
    }
    SolverConfig solver = cfg.solver;
    solver.whole_graph = true;
    const MassCurve curve = total_mass_deterministic(g, xi, cfg.times, solver);
    I.simulated = curve.logU_over_t;
    I.errors = curve.error_estimate;
    for (std::size_t i = 0; i < cfg.times.size(); ++i) {
      try {
        auto c = find_lower_bound_certificate(g, xi, cfg.radius, profile, cfg.times[i], cfg.eps);
        c.simulated = curve.logU_over_t[i];
        c.solver_error = curve.error_estimate[i];
        c.consistent = c.bound <= c.simulated + c.solver_error + 1e-6;
        I.certs.emplace_back(std::move(c));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NotFound) throw;
        I.not_found = e.what();
        I.certs.emplace_back(std::nullopt);
      }
    }
  });

  RunOutput out;
  std::ostringstream csv;
  csv << "instance,planted,t,found,z,depth,depth_ratio,bound,simulated,solver_error,consistent,rechecked\n";
  nlohmann::json instances = nlohmann::json::array();
  std::size_t found = 0, violations = 0, recheck_failures = 0;
  std::vector<std::pair<double, double>> points;
  for (std::size_t s = 0; s < inst.size(); ++s) {
    const Instance& I = inst[s];
    nlohmann::json ij = {{"instance", s}, {"planted", I.planted}, {"graph_size", I.graph_size}};
    nlohmann::json certs = nlohmann::json::array();
    for (std::size_t i = 0; i < cfg.times.size(); ++i) {
      const auto& c = I.certs[i];
      csv << s << ',' << (I.planted ? 1 : 0) << ',' << format_double(cfg.times[i]) << ',';
      if (!c) {
        csv << "0,,,,," << format_double(I.simulated[i]) << ',' << format_double(I.errors[i]) << ",,\n";
        certs.push_back(nullptr);
        continue;
      }
      const bool rechecked = recheck_certificate(*c);
      ++found;
      if (!c->consistent) ++violations;
      if (!rechecked) ++recheck_failures;
      points.emplace_back(c->bound, c->simulated);
      csv << "1," << c->z << ',' << c->depth << ',' << format_double(c->depth_ratio) << ','
          << format_double(c->bound) << ',' << format_double(c->simulated) << ','
          << format_double(c->solver_error) << ',' << (c->consistent ? 1 : 0) << ',' << (rechecked ? 1 : 0)
          << '\n';
      certs.push_back(c->to_json());
    }
    ij["certificates"] = certs;
    if (!I.not_found.empty()) ij["search_coverage"] = I.not_found;
    instances.push_back(ij);
  }
  out.csv = csv.str();
  out.plots["bound_vs_simulated.dat"] = dat(points);
  out.property_violation = violations > 0 || recheck_failures > 0;
  out.report = {{"kind", std::string(to_string(cfg.kind))},
                {"config", cfg.to_json()},
                {"seed", cfg.seed},
                {"profile", profile.to_json()},
                {"instances", instances},
                {"found", found},
                {"violations", violations},
                {"recheck_failures", recheck_failures}};
  return out;
}

// ---------------------------------------------------------------------------
// Catalog, islands, coupling.

RunOutput run_chi_catalog(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& support = cfg.degree_law.support();
  const Theorem12Report rep =
      theorem12_check(cfg.degree_law.min_degree(), support, cfg.rho, cfg.radius, cfg.catalog_size,
                      cfg.seed, cfg.chi);
  RunOutput out;
  out.csv = rep.to_csv();
  std::vector<std::pair<double, double>> points;
  for (const auto& row : rep.rows) points.emplace_back(static_cast<double>(row.id), row.chi);
  out.plots["chi.dat"] = dat(points);
  out.property_violation = (rep.large_rho && !rep.minimal_is_min) || !rep.a9_lower || !rep.a9_upper;
  out.report = {{"kind", std::string(to_string(cfg.kind))},
                {"config", cfg.to_json()},
                {"seed", cfg.seed},
                {"catalog", rep.to_json()}};
  return out;
}

RunOutput run_islands(const ExperimentConfig& cfg) {
  cfg.validate();
  const BallSequence chi_seq = chi_estimate(cfg);
  struct SeedRows {
    double a_L = 0.0;
    std::size_t L_r = 0;
    std::vector<IslandRow> rows;
    std::vector<double> lambda;
  };
  std::vector<SeedRows> per(cfg.seeds);
  parallel_for(cfg.seeds, [&](std::size_t s) {
    const SeedStreams st = streams(cfg.seed, s);
    const RootedGraph g = gw_tree(cfg, cfg.radius, st.graph);
    const Potential xi = sample_double_exponential(g, cfg.rho, st.potential);
    const Ball b = ball(g, g.root(), cfg.radius);
    const IslandDecomposition d = decompose_islands(xi, b, cfg.landscape);
    const IslandReport stats = island_stats(d, g, cfg.landscape);
    per[s].a_L = d.a_L;
    per[s].L_r = d.L_r;
    per[s].rows = stats.rows;
    for (const auto& island : d.components) {
      const Hamiltonian h = assemble(g, island.vertices, xi.values);
      per[s].lambda.push_back(principal_eigenpair(h).lambda);
    }
  });
  RunOutput out;
  std::ostringstream csv;
  csv << "seed_index,island,size,pi_count,diameter,lambda,a_L,a_L_minus_lambda,bound_violation\n";
  std::size_t islands = 0, violations = 0;
  std::vector<std::pair<double, double>> points;
  for (std::size_t s = 0; s < per.size(); ++s)
    for (std::size_t i = 0; i < per[s].rows.size(); ++i) {
      const auto& row = per[s].rows[i];
      const double lambda = per[s].lambda[i];
      const bool violation = lambda > per[s].a_L - chi_seq.limit + cfg.eps;
      ++islands;
      if (violation) ++violations;
      points.emplace_back(static_cast<double>(row.size), per[s].a_L - lambda);
      csv << s << ',' << i << ',' << row.size << ',' << row.pi_count << ',' << row.diameter << ','
          << format_double(lambda) << ',' << format_double(per[s].a_L) << ','
          << format_double(per[s].a_L - lambda) << ',' << (violation ? 1 : 0) << '\n';
    }
  out.csv = csv.str();
  out.plots["gap_vs_size.dat"] = dat(points);
  out.report = {{"kind", std::string(to_string(cfg.kind))},
                {"config", cfg.to_json()},
                {"seed", cfg.seed},
                {"chi_est", chi_seq.limit},
                {"chi_sequence", chi_seq.to_json()},
                {"islands", islands},
                {"bound_violations", violations},
                {"violation_rate", islands ? static_cast<double>(violations) / islands : 0.0},
                {"note", "empirical check of lambda <= a_L - chi_est + eps per island"}};
  return out;
}

RunOutput run_coupling(const ExperimentConfig& cfg) {
  cfg.validate();
  const DegreeSequence ds = sequence_from_law(cfg.degree_law, cfg.n);
  GWSpec gw;
  gw.initial = cfg.degree_law;
  gw.general = size_biased_law(cfg.degree_law);
  gw.radius = cfg.coupling_radius;
  gw.enforce_bounded_degree = false;
  const CouplingReport rep = coupling_check(ds, gw, cfg.coupling_radius, cfg.trials, cfg.seed);
  RunOutput out;
  std::ostringstream csv;
  csv << "side,code,count\n";
  for (const auto& [code, count] : rep.graph_codes) csv << "graph," << code << ',' << count << '\n';
  for (const auto& [code, count] : rep.tree_codes) csv << "tree," << code << ',' << count << '\n';
  out.csv = csv.str();
  out.plots["frequency.dat"] = dat({{static_cast<double>(cfg.coupling_radius), rep.frequency}});
  out.report = {{"kind", std::string(to_string(cfg.kind))},
                {"config", cfg.to_json()},
                {"seed", cfg.seed},
                {"coupling", rep.to_json()}};
  return out;
}

RunOutput run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::LyapunovGW:
    case ExperimentKind::LyapunovCM: {
      const LyapunovReport rep =
          cfg.kind == ExperimentKind::LyapunovGW ? run_lyapunov_gw(cfg) : run_lyapunov_cm(cfg);
      RunOutput out;
      out.csv = rep.to_csv();
      std::vector<std::pair<double, double>> sim, theory, residual;
      for (const auto& r : rep.rows) {
        sim.emplace_back(r.t, r.simulated_mean);
        theory.emplace_back(r.t, r.theory);
        residual.emplace_back(r.t, r.residual_mean);
      }
      out.plots["simulated.dat"] = dat(sim);
      out.plots["theory.dat"] = dat(theory);
      out.plots["residual.dat"] = dat(residual);
      out.property_violation = !rep.all_finite;
      out.report = {{"kind", std::string(to_string(cfg.kind))},
                    {"config", cfg.to_json()},
                    {"seed", cfg.seed},
                    {"lyapunov", rep.to_json()}};
      return out;
    }
    case ExperimentKind::ChiCatalog: return run_chi_catalog(cfg);
    case ExperimentKind::Islands: return run_islands(cfg);
    case ExperimentKind::Coupling: return run_coupling(cfg);
    case ExperimentKind::LowerBoundCertificate: return run_certificates(cfg);
  }
  throw Error(ErrorCode::InvalidInput, "unknown experiment kind");
}

}  // namespace pam
