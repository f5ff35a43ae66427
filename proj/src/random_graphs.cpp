#include "pam/random_graphs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pam/error.hpp"

namespace pam {

DegreeLaw::DegreeLaw(std::vector<int> support, std::vector<double> probabilities) {
  if (support.empty() || support.size() != probabilities.size())
    throw Error(ErrorCode::InvalidInput, "degree law needs matching nonempty support/probabilities");
  double total = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i] < 1) throw Error(ErrorCode::InvalidInput, "degrees must be >= 1");
    if (i > 0 && support[i] <= support[i - 1])
      throw Error(ErrorCode::InvalidInput, "support must be sorted and distinct");
    if (!(probabilities[i] >= 0.0)) throw Error(ErrorCode::InvalidInput, "negative probability");
    total += probabilities[i];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidInput, "probabilities sum to " + std::to_string(total));
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (probabilities[i] == 0.0) continue;
    support_.push_back(support[i]);
    probs_.push_back(probabilities[i]);
  }
  double c = 0.0;
  for (double p : probs_) cdf_.push_back(c += p);
  cdf_.back() = 1.0;
}

DegreeLaw DegreeLaw::constant(int d) { return DegreeLaw({d}, {1.0}); }

DegreeLaw DegreeLaw::uniform(std::vector<int> support) {
  std::sort(support.begin(), support.end());
  const std::vector<double> p(support.size(), 1.0 / static_cast<double>(support.size()));
  // Rounding of 1/k can leave the sum a few ulps from 1; that is within tolerance.
  return DegreeLaw(std::move(support), p);
}

double DegreeLaw::mean() const {
  return expect([](int k) { return static_cast<double>(k); });
}

double DegreeLaw::probability(int k) const {
  const auto it = std::lower_bound(support_.begin(), support_.end(), k);
  if (it == support_.end() || *it != k) return 0.0;
  return probs_[static_cast<std::size_t>(it - support_.begin())];
}

int DegreeLaw::sample(CounterRng& rng) const {
  if (is_constant()) return support_.front();
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()),
                                         support_.size() - 1);
  return support_[idx];
}

nlohmann::json DegreeLaw::to_json() const {
  return {{"support", support_}, {"probabilities", probs_}};
}

DegreeLaw DegreeLaw::from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return constant(j.get<int>());
  if (j.contains("constant")) return constant(j.at("constant").get<int>());
  if (j.contains("uniform")) return uniform(j.at("uniform").get<std::vector<int>>());
  return DegreeLaw(j.at("support").get<std::vector<int>>(),
                   j.at("probabilities").get<std::vector<double>>());
}

void validate(const GWSpec& spec) {
  if (spec.radius < 0) throw Error(ErrorCode::InvalidInput, "radius must be >= 0");
  if (!spec.enforce_bounded_degree) return;
  if (spec.general.min_degree() < 2)
    throw Error(ErrorCode::InvalidInput, "min supp(D_g) must be >= 2");
  if (!(spec.general.mean() > 2.0)) throw Error(ErrorCode::InvalidInput, "E[D_g] must exceed 2");
}

RootedGraph sample_gw_tree(const GWSpec& spec) {
  validate(spec);
  CounterRng rng(spec.seed);
  std::vector<std::vector<VertexId>> adj(1);
  std::vector<int> depth{0};
  for (std::size_t head = 0; head < adj.size(); ++head) {
    if (depth[head] >= spec.radius) continue;
    const int kids = head == 0 ? spec.initial.sample(rng) : spec.general.sample(rng) - 1;
    if (adj.size() + static_cast<std::size_t>(kids) > spec.vertex_budget)
      throw Error(ErrorCode::VertexBudgetExceeded,
                  "GW tree exceeds vertex budget " + std::to_string(spec.vertex_budget));
    for (int c = 0; c < kids; ++c) {
      const auto w = static_cast<VertexId>(adj.size());
      adj.emplace_back();
      depth.push_back(depth[head] + 1);
      adj[head].push_back(w);
      adj[w].push_back(static_cast<VertexId>(head));
    }
  }
  return RootedGraph(std::move(adj), 0, std::max(1, spec.d_max()));
}

double volume_growth_rate(const DegreeLaw& general) {
  const double m = general.expect([](int k) { return k - 1.0; });
  if (!(m > 1.0))
    throw Error(ErrorCode::NonExpanding, "E[D_g - 1] = " + std::to_string(m) + " <= 1");
  return std::log(m);
}

DegreeLaw size_biased_law(const DegreeLaw& law) {
  const double mean = law.mean();
  std::vector<double> p;
  for (int k : law.support()) p.push_back(k * law.probability(k) / mean);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x /= total;
  return DegreeLaw(law.support(), p);
}

double nu(const DegreeLaw& law) {
  return law.expect([](int k) { return k * (k - 1.0); }) / law.mean();
}

double simplicity_probability_limit(const DegreeLaw& law) {
  const double v = nu(law);
  return std::exp(-v / 2.0 - v * v / 4.0);
}

long long DegreeSequence::total_degree() const {
  return std::accumulate(degrees.begin(), degrees.end(), 0LL);
}

DegreeLaw DegreeSequence::empirical_law() const {
  if (degrees.empty()) throw Error(ErrorCode::InvalidInput, "empty degree sequence");
  std::map<int, std::size_t> counts;
  for (int d : degrees) ++counts[d];
  std::vector<int> support;
  std::vector<double> p;
  for (const auto& [d, c] : counts) {
    support.push_back(d);
    p.push_back(static_cast<double>(c) / static_cast<double>(degrees.size()));
  }
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x /= total;
  return DegreeLaw(support, p);
}

DegreeSequence sequence_from_law(const DegreeLaw& law, std::size_t n) {
  const auto& sup = law.support();
  const auto& pr = law.probabilities();
  std::vector<std::size_t> count(sup.size());
  std::vector<std::pair<double, std::size_t>> remainder;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < sup.size(); ++i) {
    const double exact = pr[i] * static_cast<double>(n);
    count[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += count[i];
    remainder.emplace_back(-(exact - std::floor(exact)), i);
  }
  std::sort(remainder.begin(), remainder.end());
  for (std::size_t j = 0; assigned < n; ++j, ++assigned) ++count[remainder[j % sup.size()].second];
  DegreeSequence ds;
  for (std::size_t i = 0; i < sup.size(); ++i) ds.degrees.insert(ds.degrees.end(), count[i], sup[i]);
  if (ds.total_degree() % 2 != 0) {
    // Lower one vertex of the largest degree by one.
    auto it = std::max_element(ds.degrees.begin(), ds.degrees.end());
    if (*it <= 1) ++*it;
    else --*it;
  }
  return ds;
}

double total_variation(const DegreeLaw& a, const DegreeLaw& b) {
  std::vector<int> keys = a.support();
  keys.insert(keys.end(), b.support().begin(), b.support().end());
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  double s = 0.0;
  for (int k : keys) s += std::abs(a.probability(k) - b.probability(k));
  return 0.5 * s;
}

double phi_n(const DegreeSequence& ds, const DegreeLaw& limit) {
  const double inv_n = 1.0 / static_cast<double>(ds.n());
  return 1.0 / std::max(inv_n, total_variation(ds.empirical_law(), limit));
}

DegreeSequence load_degree_sequence(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path);
  DegreeSequence ds;
  const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  if (is_json) {
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidInput, path + ": " + e.what());
    }
    const auto& arr = j.is_array() ? j : j.at("degrees");
    ds.degrees = arr.get<std::vector<int>>();
  } else {
    std::string line;
    while (std::getline(in, line)) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      try {
        ds.degrees.push_back(std::stoi(line.substr(first)));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidInput, path + ": bad degree line '" + line + "'");
      }
    }
  }
  for (int d : ds.degrees)
    if (d < 0) throw Error(ErrorCode::InvalidInput, "negative degree in " + path);
  return ds;
}

std::vector<std::vector<VertexId>> Multigraph::adjacency() const {
  std::vector<std::vector<VertexId>> adj(n);
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    if (a != b) adj[b].push_back(a);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());
  return adj;
}

bool Multigraph::connected() const {
  if (n == 0) return false;
  const auto adj = adjacency();
  std::vector<char> seen(n, 0);
  std::vector<VertexId> stack{root};
  seen[root] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const VertexId v = stack.back();
    stack.pop_back();
    for (VertexId w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
  }
  return count == n;
}

InducedSubgraph Multigraph::root_component(int d_max) const {
  if (!simple()) throw Error(ErrorCode::InvalidInput, "root_component needs a simple graph");
  auto adj = adjacency();
  std::vector<char> seen(n, 0);
  std::vector<VertexId> order{root};
  seen[root] = 1;
  for (std::size_t head = 0; head < order.size(); ++head)
    for (VertexId w : adj[order[head]])
      if (!seen[w]) {
        seen[w] = 1;
        order.push_back(w);
      }
  std::vector<std::int64_t> local(n, -1);
  for (std::size_t i = 0; i < order.size(); ++i) local[order[i]] = static_cast<std::int64_t>(i);
  std::vector<std::vector<VertexId>> sub(order.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    for (VertexId w : adj[order[i]]) sub[i].push_back(static_cast<VertexId>(local[w]));
  return {RootedGraph(std::move(sub), 0, d_max), std::move(order)};
}

nlohmann::json Multigraph::to_json() const {
  nlohmann::json e = nlohmann::json::array();
  for (const auto& [a, b] : edges) e.push_back({a, b});
  return {{"n", n}, {"root", root}, {"edges", e}, {"loops", loops}, {"multi_edges", multi_edges}};
}

nlohmann::json SampleReport::to_json() const {
  return {{"attempts", attempts}, {"simple", simple}, {"connected", connected}};
}

namespace {

struct HalfEdges {
  std::vector<VertexId> owner;
  std::vector<std::size_t> offset;  // per-vertex slot ranges for partner lists
};

HalfEdges half_edges(const DegreeSequence& ds) {
  if (ds.n() == 0) throw Error(ErrorCode::InvalidInput, "empty degree sequence");
  if (ds.total_degree() % 2 != 0)
    throw Error(ErrorCode::OddTotalDegree,
                "total degree " + std::to_string(ds.total_degree()) + " is odd");
  HalfEdges h;
  h.offset.assign(ds.n() + 1, 0);
  for (std::size_t v = 0; v < ds.n(); ++v) {
    if (ds.degrees[v] < 0) throw Error(ErrorCode::InvalidInput, "negative degree");
    h.owner.insert(h.owner.end(), static_cast<std::size_t>(ds.degrees[v]),
                   static_cast<VertexId>(v));
    h.offset[v + 1] = h.offset[v] + static_cast<std::size_t>(ds.degrees[v]);
  }
  return h;
}

// Pairs half-edges by a sequential Fisher-Yates pass: position i+1 receives a
// uniformly chosen remaining half-edge and (h[i], h[i+1]) become a pair. The
// result is a uniform perfect matching. With `abort_on_defect` the pass stops
// at the first loop or repeated pair and returns false.
bool match(const HalfEdges& base, CounterRng& rng, bool abort_on_defect, Multigraph& out) {
  std::vector<VertexId> h = base.owner;
  const std::size_t total = h.size();
  std::vector<VertexId> partners(total);
  std::vector<std::size_t> filled(base.offset.size() - 1, 0);
  out.edges.clear();
  out.edges.reserve(total / 2);
  out.loops = 0;
  out.multi_edges = 0;
  for (std::size_t i = 0; i + 1 < total; i += 2) {
    const std::size_t j = i + 1 + rng.below(total - i - 1);
    std::swap(h[i + 1], h[j]);
    const VertexId a = h[i];
    const VertexId b = h[i + 1];
    bool defect = false;
    if (a == b) {
      ++out.loops;
      defect = true;
    } else {
      const auto begin = partners.begin() + static_cast<std::ptrdiff_t>(base.offset[a]);
      const auto end = begin + static_cast<std::ptrdiff_t>(filled[a]);
      if (std::find(begin, end, b) != end) {
        ++out.multi_edges;
        defect = true;
      }
    }
    if (defect && abort_on_defect) return false;
    partners[base.offset[a] + filled[a]++] = b;
    if (a != b) partners[base.offset[b] + filled[b]++] = a;
    out.edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  return out.simple();
}

}  // namespace

std::pair<Multigraph, SampleReport> sample_configuration_model(const DegreeSequence& ds,
                                                               std::uint64_t seed) {
  const HalfEdges h = half_edges(ds);
  CounterRng rng(seed);
  Multigraph g;
  g.n = ds.n();
  g.root = static_cast<VertexId>(rng.below(g.n));
  match(h, rng, false, g);
  SampleReport rep;
  rep.attempts = 1;
  rep.simple = g.simple();
  rep.connected = g.connected();
  return {std::move(g), rep};
}

std::pair<Multigraph, SampleReport> sample_uniform_simple_graph(const DegreeSequence& ds,
                                                                std::uint64_t seed,
                                                                std::size_t max_attempts,
                                                                bool require_connected) {
  const HalfEdges h = half_edges(ds);
  CounterRng rng(seed);
  Multigraph g;
  g.n = ds.n();
  g.root = static_cast<VertexId>(rng.below(g.n));
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    if (!match(h, rng, true, g)) continue;
    const bool connected = g.connected();
    if (require_connected && !connected) continue;
    SampleReport rep;
    rep.attempts = attempt;
    rep.simple = true;
    rep.connected = connected;
    return {std::move(g), rep};
  }
  throw Error(ErrorCode::MaxAttemptsExceeded,
              "no simple sample in " + std::to_string(max_attempts) + " attempts");
}

namespace {

// Canonical code of the radius-m ball around `root` in a simple adjacency.
std::string ball_code_in(const std::vector<std::vector<VertexId>>& adj, VertexId root, int m,
                         int d_max) {
  std::vector<VertexId> order{root};
  std::map<VertexId, std::pair<VertexId, int>> local;  // old -> (new, depth)
  local[root] = {0, 0};
  for (std::size_t head = 0; head < order.size(); ++head) {
    const VertexId v = order[head];
    const int dv = local[v].second;
    if (dv >= m) continue;
    for (VertexId w : adj[v])
      if (!local.count(w)) {
        local[w] = {static_cast<VertexId>(order.size()), dv + 1};
        order.push_back(w);
      }
  }
  std::vector<std::vector<VertexId>> sub(order.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    for (VertexId w : adj[order[i]]) {
      const auto it = local.find(w);
      if (it != local.end()) sub[i].push_back(it->second.first);
    }
  const RootedGraph g(std::move(sub), 0, std::max(1, d_max));
  return ball_code(ball(g, 0, m));
}

}  // namespace

CouplingReport coupling_check(const DegreeSequence& ds, const GWSpec& gw, int m,
                              std::size_t trials, std::uint64_t seed, std::size_t max_attempts) {
  if (m < 0) throw Error(ErrorCode::InvalidInput, "radius must be >= 0");
  if (trials == 0) throw Error(ErrorCode::InvalidInput, "trials must be positive");
  CouplingReport rep;
  rep.radius = m;
  rep.trials = trials;
  rep.log_phi_n = std::log(phi_n(ds, gw.initial));
  const CounterRng master(seed);
  int d_max = gw.d_max();
  for (int d : ds.degrees) d_max = std::max(d_max, d);
  std::size_t trees = 0;
  for (std::size_t k = 0; k < trials; ++k) {
    const std::uint64_t graph_seed = master.split(2 * k)();
    const std::uint64_t tree_seed = master.split(2 * k + 1)();
    auto [g, sample] = sample_uniform_simple_graph(ds, graph_seed, max_attempts);
    const std::string gcode = ball_code_in(g.adjacency(), g.root, m, d_max);
    GWSpec spec = gw;
    spec.radius = m;
    spec.seed = tree_seed;
    const RootedGraph t = sample_gw_tree(spec);
    const std::string tcode = ball_code(ball(t, t.root(), m));
    if (gcode.rfind("cyc", 0) != 0) ++trees;
    if (gcode == tcode) ++rep.isomorphic;
    ++rep.graph_codes[gcode];
    ++rep.tree_codes[tcode];
  }
  const double n = static_cast<double>(trials);
  rep.frequency = static_cast<double>(rep.isomorphic) / n;
  rep.std_error = std::sqrt(rep.frequency * (1.0 - rep.frequency) / n);
  rep.tree_fraction = static_cast<double>(trees) / n;
  double tv = 0.0;
  for (const auto& [code, c] : rep.graph_codes) {
    const auto it = rep.tree_codes.find(code);
    const double other = it == rep.tree_codes.end() ? 0.0 : static_cast<double>(it->second);
    tv += std::abs(static_cast<double>(c) - other);
  }
  for (const auto& [code, c] : rep.tree_codes)
    if (!rep.graph_codes.count(code)) tv += static_cast<double>(c);
  rep.tv_estimate = 0.5 * tv / n;
  return rep;
}

nlohmann::json CouplingReport::to_json() const {
  return {{"radius", radius},         {"trials", trials},
          {"isomorphic", isomorphic}, {"frequency", frequency},
          {"std_error", std_error},   {"tree_fraction", tree_fraction},
          {"tv_estimate", tv_estimate}, {"log_phi_n", log_phi_n},
          {"graph_codes", graph_codes}, {"tree_codes", tree_codes}};
}

}  // namespace pam
