#include "pam/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "pam/error.hpp"

namespace pam {

Hamiltonian::Hamiltonian(const RootedGraph& g, std::vector<VertexId> domain, std::vector<double> q)
    : graph_(&g), domain_(std::move(domain)), q_(std::move(q)) {
  if (domain_.empty()) throw Error(ErrorCode::EmptyDomain, "Hamiltonian domain is empty");
  if (q_.size() != domain_.size())
    throw Error(ErrorCode::InvalidInput, "potential size does not match domain");
  lookup_.reserve(domain_.size());
  for (std::size_t i = 0; i < domain_.size(); ++i) {
    if (domain_[i] >= g.size()) throw Error(ErrorCode::InvalidInput, "domain vertex not in graph");
    lookup_.emplace_back(domain_[i], i);
  }
  std::sort(lookup_.begin(), lookup_.end());
  for (std::size_t i = 1; i < lookup_.size(); ++i)
    if (lookup_[i].first == lookup_[i - 1].first)
      throw Error(ErrorCode::InvalidInput, "repeated vertex in domain");
  row_.assign(domain_.size() + 1, 0);
  out_deg_.resize(domain_.size());
  for (std::size_t i = 0; i < domain_.size(); ++i) {
    int inside = 0;
    for (VertexId w : g.neighbors(domain_[i])) {
      const auto j = local_index(w);
      if (j >= 0) {
        col_.push_back(static_cast<std::uint32_t>(j));
        ++inside;
      }
    }
    row_[i + 1] = col_.size();
    out_deg_[i] = g.degree(domain_[i]) - inside;
  }
  set_q(q_);
}

void Hamiltonian::set_q(std::vector<double> q) {
  if (q.size() != domain_.size())
    throw Error(ErrorCode::InvalidInput, "potential size does not match domain");
  q_ = std::move(q);
  diag_.resize(domain_.size());
  for (std::size_t i = 0; i < domain_.size(); ++i)
    diag_[i] = q_[i] - static_cast<double>(graph_->degree(domain_[i]));
}

double Hamiltonian::max_q() const { return *std::max_element(q_.begin(), q_.end()); }

std::ptrdiff_t Hamiltonian::local_index(VertexId v) const {
  const auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::make_pair(v, std::size_t{0}));
  if (it == lookup_.end() || it->first != v) return -1;
  return static_cast<std::ptrdiff_t>(it->second);
}

void Hamiltonian::apply(const double* x, double* y) const {
  const std::size_t n = domain_.size();
  for (std::size_t i = 0; i < n; ++i) {
    double s = diag_[i] * x[i];
    for (std::size_t k = row_[i]; k < row_[i + 1]; ++k) s += x[col_[k]];
    y[i] = s;
  }
}

Eigen::MatrixXd Hamiltonian::dense() const {
  const auto n = static_cast<Eigen::Index>(domain_.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = diag_[static_cast<std::size_t>(i)];
    for (auto j : local_neighbors(static_cast<std::size_t>(i))) m(i, j) = 1.0;
  }
  return m;
}

std::vector<std::vector<std::size_t>> Hamiltonian::components() const {
  const std::size_t n = domain_.size();
  std::vector<char> seen(n, 0);
  std::vector<std::vector<std::size_t>> comps;
  // Visit starting points in increasing graph-vertex order.
  for (const auto& [v, start] : lookup_) {
    if (seen[start]) continue;
    std::vector<std::size_t> comp{start};
    seen[start] = 1;
    for (std::size_t head = 0; head < comp.size(); ++head)
      for (auto j : local_neighbors(comp[head]))
        if (!seen[j]) {
          seen[j] = 1;
          comp.push_back(j);
        }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

Hamiltonian Hamiltonian::restricted(const std::vector<std::size_t>& local) const {
  std::vector<VertexId> dom;
  std::vector<double> q;
  for (auto i : local) {
    dom.push_back(domain_[i]);
    q.push_back(q_[i]);
  }
  return Hamiltonian(*graph_, std::move(dom), std::move(q));
}

Hamiltonian assemble(const RootedGraph& g, std::span<const VertexId> domain,
                     std::span<const double> field) {
  std::vector<double> q;
  q.reserve(domain.size());
  for (VertexId v : domain) {
    if (v >= field.size()) throw Error(ErrorCode::InvalidInput, "field shorter than graph");
    q.push_back(field[v]);
  }
  return Hamiltonian(g, std::vector<VertexId>(domain.begin(), domain.end()), std::move(q));
}

namespace {

void make_nonnegative(Eigen::VectorXd& phi) {
  if (phi.sum() < 0) phi = -phi;
  phi = phi.cwiseAbs();
  phi /= phi.norm();
}

double residual_norm(const Hamiltonian& h, const Eigen::VectorXd& phi, double lambda) {
  Eigen::VectorXd hp(phi.size());
  h.apply(phi.data(), hp.data());
  return (hp - lambda * phi).norm();
}

Eigenpair dense_pair(const Hamiltonian& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.dense());
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "dense eigensolver failed");
  Eigenpair p;
  const auto last = es.eigenvalues().size() - 1;
  p.lambda = es.eigenvalues()(last);
  p.phi = es.eigenvectors().col(last);
  make_nonnegative(p.phi);
  p.residual = residual_norm(h, p.phi, p.lambda);
  p.iterations = 1;
  return p;
}

// Explicitly restarted Lanczos on H + shift I with full reorthogonalization.
// The shift makes the operator positive definite; Ritz values are shifted back.
Eigenpair lanczos_pair(const Hamiltonian& h, const EigenOptions& opts) {
  const auto n = static_cast<Eigen::Index>(h.size());
  const Eigen::Index m = std::min<Eigen::Index>(std::max(opts.krylov_dim, 2), n);
  const double shift = static_cast<double>(h.graph().d_max()) - *std::min_element(h.q().begin(), h.q().end()) + 1.0;
  Eigen::VectorXd v0;
  if (opts.start != nullptr && opts.start->size() == n && opts.start->norm() > 0) {
    v0 = opts.start->cwiseAbs();
    // Keep every entry positive so the start overlaps the Perron vector.
    v0.array() += 1e-8 * v0.maxCoeff();
  } else {
    v0 = Eigen::VectorXd::Ones(n);
  }
  Eigen::MatrixXd V(n, m + 1);
  Eigen::VectorXd alpha(m), beta(m), w(n);
  Eigenpair best;
  best.residual = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < opts.max_restarts; ++restart) {
    V.col(0) = v0 / v0.norm();
    Eigen::Index k = m;
    for (Eigen::Index j = 0; j < m; ++j) {
      h.apply(V.col(j).data(), w.data());
      w += shift * V.col(j);
      alpha(j) = V.col(j).dot(w);
      for (int pass = 0; pass < 2; ++pass) w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
      beta(j) = w.norm();
      if (beta(j) <= 1e-13 * std::abs(alpha(j)) + 1e-300) {
        k = j + 1;
        break;
      }
      V.col(j + 1) = w / beta(j);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
    if (k == 1) {
      Eigen::MatrixXd one(1, 1);
      one(0, 0) = alpha(0);
      tri.compute(one);
    } else {
      tri.computeFromTridiagonal(alpha.head(k), beta.head(k - 1));
    }
    const Eigen::Index top = k - 1;
    Eigen::VectorXd x = V.leftCols(k) * tri.eigenvectors().col(top);
    make_nonnegative(x);
    const double theta = tri.eigenvalues()(top) - shift;
    const double res = residual_norm(h, x, theta);
    if (res < best.residual) {
      best.lambda = theta;
      best.phi = x;
      best.residual = res;
    }
    best.iterations = restart + 1;
    if (res <= opts.tol) return best;
    v0 = x;
  }
  throw Error(ErrorCode::NoConvergence,
              "Lanczos stopped after " + std::to_string(opts.max_restarts) +
                  " restarts with residual " + std::to_string(best.residual));
}

Eigenpair connected_pair(const Hamiltonian& h, const EigenOptions& opts) {
  const bool dense = opts.method == EigenOptions::Method::Dense ||
                     (opts.method == EigenOptions::Method::Auto && h.size() <= kDenseLimit);
  if (h.size() == 1) {
    Eigenpair p;
    p.lambda = h.diagonal()[0];
    p.phi = Eigen::VectorXd::Ones(1);
    p.iterations = 0;
    return p;
  }
  return dense ? dense_pair(h) : lanczos_pair(h, opts);
}

}  // namespace

Eigenpair principal_eigenpair(const Hamiltonian& h, const EigenOptions& opts) {
  const auto comps = h.components();
  if (comps.size() == 1) return connected_pair(h, opts);
  Eigenpair best;
  std::size_t best_comp = 0;
  std::vector<double> values;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    EigenOptions sub = opts;
    Eigen::VectorXd start_sub;
    if (opts.start != nullptr && opts.start->size() == static_cast<Eigen::Index>(h.size())) {
      start_sub.resize(static_cast<Eigen::Index>(comps[c].size()));
      for (std::size_t i = 0; i < comps[c].size(); ++i)
        start_sub(static_cast<Eigen::Index>(i)) = (*opts.start)(static_cast<Eigen::Index>(comps[c][i]));
      sub.start = &start_sub;
    } else {
      sub.start = nullptr;
    }
    const Eigenpair p = connected_pair(h.restricted(comps[c]), sub);
    values.push_back(p.lambda);
    if (c == 0 || p.lambda > best.lambda) {
      best_comp = c;
      best.lambda = p.lambda;
      best.residual = p.residual;
      best.iterations = p.iterations;
      best.phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(h.size()));
      for (std::size_t i = 0; i < comps[c].size(); ++i)
        best.phi(static_cast<Eigen::Index>(comps[c][i])) = p.phi(static_cast<Eigen::Index>(i));
    }
  }
  for (std::size_t c = 0; c < values.size(); ++c)
    if (c != best_comp && std::abs(values[c] - best.lambda) <= 1e-9 * (1.0 + std::abs(best.lambda)))
      best.degenerate = true;
  return best;
}

nlohmann::json Eigenpair::to_json(const Hamiltonian& h) const {
  nlohmann::json phi_map = nlohmann::json::object();
  nlohmann::json q_map = nlohmann::json::object();
  for (std::size_t i = 0; i < h.size(); ++i) {
    phi_map[std::to_string(h.domain()[i])] = phi(static_cast<Eigen::Index>(i));
    q_map[std::to_string(h.domain()[i])] = h.q()[i];
  }
  return {{"domain", h.domain()}, {"q", q_map},         {"lambda", lambda},
          {"phi", phi_map},       {"residual", residual}, {"degenerate", degenerate}};
}

Spectrum full_spectrum(const Hamiltonian& h) {
  if (h.size() > kDenseLimit)
    throw Error(ErrorCode::DomainTooLarge,
                "domain of size " + std::to_string(h.size()) + " exceeds dense limit");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.dense());
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "dense eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

Eigen::VectorXd spectral_solution(const Hamiltonian& h, std::size_t y_local, double t) {
  if (y_local >= h.size()) throw Error(ErrorCode::InvalidInput, "start vertex not in domain");
  if (t < 0) throw Error(ErrorCode::InvalidInput, "time must be >= 0");
  const Spectrum s = full_spectrum(h);
  const auto y = static_cast<Eigen::Index>(y_local);
  Eigen::VectorXd coeff(s.values.size());
  for (Eigen::Index k = 0; k < s.values.size(); ++k)
    coeff(k) = std::exp(t * s.values(k)) * s.vectors(y, k);
  return s.vectors * coeff;
}

SandwichReport eigenvalue_sandwich_check(const RootedGraph& g, std::span<const double> field,
                                         std::span<const VertexId> Lambda,
                                         std::span<const VertexId> Gamma) {
  if (Gamma.empty()) throw Error(ErrorCode::EmptyDomain, "Gamma is empty");
  std::vector<VertexId> lam(Lambda.begin(), Lambda.end());
  std::sort(lam.begin(), lam.end());
  for (VertexId v : Gamma)
    if (!std::binary_search(lam.begin(), lam.end(), v))
      throw Error(ErrorCode::InvalidInput, "Gamma must be a subset of Lambda");
  const Hamiltonian hg = assemble(g, Gamma, field);
  const Hamiltonian hl = assemble(g, Lambda, field);
  SandwichReport r;
  r.lower = hg.max_q() - g.d_max();
  r.upper = hl.max_q();
  r.lambda_gamma = principal_eigenpair(hg).lambda;
  r.lambda_lambda = principal_eigenpair(hl).lambda;
  constexpr double slack = 1e-9;
  r.holds = r.lower <= r.lambda_gamma + slack && r.lambda_gamma <= r.lambda_lambda + slack &&
            r.lambda_lambda <= r.upper + slack;
  return r;
}

}  // namespace pam
