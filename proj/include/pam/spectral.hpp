#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pam/graph.hpp"

namespace pam {

/// Domain size up to which dense eigensolvers are used.
inline constexpr std::size_t kDenseLimit = 512;

/// Anderson operator Delta_G + q restricted to a domain with zero Dirichlet
/// data outside. Row x has diagonal q(x) - deg_G(x) and +1 for each neighbour
/// inside the domain. Indices are positions in `domain`.
class Hamiltonian {
 public:
  /// `q` is given per domain position. Throws EmptyDomain, InvalidInput.
  Hamiltonian(const RootedGraph& g, std::vector<VertexId> domain, std::vector<double> q);

  std::size_t size() const { return domain_.size(); }
  const RootedGraph& graph() const { return *graph_; }
  const std::vector<VertexId>& domain() const { return domain_; }
  const std::vector<double>& q() const { return q_; }
  const std::vector<double>& diagonal() const { return diag_; }
  /// deg_G(x) minus the number of neighbours inside the domain.
  const std::vector<int>& out_degree() const { return out_deg_; }
  std::span<const std::uint32_t> local_neighbors(std::size_t i) const {
    return {col_.data() + row_[i], row_[i + 1] - row_[i]};
  }
  double max_q() const;
  /// Position of a graph vertex in the domain, or -1.
  std::ptrdiff_t local_index(VertexId v) const;

  /// Replaces the potential keeping the domain.
  void set_q(std::vector<double> q);

  /// y = H x (fixed summation order).
  void apply(const double* x, double* y) const;
  Eigen::MatrixXd dense() const;

  /// Connected components of the domain as lists of local indices, ordered by
  /// their smallest graph vertex id.
  std::vector<std::vector<std::size_t>> components() const;

  /// Sub-operator on a subset of local indices (in the given order).
  Hamiltonian restricted(const std::vector<std::size_t>& local) const;

 private:
  const RootedGraph* graph_;
  std::vector<VertexId> domain_;
  std::vector<double> q_;
  std::vector<double> diag_;
  std::vector<int> out_deg_;
  std::vector<std::size_t> row_;
  std::vector<std::uint32_t> col_;
  std::vector<std::pair<VertexId, std::size_t>> lookup_;  // sorted (vertex, position)
};

/// q(x) = field[x] for x in the domain.
Hamiltonian assemble(const RootedGraph& g, std::span<const VertexId> domain,
                     std::span<const double> field);

struct Eigenpair {
  double lambda = 0.0;
  Eigen::VectorXd phi;  // per domain position, unit norm, nonnegative
  double residual = 0.0;
  int iterations = 0;
  /// Set when several components of a disconnected domain share the top value.
  bool degenerate = false;

  nlohmann::json to_json(const Hamiltonian& h) const;
};

struct EigenOptions {
  enum class Method { Auto, Dense, Krylov };
  Method method = Method::Auto;
  double tol = 1e-10;       // on ||H phi - lambda phi||
  int krylov_dim = 40;
  int max_restarts = 2000;
  const Eigen::VectorXd* start = nullptr;  // warm start (Krylov only)
};

/// Largest eigenvalue with a nonnegative unit eigenvector. Dense up to
/// kDenseLimit unless Krylov is requested; otherwise restarted Lanczos with full
/// reorthogonalization on the shifted operator. For a disconnected domain the
/// component with the largest eigenvalue wins, ties going to the component
/// with the smallest vertex id. Throws NoConvergence.
Eigenpair principal_eigenpair(const Hamiltonian& h, const EigenOptions& opts = {});

struct Spectrum {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns
};

/// Throws DomainTooLarge above kDenseLimit.
Spectrum full_spectrum(const Hamiltonian& h);

/// u(., t) for the initial condition 1_y, by eigen-decomposition. Throws
/// DomainTooLarge.
Eigen::VectorXd spectral_solution(const Hamiltonian& h, std::size_t y_local, double t);

struct SandwichReport {
  double lower = 0.0;   // max_Gamma q - d_max
  double lambda_gamma = 0.0;
  double lambda_lambda = 0.0;
  double upper = 0.0;   // max_Lambda q
  bool holds = false;
};

/// max_Gamma q - d_max <= lambda_Gamma <= lambda_Lambda <= max_Lambda q with
/// slack 1e-9. Gamma must be a nonempty subset of Lambda.
SandwichReport eigenvalue_sandwich_check(const RootedGraph& g, std::span<const double> field,
                                         std::span<const VertexId> Lambda,
                                         std::span<const VertexId> Gamma);

}  // namespace pam
