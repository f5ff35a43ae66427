#include <doctest.h>

#include <cmath>

#include "pam/error.hpp"
#include "pam/experiments.hpp"
#include "pam/rng.hpp"

using namespace pam;

namespace {

ExperimentConfig parse(const char* text) { return ExperimentConfig::from_json(nlohmann::json::parse(text)); }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("config parsing, validation and round trip") {
  const auto cfg = parse(R"({"kind": "lyapunov-gw", "times": [1, 2], "seeds": 3, "seed": 9,
                             "solver": {"c": 0.5}, "landscape": {"A": 0.5}})");
  CHECK(cfg.kind == ExperimentKind::LyapunovGW);
  CHECK(cfg.solver.c == 0.5);
  CHECK(cfg.landscape.A == 0.5);
  const auto again = ExperimentConfig::from_json(cfg.to_json());
  CHECK(again.to_json() == cfg.to_json());

  CHECK(code_of([] { parse(R"({"kind": "lyapunov-gw", "times": [0]})"); }) == ErrorCode::InvalidInput);
  CHECK(code_of([] { parse(R"({"kind": "lyapunov-gw", "colour": 1})"); }) == ErrorCode::InvalidInput);
  CHECK(code_of([] { parse(R"({"kind": "nope"})"); }) == ErrorCode::InvalidInput);
  CHECK(code_of([] { parse(R"({"kind": "islands", "rho": "one"})"); }) == ErrorCode::InvalidInput);
  CHECK(code_of([] { parse(R"({"kind": "islands", "solver": {"speed": 2}})"); }) == ErrorCode::InvalidInput);
}

TEST_CASE("theory curve terms") {
  CHECK(loglog_clamped(2.0) == 1.0);
  CHECK(loglog_clamped(100.0) == doctest::Approx(std::log(std::log(100.0))));
  const double theta = std::log(2.0);
  CHECK(theory_leading(1.0, theta, 8.0) ==
        doctest::Approx(std::log(theta * 8.0 / std::log(std::log(8.0))) - 1.0).epsilon(1e-15));
  CHECK(theory_leading(2.0, theta, 1.0) == doctest::Approx(2.0 * std::log(2.0 * theta) - 2.0));
}

TEST_CASE("Poisson tail in log space") {
  for (double mu : {0.01, 0.5, 3.0, 40.0})
    for (int k : {1, 2, 5, 30}) {
      // Direct complement for moderate values.
      double head = 0.0, term = std::exp(-mu);
      for (int j = 0; j < k; ++j) {
        head += term;
        term *= mu / (j + 1);
      }
      const double direct = 1.0 - head;
      if (direct > 1e-10) CHECK(std::exp(log_poisson_tail(mu, k)) == doctest::Approx(direct).epsilon(1e-8));
    }
  CHECK(log_poisson_tail(2.0, 0) == 0.0);
  CHECK(std::isinf(log_poisson_tail(0.0, 1)));
  // Far tail stays finite where the complement underflows.
  CHECK(std::isfinite(log_poisson_tail(0.01, 60)));
}

TEST_CASE("profile satisfies the cost constraint") {
  const auto p = make_profile(homogeneous_tree(3, 3), 2, 1.0);
  CHECK(p.mass == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(p.tree.size() == 22);
  // -lambda is chi-hat of the ball.
  const RootedGraph t = homogeneous_tree(3, 3);
  CHECK(-p.lambda == doctest::Approx(chi_dual(t, ball(t, 0, 2).members, 1.0).value).epsilon(1e-8));
  const auto back = QProfile::from_json(p.to_json());
  CHECK(back.q == p.q);
  CHECK_THROWS_AS(make_profile(homogeneous_tree(3, 2), 2, 1.0), Error);
}

TEST_CASE("certificates: planted hit, zero potential miss, recheck from data") {
  const RootedGraph g = homogeneous_tree(3, 7);
  const QProfile profile = make_profile(homogeneous_tree(3, 2), 1, 1.0);
  Potential zero;
  zero.values.assign(g.size(), 0.0);
  CHECK(code_of([&] { find_lower_bound_certificate(g, zero, 5, profile, 2.0, 0.1); }) ==
        ErrorCode::NotFound);

  // Plant the profile around a vertex at depth 3.
  Potential xi = sample_double_exponential(g, 1.0, 4);
  const double a = a_scale(static_cast<double>(ball(g, 0, 5).size()), 1.0);
  const auto depth = g.distances_from(0);
  VertexId z = 0;
  while (depth[z] != 3) ++z;
  const Ball bz = ball(g, z, 1);
  for (VertexId v : bz.members) xi.values[v] = std::max(xi.values[v], a + 0.5);
  xi.values[z] = a + 2.0;
  auto c = find_lower_bound_certificate(g, xi, 5, profile, 4.0, 0.1);
  CHECK(c.depth <= 3);
  CHECK(c.depth_ratio == doctest::Approx(c.depth / 5.0));
  CHECK(recheck_certificate(c));
  const auto round = LowerBoundCertificate::from_json(c.to_json());
  CHECK(recheck_certificate(round));
  // The bound is a lower bound on the solver's value.
  SolverConfig solver;
  solver.whole_graph = true;
  const std::vector<double> ts{4.0};
  const MassCurve curve = total_mass_deterministic(g, xi, ts, solver);
  CHECK(c.bound <= curve.logU_over_t[0] + curve.error_estimate[0] + 1e-6);
  // Tampering with stored data is detected.
  auto bad = round;
  bad.xi_ball[0] = -1.0;
  CHECK(!recheck_certificate(bad));
  bad = round;
  bad.bound += 0.1;
  CHECK(!recheck_certificate(bad));
}

TEST_CASE("single-row catalog and determinism of small runs") {
  const auto cat = parse(R"({"kind": "chi-catalog", "degree_law": {"constant": 3}, "radius": 2,
                             "catalog_size": 1, "chi": {"restarts": 2}})");
  const auto out = run_experiment(cat);
  CHECK(out.report["catalog"]["rows"].size() == 1);
  CHECK(!out.property_violation);

  const auto lyap = parse(R"({"kind": "lyapunov-gw", "times": [0.5, 1.5], "seeds": 3, "seed": 5,
                              "chi_radii": [1, 2, 3], "chi": {"restarts": 2}})");
  const auto a = run_experiment(lyap);
  const auto b = run_experiment(lyap);
  CHECK(serialize_report(a) == serialize_report(b));
  CHECK(a.csv == b.csv);
  CHECK(a.report["lyapunov"]["all_finite"].get<bool>());
  CHECK(!a.report["lyapunov"]["caveat"].get<std::string>().empty());
  CHECK(a.plots.count("theory.dat") == 1);
}

TEST_CASE("configuration-model run records regime warnings") {
  const auto cfg = parse(R"({"kind": "lyapunov-cm", "n": 200, "times": [1, 6], "seeds": 2,
                             "chi_radii": [1, 2], "chi": {"restarts": 2}})");
  const auto rep = run_lyapunov_cm(cfg);
  CHECK(rep.theta == doctest::Approx(std::log(2.0)));
  REQUIRE(!rep.warnings.empty());
  CHECK(rep.warnings[0].find("CouplingRegimeViolated") != std::string::npos);
  CHECK(rep.all_finite);
}

TEST_CASE("island table matches its summary") {
  const auto cfg = parse(R"({"kind": "islands", "radius": 4, "seeds": 4, "chi_radii": [1, 2],
                             "chi": {"restarts": 2}, "landscape": {"A": 0.25}})");
  const auto out = run_islands(cfg);
  CHECK(out.report["islands"].get<std::size_t>() ==
        static_cast<std::size_t>(std::count(out.csv.begin(), out.csv.end(), '\n') - 1));
}
