// Command-line front end. Exit codes: 0 success, 1 error, 2 property violation.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pam/error.hpp"
#include "pam/experiments.hpp"
#include "pam/graph.hpp"
#include "pam/random_graphs.hpp"
#include "pam/variational.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw pam::Error(pam::ErrorCode::InvalidInput, "cannot open " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw pam::Error(pam::ErrorCode::InvalidInput, path + ": " + e.what());
  }
}

pam::DegreeLaw law_from(const std::vector<int>& degrees, const std::vector<double>& probs) {
  if (probs.empty()) return pam::DegreeLaw::uniform(degrees);
  return pam::DegreeLaw(degrees, probs);
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = pam::ExperimentConfig::from_json(read_json(config_path));
  const std::string dir = !out_dir.empty()          ? out_dir
                          : !cfg.output_dir.empty() ? cfg.output_dir
                                                    : "runs/" + std::string(pam::to_string(cfg.kind)) + "-" +
                                                          std::to_string(cfg.seed);
  const auto out = pam::run_experiment(cfg);
  pam::write_run(out, cfg, dir);
  std::cout << "wrote " << dir << (out.property_violation ? " (property violation)" : "") << "\n";
  return out.property_violation ? 2 : 0;
}

int cmd_chi(const std::string& graph_path, double rho, const std::string& method, int radius) {
  const auto g = pam::load_graph(graph_path);
  std::vector<pam::VertexId> domain;
  if (radius >= 0) {
    domain = pam::ball(g, g.root(), radius).members;
  } else {
    for (pam::VertexId v = 0; v < g.size(); ++v) domain.push_back(v);
  }
  nlohmann::json j = {{"rho", rho}, {"domain_size", domain.size()}};
  if (method == "primal" || method == "both") j["primal"] = pam::chi_primal(g, domain, rho).to_json();
  if (method == "dual" || method == "both") j["dual"] = pam::chi_dual(g, domain, rho).to_json();
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_verify(const std::string& report_path) {
  const std::string text = read_file(report_path);
  const auto report = nlohmann::json::parse(text);
  bool ok = true;
  if (report.contains("instances"))
    for (const auto& inst : report.at("instances"))
      for (const auto& c : inst.at("certificates"))
        if (!c.is_null() && !pam::recheck_certificate(pam::LowerBoundCertificate::from_json(c))) {
          std::cout << "certificate in instance " << inst.at("instance") << " does not recheck\n";
          ok = false;
        }
  const auto cfg = pam::ExperimentConfig::from_json(report.at("config"));
  const auto out = pam::run_experiment(cfg);
  if (pam::serialize_report(out) != text) {
    std::cout << "rerun differs from " << report_path << "\n";
    ok = false;
  }
  std::cout << (ok ? "verified" : "verification failed") << "\n";
  return ok ? 0 : 2;
}

int cmd_gen(const std::string& kind, const std::vector<int>& degrees, const std::vector<double>& probs,
            int radius, std::size_t n, std::uint64_t seed, const std::string& out) {
  const auto law = law_from(degrees, probs);
  pam::RootedGraph g = [&] {
    if (kind == "gw") {
      pam::GWSpec spec;
      spec.initial = law;
      spec.general = law;
      spec.radius = radius;
      spec.seed = seed;
      return pam::sample_gw_tree(spec);
    }
    const auto ds = pam::sequence_from_law(law, n);
    const auto [mg, report] = pam::sample_uniform_simple_graph(ds, seed, 100000);
    return mg.root_component(law.max_degree()).graph;
  }();
  if (out.empty() || out == "-") {
    std::cout << pam::to_json(g).dump() << "\n";
  } else {
    pam::save_graph(g, out);
    std::cout << "wrote " << out << " (" << g.size() << " vertices)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parabolic Anderson model experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  std::string graph_path, method = "both";
  double rho = 1.0;
  int radius = -1;
  auto* chi = app.add_subcommand("chi", "Variational constant of a graph");
  chi->add_option("graph", graph_path, "Graph (JSON)")->required()->check(CLI::ExistingFile);
  chi->add_option("--rho", rho, "rho > 0")->required();
  chi->add_option("--method", method, "primal, dual or both")
      ->check(CLI::IsMember({"primal", "dual", "both"}));
  chi->add_option("--radius", radius, "Restrict to the ball of this radius around the root");

  std::string report_path;
  auto* verify = app.add_subcommand("verify", "Rerun a report's embedded config and compare bytes");
  verify->add_option("report", report_path, "report.json")->required()->check(CLI::ExistingFile);

  std::string gen_kind, gen_out;
  std::vector<int> degrees{3};
  std::vector<double> probs;
  int gen_radius = 6;
  std::size_t gen_n = 1000;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen", "Sample a graph");
  gen->add_option("kind", gen_kind, "gw or cm")->required()->check(CLI::IsMember({"gw", "cm"}));
  gen->add_option("--degrees", degrees, "Degree support");
  gen->add_option("--probs", probs, "Degree probabilities (default uniform)");
  gen->add_option("--radius", gen_radius, "GW radius");
  gen->add_option("--n", gen_n, "CM vertex count");
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--out", gen_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir);
    if (*chi) return cmd_chi(graph_path, rho, method, radius);
    if (*verify) return cmd_verify(report_path);
    if (*gen) return cmd_gen(gen_kind, degrees, probs, gen_radius, gen_n, gen_seed, gen_out);
  } catch (const pam::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
