// Command-line driver: point-process sampling, functional simulation,
// constant evaluation, CLT rate checks, and analytic verification suites.

#include <chrono>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "avoidance/harness.hpp"

namespace {

using avoidance::ExperimentConfig;

/// Opens the requested output (file path or stdout) and runs the writer.
template <class Writer>
void with_output(const std::string& path, Writer&& writer) {
  if (path.empty()) {
    writer(std::cout);
    return;
  }
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot open output file: " + path);
  writer(file);
}

void add_model_flags(CLI::App* cmd, ExperimentConfig& cfg) {
  cmd->add_option("--model", cfg.model, "germ-grain or quantization");
  cmd->add_option("--process", cfg.process, "poisson or binomial");
  cmd->add_option("--dim", cfg.dim, "spatial dimension")->check(CLI::Range(1, 8));
  cmd->add_option("--radius", cfg.radius, "grain radius (germ-grain)");
  cmd->add_option("--exponent", cfg.exponent, "mark exponent (quantization)");
  cmd->add_option("--quad", cfg.quad_method,
                  "quadrature: auto, exact, monte-carlo, lattice");
  cmd->add_option("--quad-budget", cfg.quad_budget, "quadrature nodes");
  cmd->add_option("--seed", cfg.master_seed, "master seed");
  cmd->add_option("--workers", cfg.workers,
                  "worker threads (0: AVOIDANCE_CLT_WORKERS or hardware)");
  cmd->add_option("--out", cfg.output_path, "output file (default stdout)");
}

int run_verify(const std::string& suite, std::uint64_t seed) {
  std::vector<avoidance::VerifyRecord> records;
  auto append = [&](std::vector<avoidance::VerifyRecord> more) {
    for (auto& r : more) records.push_back(std::move(r));
  };
  if (suite == "approx" || suite == "all") append(avoidance::verify_approx_suite());
  if (suite == "moments" || suite == "all")
    append(avoidance::verify_moments_suite(seed));
  if (suite == "malliavin" || suite == "all")
    append(avoidance::verify_malliavin_suite(seed));
  if (records.empty())
    throw CLI::ValidationError("--suite",
                               "expected malliavin, moments, approx, or all");
  bool all_pass = true;
  for (const avoidance::VerifyRecord& r : records) {
    nlohmann::json line = r.detail;
    line["name"] = r.name;
    std::cout << line.dump() << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Avoidance-functional simulation and verification toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (snake_case keys)");

  ExperimentConfig cfg;

  // sample-ppp
  auto* ppp = app.add_subcommand("sample-ppp",
                                 "Sample a homogeneous Poisson pattern as CSV");
  double intensity = 100.0;
  std::vector<double> window_bounds = {0.0, 1.0};
  ppp->add_option("--dim", cfg.dim)->check(CLI::Range(1, 8));
  ppp->add_option("--intensity", intensity, "points per unit volume");
  ppp->add_option("--window", window_bounds, "interval a,b used on every axis")
      ->expected(2)
      ->delimiter(',');
  ppp->add_option("--seed", cfg.master_seed);
  ppp->add_option("--out", cfg.output_path);

  // simulate
  auto* sim = app.add_subcommand(
      "simulate", "Replicate the headline functional; CSV replicate,value");
  double sim_scale = 100.0;
  add_model_flags(sim, cfg);
  sim->add_option("--lambda,--scale", sim_scale, "intensity / sample size");
  sim->add_option("--reps", cfg.reps, "number of replicates");

  // constants
  auto* con = app.add_subcommand(
      "constants", "Evaluate variance and Berry-Esseen constants as JSON");
  double con_lambda = 100.0;
  add_model_flags(con, cfg);
  con->add_option("--lambda", con_lambda, "intensity");
  con->add_option("--budget", cfg.constant_budget, "outer Monte Carlo budget");

  // clt-check
  auto* clt = app.add_subcommand(
      "clt-check", "Normal-approximation distances across a scale ladder");
  add_model_flags(clt, cfg);
  clt->add_option("--scales", cfg.scales, "strictly increasing scale ladder")
      ->delimiter(',');
  clt->add_option("--reps", cfg.reps, "replicates per scale");
  clt->add_option("--pilot-reps", cfg.pilot_reps,
                  "pilot replicates for the variance estimate");
  clt->add_option("--budget", cfg.constant_budget,
                  "Monte Carlo budget for the bound constants");

  // verify
  auto* ver = app.add_subcommand(
      "verify", "Run an analytic verification suite; one JSON line per check");
  std::string suite = "all";
  ver->add_option("--suite", suite, "malliavin, moments, approx, or all");
  ver->add_option("--seed", cfg.master_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot open config: " + config_path);
      nlohmann::json j = nlohmann::json::parse(in);
      ExperimentConfig file_cfg = ExperimentConfig::from_json(j);
      // Explicit command-line flags override the file.
      auto keep = [&](const CLI::Option* opt, auto& field, auto file_value) {
        if (opt == nullptr || opt->count() == 0) field = file_value;
      };
      CLI::App* active = app.get_subcommands().front();
      keep(active->get_option_no_throw("--model"), cfg.model, file_cfg.model);
      keep(active->get_option_no_throw("--process"), cfg.process,
           file_cfg.process);
      keep(active->get_option_no_throw("--dim"), cfg.dim, file_cfg.dim);
      keep(active->get_option_no_throw("--radius"), cfg.radius, file_cfg.radius);
      keep(active->get_option_no_throw("--exponent"), cfg.exponent,
           file_cfg.exponent);
      keep(active->get_option_no_throw("--scales"), cfg.scales, file_cfg.scales);
      keep(active->get_option_no_throw("--reps"), cfg.reps, file_cfg.reps);
      keep(active->get_option_no_throw("--pilot-reps"), cfg.pilot_reps,
           file_cfg.pilot_reps);
      keep(active->get_option_no_throw("--quad-budget"), cfg.quad_budget,
           file_cfg.quad_budget);
      keep(active->get_option_no_throw("--budget"), cfg.constant_budget,
           file_cfg.constant_budget);
      keep(active->get_option_no_throw("--seed"), cfg.master_seed,
           file_cfg.master_seed);
      keep(active->get_option_no_throw("--workers"), cfg.workers,
           file_cfg.workers);
      keep(active->get_option_no_throw("--quad"), cfg.quad_method,
           file_cfg.quad_method);
      keep(active->get_option_no_throw("--out"), cfg.output_path,
           file_cfg.output_path);
    }

    if (ppp->parsed()) {
      std::vector<double> lo(cfg.dim, window_bounds[0]);
      std::vector<double> hi(cfg.dim, window_bounds[1]);
      avoidance::Window window(std::move(lo), std::move(hi));
      avoidance::RngStream stream(cfg.master_seed, 0);
      avoidance::PointPattern pattern =
          avoidance::sample_homogeneous(window, intensity, stream);
      with_output(cfg.output_path, [&](std::ostream& os) {
        avoidance::write_ppp_csv(os, pattern, cfg.master_seed);
      });
      return 0;
    }

    if (sim->parsed()) {
      const avoidance::ModelSpec model = cfg.to_model();
      const std::vector<double> values = avoidance::replicate_functional(
          model, sim_scale, cfg.reps, cfg.master_seed, cfg.to_quad(),
          avoidance::resolve_workers(cfg.workers));
      with_output(cfg.output_path, [&](std::ostream& os) {
        avoidance::write_replicates_csv(os, values);
      });
      return 0;
    }

    if (con->parsed()) {
      const avoidance::ModelSpec model = cfg.to_model();
      const avoidance::ConstantsReport report = avoidance::evaluate_constants(
          model, con_lambda, cfg.constant_budget, cfg.master_seed,
          avoidance::resolve_workers(cfg.workers));
      with_output(cfg.output_path, [&](std::ostream& os) {
        os << avoidance::constants_report_json(report).dump(2) << "\n";
      });
      return 0;
    }

    if (clt->parsed()) {
      const auto start = std::chrono::steady_clock::now();
      const avoidance::CltResult result = avoidance::run_clt_check(cfg);
      with_output(cfg.output_path, [&](std::ostream& os) {
        avoidance::write_distance_csv(os, result, cfg.master_seed);
      });
      const auto elapsed = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
      nlohmann::json manifest = avoidance::run_manifest(cfg);
      std::cerr << manifest.dump() << "\n"
                << "elapsed_seconds " << elapsed << "\n";
      return 0;
    }

    if (ver->parsed()) return run_verify(suite, cfg.master_seed);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
