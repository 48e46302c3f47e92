// rotlab: divergence-regularized optimal transport on discrete marginals.
// Subcommands: solve, oracle, torus, slope, clt. Exit codes: 0 success,
// 1 input error, 2 numerical failure (no convergence / singular system /
// quadrature too coarse).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rotlab/experiments.hpp"
#include "rotlab/inference.hpp"
#include "rotlab/io.hpp"
#include "rotlab/linearization.hpp"
#include "rotlab/solver.hpp"
#include "rotlab/torus_oracle.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

void apply_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("ROTLAB_THREADS")) threads = std::atoi(env);
  }
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

void write_or_print(const nlohmann::json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::invalid_argument("cannot write: " + out_path);
    out << j.dump(2) << "\n";
  }
}

Eigen::MatrixXd parse_eta(const std::string& text, int n, int m) {
  if (text.rfind("const:", 0) == 0) {
    const double v = std::stod(text.substr(6));
    return Eigen::MatrixXd::Constant(n, m, v);
  }
  if (text.rfind("cell:", 0) == 0) {
    const auto rest = text.substr(5);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("eta cell:i,j malformed");
    const int i = std::stoi(rest.substr(0, comma));
    const int j = std::stoi(rest.substr(comma + 1));
    if (i < 0 || i >= n || j < 0 || j >= m) throw std::invalid_argument("eta cell out of range");
    Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(n, m);
    eta(i, j) = 1.0;
    return eta;
  }
  if (text.rfind("csv:", 0) == 0) {
    std::ifstream in(text.substr(4));
    if (!in) throw std::invalid_argument("cannot open eta csv");
    Eigen::MatrixXd eta(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        if (!(in >> eta(i, j))) throw std::invalid_argument("eta csv too short");
    return eta;
  }
  throw std::invalid_argument("eta must be const:<v>, cell:<i>,<j> or csv:<path>");
}

struct CommonSolveArgs {
  std::string p_path, q_path, cost = "sqeuclidean", divergence = "kl";
  double epsilon = 1.0, tol = 1e-10;
  int max_iter = 10000;
};

rotlab::Solution run_solve(const CommonSolveArgs& a) {
  rotlab::DiscreteMeasure p = rotlab::read_measure_csv(a.p_path);
  rotlab::DiscreteMeasure q = rotlab::read_measure_csv(a.q_path);
  rotlab::CostSpec spec = rotlab::CostSpec::parse(a.cost, p.dim());
  if (spec.kind == rotlab::CostKind::TorusSqDist) {
    p.points = rotlab::wrap_to_unit_torus(p.points);
    q.points = rotlab::wrap_to_unit_torus(q.points);
  }
  rotlab::SolveOptions opts;
  opts.tol = a.tol;
  opts.max_iter = a.max_iter;
  return rotlab::solve(p, q, spec, rotlab::Divergence::parse(a.divergence), a.epsilon, opts);
}

// Expands `--config file.json` into option tokens inserted right after the
// subcommand name, so explicitly passed flags take precedence (every option
// uses a take-last policy). Unknown keys surface as CLI11 parse errors.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string config_path;
  for (size_t i = 1; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") {
      config_path = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
      break;
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw std::invalid_argument("cannot open config: " + config_path);
  nlohmann::json cfg;
  in >> cfg;
  if (!cfg.is_object()) throw std::invalid_argument("config must be a json object");

  size_t insert_at = args.size();
  for (size_t i = 1; i < args.size(); ++i) {
    if (!args[i].empty() && args[i][0] != '-') {  // the subcommand token
      insert_at = i + 1;
      break;
    }
  }
  std::vector<std::string> tokens;
  for (const auto& [key, value] : cfg.items()) {
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back("--" + key);
    } else if (value.is_string()) {
      tokens.push_back("--" + key);
      tokens.push_back(value.get<std::string>());
    } else {
      tokens.push_back("--" + key);
      tokens.push_back(value.dump());
    }
  }
  args.insert(args.begin() + insert_at, tokens.begin(), tokens.end());
  return args;
}

void take_last_everywhere(CLI::App* app) {
  for (auto* opt : app->get_options())
    if (opt->get_items_expected_max() == 1) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  for (auto* sub : app->get_subcommands({})) take_last_everywhere(sub);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"divergence-regularized optimal transport lab"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker thread cap (or ROTLAB_THREADS)");
  std::string config_doc;  // consumed before parsing; registered for --help only
  app.add_option("--config", config_doc, "json config file applied as defaults, flags override");

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "solve one regularized transport problem");
  CommonSolveArgs sa;
  std::string solve_out;
  bool with_diagnostics = false;
  solve_cmd->add_option("--p", sa.p_path, "P marginal csv")->required();
  solve_cmd->add_option("--q", sa.q_path, "Q marginal csv")->required();
  solve_cmd->add_option("--cost", sa.cost, "sqeuclidean|torus");
  solve_cmd->add_option("--divergence", sa.divergence, "kl|tsallis:<alpha>|quad");
  solve_cmd->add_option("--epsilon", sa.epsilon, "regularization strength")->required();
  solve_cmd->add_option("--tol", sa.tol, "FOC residual tolerance");
  solve_cmd->add_option("--max-iter", sa.max_iter, "iteration cap");
  solve_cmd->add_option("--out", solve_out, "solution json path");
  solve_cmd->add_flag("--diagnostics", with_diagnostics, "include support diagnostics in json");

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "torus self-transport population solution");
  int od = 1;
  double oeps = 0.5;
  std::string odiv = "quad", oracle_out;
  int ogrid = 0;
  long omc_nodes = 0;
  int omc_reps = 0;
  uint64_t oquad_seed = 0x5eed;
  oracle_cmd->add_option("--d", od, "dimension")->required();
  oracle_cmd->add_option("--epsilon", oeps, "regularization strength")->required();
  oracle_cmd->add_option("--divergence", odiv, "kl|tsallis:<alpha>|quad");
  oracle_cmd->add_option("--grid", ogrid, "tensor grid resolution per dimension (d <= 3)");
  oracle_cmd->add_option("--mc-nodes", omc_nodes, "monte carlo nodes per replicate (d > 3)");
  oracle_cmd->add_option("--mc-replicates", omc_reps, "monte carlo replicates");
  oracle_cmd->add_option("--quad-seed", oquad_seed, "monte carlo seed");
  oracle_cmd->add_option("--out", oracle_out, "output json path");

  // torus rate experiment
  auto* torus_cmd = app.add_subcommand("torus", "torus convergence-rate experiment (csv out)");
  int td = 1, treps = 30, tmax_iter = 10000;
  double teps = 0.5, ttol = 1e-10;
  std::string tdiv = "quad", tns = "10,30,100,300,1000,3000", torus_out;
  uint64_t tseed = 42;
  torus_cmd->add_option("--d", td, "dimension")->required();
  torus_cmd->add_option("--epsilon", teps, "regularization strength")->required();
  torus_cmd->add_option("--divergence", tdiv, "kl|tsallis:<alpha>|quad");
  torus_cmd->add_option("--ns", tns, "comma-separated sample sizes");
  torus_cmd->add_option("--reps", treps, "replications per sample size");
  torus_cmd->add_option("--seed", tseed, "base seed");
  torus_cmd->add_option("--tol", ttol, "solver tolerance");
  torus_cmd->add_option("--max-iter", tmax_iter, "solver iteration cap");
  torus_cmd->add_option("--out", torus_out, "output csv path")->required();

  // slope fit
  auto* slope_cmd = app.add_subcommand("slope", "fit log-log rate slope from a rate csv");
  std::string slope_in, slope_out;
  slope_cmd->add_option("--in", slope_in, "rate csv path")->required();
  slope_cmd->add_option("--out", slope_out, "summary json path");

  // clt
  auto* clt_cmd = app.add_subcommand("clt", "plug-in CLT estimators / monte-carlo check");
  std::string clt_kind = "cost", clt_solution, clt_eta = "const:1", clt_out;
  bool clt_mc = false;
  CommonSolveArgs ca;
  int clt_n = 1000, clt_reps = 100;
  uint64_t clt_seed = 42;
  clt_cmd->add_option("--kind", clt_kind, "cost|coupling|potential");
  clt_cmd->add_option("--solution", clt_solution, "solution json from `solve`");
  clt_cmd->add_option("--eta", clt_eta, "coupling test function: const:<v>|cell:<i>,<j>|csv:<path>");
  clt_cmd->add_flag("--mc", clt_mc, "run the monte-carlo cost-CLT check instead");
  clt_cmd->add_option("--p", ca.p_path, "population P csv (mc mode)");
  clt_cmd->add_option("--q", ca.q_path, "population Q csv (mc mode)");
  clt_cmd->add_option("--cost", ca.cost, "sqeuclidean|torus (mc mode)");
  clt_cmd->add_option("--divergence", ca.divergence, "divergence (mc mode)");
  clt_cmd->add_option("--epsilon", ca.epsilon, "epsilon (mc mode)");
  clt_cmd->add_option("--n", clt_n, "sample size per replication (mc mode)");
  clt_cmd->add_option("--reps", clt_reps, "replications (mc mode)");
  clt_cmd->add_option("--seed", clt_seed, "base seed (mc mode)");
  clt_cmd->add_option("--tol", ca.tol, "solver tolerance (mc mode)");
  clt_cmd->add_option("--out", clt_out, "output json path");

  take_last_everywhere(&app);
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();
  try {
    const auto args = expand_config(argc, argv);
    std::vector<const char*> cargs;
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    apply_threads(threads);

    if (solve_cmd->parsed()) {
      try {
        const rotlab::Solution sol = run_solve(sa);
        const auto diag = rotlab::diagnostics(sol);
        if (!solve_out.empty())
          write_or_print(rotlab::solution_to_json(sol, with_diagnostics), solve_out);
        std::cout << "value " << sol.primal_value << "  gap "
                  << sol.certificates.duality_gap << "  residual " << sol.residual
                  << "  iterations " << sol.iterations << "  support_fraction "
                  << diag.support_fraction << "\n";
        return kExitOk;
      } catch (const rotlab::NoConvergence& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
      }
    }

    if (oracle_cmd->parsed()) {
      rotlab::TorusQuadrature quad = rotlab::TorusQuadrature::auto_for(od);
      if (ogrid > 0) {
        quad.kind = rotlab::TorusQuadrature::Kind::TensorGrid;
        quad.resolution = ogrid;
      }
      if (omc_nodes > 0) {
        quad.kind = rotlab::TorusQuadrature::Kind::MonteCarlo;
        quad.nodes = omc_nodes;
      }
      if (omc_reps > 0) quad.replicates = omc_reps;
      quad.seed = oquad_seed;
      const auto pop =
          rotlab::make_torus_population(od, oeps, rotlab::Divergence::parse(odiv), quad);
      write_or_print(rotlab::torus_population_to_json(pop), oracle_out);
      return kExitOk;
    }

    if (torus_cmd->parsed()) {
      rotlab::RateExperimentConfig config;
      config.d = td;
      config.epsilon = teps;
      config.divergence = rotlab::Divergence::parse(tdiv);
      config.reps = treps;
      config.base_seed = tseed;
      config.solver.tol = ttol;
      config.solver.max_iter = tmax_iter;
      config.ns.clear();
      std::stringstream ss(tns);
      std::string tok;
      while (std::getline(ss, tok, ',')) config.ns.push_back(std::stoi(tok));
      const auto records = rotlab::run_rate_experiment(config);
      rotlab::write_rate_csv(torus_out, records);
      size_t failed = 0;
      for (const auto& r : records)
        if (!std::isfinite(r.abs_err)) ++failed;
      std::cout << "wrote " << records.size() << " rows to " << torus_out << "\n";
      if (failed > 0) {
        std::cerr << "error: " << failed << " cells did not converge\n";
        return kExitNumerical;
      }
      return kExitOk;
    }

    if (slope_cmd->parsed()) {
      const auto records = rotlab::read_rate_csv(slope_in);
      try {
        const auto fit = rotlab::slope_fit(records);
        write_or_print(rotlab::slope_fit_to_json(fit), slope_out);
        return kExitOk;
      } catch (const rotlab::AllZeroErrors& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
      }
    }

    if (clt_cmd->parsed()) {
      if (clt_mc) {
        rotlab::DiscreteMeasure p = rotlab::read_measure_csv(ca.p_path);
        rotlab::DiscreteMeasure q = rotlab::read_measure_csv(ca.q_path);
        rotlab::CostSpec spec = rotlab::CostSpec::parse(ca.cost, p.dim());
        rotlab::SolveOptions opts;
        opts.tol = ca.tol;
        try {
          const auto check = rotlab::run_cost_clt_check(
              p, q, spec, rotlab::Divergence::parse(ca.divergence), ca.epsilon, clt_n, clt_reps,
              clt_seed, opts);
          write_or_print(nlohmann::json{{"format_version", 1},
                                        {"sample_var", check.sample_var},
                                        {"plugin_sigma2", check.plugin_sigma2},
                                        {"mean_stat", check.mean_stat},
                                        {"reps", check.reps}},
                         clt_out);
          return kExitOk;
        } catch (const rotlab::NoConvergence& e) {
          std::cerr << "error: " << e.what() << "\n";
          return kExitNumerical;
        }
      }
      if (clt_solution.empty())
        throw std::invalid_argument("clt: --solution required (or --mc with --p/--q)");
      std::ifstream in(clt_solution);
      if (!in) throw std::invalid_argument("cannot open solution json: " + clt_solution);
      nlohmann::json j;
      in >> j;
      const rotlab::Solution sol = rotlab::solution_from_json(j);
      try {
        rotlab::CltReport report;
        if (clt_kind == "cost") {
          report = rotlab::cost_clt_variance(sol);
        } else if (clt_kind == "coupling") {
          report = rotlab::coupling_clt_variance(
              sol, parse_eta(clt_eta, static_cast<int>(sol.f.size()),
                             static_cast<int>(sol.g.size())));
        } else if (clt_kind == "potential") {
          report = rotlab::potential_clt_covariance(sol);
        } else {
          throw std::invalid_argument("clt: unknown kind " + clt_kind);
        }
        write_or_print(rotlab::clt_report_to_json(report), clt_out);
        return kExitOk;
      } catch (const rotlab::SingularSystem& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
      } catch (const rotlab::DegenerateDenominator& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
      }
    }
  } catch (const rotlab::QuadratureTooCoarse& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInput;
}
