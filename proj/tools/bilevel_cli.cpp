#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "bilevel/config.hpp"
#include "bilevel/dataset.hpp"
#include "bilevel/errors.hpp"
#include "bilevel/experiment.hpp"
#include "bilevel/quadratic.hpp"
#include "bilevel/theory.hpp"

namespace {

using namespace bilevel;

int cmd_check(const std::string& path) {
  parse_config(path);
  std::printf("config ok: %s\n", path.c_str());
  return 0;
}

int cmd_run(const std::string& path) {
  const ExperimentConfig config = parse_config(path);
  const ExperimentSummary summary = run_experiment(config);
  for (const CellResult& c : summary.cells) {
    std::printf("%-24s %-8s k=%-8lld samples=%-12lld wall=%lldms val_loss=%g\n",
                c.run_id.c_str(),
                c.ok ? "ok" : (c.diverged ? "diverged" : "failed"),
                static_cast<long long>(c.k_final),
                static_cast<long long>(c.samples_total),
                static_cast<long long>(c.wall_ms_total), c.final_val_loss);
    if (!c.ok) std::printf("    error: %s\n", c.error.c_str());
  }
  std::printf("summary written to %s/summary.csv\n", summary.out_dir.c_str());
  return summary.exit_code();
}

int cmd_constants(const std::string& path) {
  const ExperimentConfig config = parse_config(path);
  const auto oracle = build_oracle(config);

  const Vector x0 = zeros(oracle->outer_dim());
  Vector y0 = zeros(oracle->inner_dim());
  if (oracle->has_exact_inner_solution()) y0 = oracle->solve_inner_exact(x0);

  SmoothnessConstants c;
  if (config.is_quadratic()) {
    const auto& b = std::get<QuadraticProblemBlock>(config.problem);
    c = dynamic_cast<const QuadraticProblem&>(*oracle).constants_on_ball(
        x0, y0, b.ball_radius);
  } else {
    const auto& b = std::get<HypercleanProblemBlock>(config.problem);
    RngStream rs(b.seed, "empirical-constants");
    c = estimate_constants_empirical(*oracle, x0, y0, b.ball_radius, 1000, rs);
  }
  std::printf("base constants (ball around the zero init):\n");
  std::printf("  mu=%g L=%g M=%g tau=%g rho=%g sigma=%g\n", c.mu, c.L, c.M,
              c.tau, c.rho, c.sigma);

  for (const AlgoBlock& a : config.algos) {
    const DerivedConstants dc = derive_constants(c, a.eta, a.Q, a.S);
    std::printf("[algo.%s] eta=%g Q=%d S=%zu\n", a.name.c_str(), a.eta, a.Q, a.S);
    std::printf("  L_phi=%g L_Q=%g L_prime=%g C_Q=%g G_sq=%g sigma_prime_sq=%g\n",
                dc.L_phi, dc.L_Q, dc.L_prime, dc.C_Q, dc.G_sq, dc.sigma_prime_sq);
    if (a.mode != AlgoMode::kTheorem) continue;
    if (a.kind == AlgoKind::kMrbo) {
      const double lambda = a.theorem_lambda.value_or(
          schedule_active_lambda(c, a.theorem_d, a.eta, a.Q));
      const MrboConfig mc = derive_mrbo_hyperparams(
          c, a.theorem_d, lambda, a.gamma_hint, a.eta, a.Q, a.S,
          a.K > 0 ? a.K : 1000);
      std::printf("  theorem mrbo: gamma=%g lambda=%g c1=%g c2=%g m=%g d=%g\n",
                  mc.gamma, mc.lambda, mc.c1, mc.c2, mc.m, mc.d);
      std::printf("  rate constant M' (phi gap 1) = %g\n",
                  mrbo_rate_constant(mc, c, 1.0));
    } else if (a.kind == AlgoKind::kVrbo) {
      const VrboTheoremParams p = derive_vrbo_hyperparams(c, a.eta, a.Q, a.S2);
      std::printf("  theorem vrbo: alpha=%g beta=%g m_inner=%lld q=%lld\n",
                  p.alpha, p.beta, static_cast<long long>(p.m_inner),
                  static_cast<long long>(p.period_q));
      VrboConfig vc;
      vc.alpha = p.alpha;
      vc.beta = p.beta;
      vc.hypergrad.eta = a.eta;
      vc.hypergrad.Q = a.Q;
      std::printf("  step margin 1/L'' = %g\n", vrbo_step_margin(vc, c));
    }
  }
  return 0;
}

int cmd_gen_data(const std::string& family, std::size_t n_train,
                 std::size_t n_val, std::size_t n_test, std::size_t dim,
                 double corrupt, std::uint64_t seed, const std::string& out) {
  if (family != "hyperclean") {
    std::fprintf(stderr, "gen-data: unknown family '%s' (only hyperclean has a "
                         "dataset file)\n",
                 family.c_str());
    return 2;
  }
  const Dataset ds =
      generate_hyperclean_dataset(n_train, n_val, n_test, dim, corrupt, seed);
  write_dataset_csv(ds, out);
  std::printf("wrote %zu rows (dim %zu) to %s\n", ds.size(), ds.dim(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic bilevel optimization toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Execute an experiment config");
  run->add_option("config", config_path, "config file")->required();
  auto* check = app.add_subcommand("check", "Validate a config without running");
  check->add_option("config", config_path, "config file")->required();
  auto* constants =
      app.add_subcommand("constants", "Print derived constants and theorem-mode "
                                      "hyperparameters for a config");
  constants->add_option("config", config_path, "config file")->required();

  std::string family, out_path;
  std::size_t n_train = 1000, n_val = 200, n_test = 200, dim = 20;
  double corrupt = 0.1;
  std::uint64_t seed = 0;
  auto* gen = app.add_subcommand("gen-data", "Generate a dataset file");
  gen->add_option("family", family, "problem family (hyperclean)")->required();
  gen->add_option("out", out_path, "output path")->required();
  gen->add_option("--n-train", n_train, "training rows");
  gen->add_option("--n-val", n_val, "validation rows");
  gen->add_option("--n-test", n_test, "test rows");
  gen->add_option("--dim", dim, "feature dimension");
  gen->add_option("--corrupt", corrupt, "label corruption rate in [0,1]");
  gen->add_option("--seed", seed, "generation seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (check->parsed()) return cmd_check(config_path);
    if (constants->parsed()) return cmd_constants(config_path);
    if (gen->parsed()) {
      return cmd_gen_data(family, n_train, n_val, n_test, dim, corrupt, seed,
                          out_path);
    }
  } catch (const bilevel::FormatError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const bilevel::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
