// Acceptance suite: one self-contained check per criterion, each printing a
// single pass/fail line. Expected values come from closed forms, independent
// oracles (finite differences, direct training, rank statistics), or bound
// formulas evaluated on the instance; tolerances are fixed here, not tuned at
// run time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "bilevel/config.hpp"
#include "bilevel/dataset.hpp"
#include "bilevel/experiment.hpp"
#include "bilevel/finite_diff.hpp"
#include "bilevel/hyperclean.hpp"
#include "bilevel/hypergrad.hpp"
#include "bilevel/mrbo.hpp"
#include "bilevel/quadratic.hpp"
#include "bilevel/stocbio.hpp"
#include "bilevel/theory.hpp"
#include "bilevel/vrbo.hpp"

using namespace bilevel;

namespace {

struct CheckFailure {
  std::string message;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw CheckFailure{message};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared instances

// Noisy 10-dim quadratic with the outer target at the origin: the biased and
// unbiased hypergradient fields share the stationary point x = 0.
QuadraticSpec origin_instance(std::uint64_t seed, double noise = 0.1) {
  QuadraticSpec spec;
  spec.p = 10;
  spec.q = 10;
  spec.mu = 0.5;
  spec.L_inner = 1.0;
  spec.noise_scale = noise;
  spec.n_samples = 256;
  spec.c_x = 0.1;
  spec.coupling_norm = 0.5;
  spec.seed = seed;
  spec.y_target = Vector(10, 0.0);
  return spec;
}

std::unique_ptr<QuadraticProblem> sq1(double noise = 0.0,
                                      std::size_t n_samples = 1,
                                      std::uint64_t seed = 0) {
  QuadraticSpec spec;
  spec.p = 1;
  spec.q = 1;
  spec.mu = 1.0;
  spec.L_inner = 1.0;
  spec.coupling = std::vector<double>{-1.0};
  spec.noise_scale = noise;
  spec.n_samples = n_samples;
  spec.seed = seed;
  spec.y_target = {0.0};
  return make_quadratic_problem(spec);
}

Vector gaussian_vector(RngStream& rs, std::size_t dim, double scale = 1.0) {
  Vector v(dim);
  for (double& e : v) e = scale * rs.next_gaussian();
  return v;
}

double least_squares_slope(const std::vector<double>& values, std::size_t lo) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t j = lo; j < values.size(); ++j) {
    const double lx = std::log(static_cast<double>(j + 1));
    const double ly = std::log(values[j]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  return (static_cast<double>(n) * sxy - sx * sy) /
         (static_cast<double>(n) * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Criterion 1: exact Neumann bias on the scalar instance.

void criterion_exact_neumann_bias() {
  auto oracle = sq1();
  HypergradConfig config;
  config.eta = 0.5;
  config.mode = HypergradMode::kSharedBatch;
  config.batch_size = 1;

  for (int Q : {0, 1, 2, 5, 10}) {
    config.Q = Q;
    RngStream rs(0, "a1");
    const HypergradSampleSet samples = draw_hypergrad_samples(rs, *oracle, config);
    const double est =
        estimate_hypergrad_shared(*oracle, {2.0}, {2.0}, config, samples)[0];
    const double expected = 2.0 * (1.0 - std::pow(0.5, Q + 1));
    require(std::abs(est - expected) <= 1e-12,
            "estimator at Q=" + std::to_string(Q) + " is " + fmt(est) +
                ", expected " + fmt(expected));
  }
  // Geometric bias decay over every consecutive pair.
  double last = -1.0;
  for (int Q = 0; Q <= 11; ++Q) {
    config.Q = Q;
    RngStream rs(0, "a1");
    const HypergradSampleSet samples = draw_hypergrad_samples(rs, *oracle, config);
    const double est =
        estimate_hypergrad_shared(*oracle, {2.0}, {2.0}, config, samples)[0];
    const double bias = std::abs(est - 2.0);
    if (last > 0.0) {
      require(std::abs(bias / last - 0.5) <= 1e-12,
              "bias ratio at Q=" + std::to_string(Q) + " is " + fmt(bias / last));
    }
    last = bias;
  }
}

// ---------------------------------------------------------------------------
// Criterion 2: deterministic bias below C_Q on random instances.

void criterion_bias_bound() {
  const double eta = 0.5;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    QuadraticSpec spec;
    spec.p = 10;
    spec.q = 10;
    spec.mu = 0.5;
    spec.L_inner = 1.0;
    spec.c_x = 0.1;
    spec.coupling_norm = 0.5;
    spec.seed = 1000 + seed;
    RngStream trs(seed, "a2-target");
    spec.y_target = gaussian_vector(trs, 10);
    auto oracle = make_quadratic_problem(spec);

    RngStream prs(seed, "a2-points");
    const Vector x = gaussian_vector(prs, 10);
    const Vector y = gaussian_vector(prs, 10);
    const SmoothnessConstants c = oracle->constants_on_ball(x, y, 0.0);
    const Vector tilde = oracle->implicit_hypergrad(x, y);
    for (int Q : {2, 5, 10, 20}) {
      const Vector est = estimate_hypergrad_full(*oracle, x, y, eta, Q);
      const double bias = norm(sub(est, tilde));
      const double bound = bias_bound_cq(c.mu, c.M, c.L, eta, Q);
      require(bias <= bound, "seed " + std::to_string(seed) + " Q=" +
                                 std::to_string(Q) + ": bias " + fmt(bias) +
                                 " exceeds C_Q " + fmt(bound));
    }
  }
}

// ---------------------------------------------------------------------------
// Criterion 3: hypergradient correctness at deep truncation.

void criterion_hypergrad_correctness() {
  QuadraticSpec spec;
  spec.p = 10;
  spec.q = 10;
  spec.mu = 0.5;
  spec.L_inner = 1.0;
  spec.c_x = 0.1;
  spec.coupling_norm = 0.5;
  spec.seed = 2024;
  RngStream trs(0, "a3-target");
  spec.y_target = gaussian_vector(trs, 10);
  auto oracle = make_quadratic_problem(spec);

  RngStream prs(1, "a3-point");
  const Vector x = gaussian_vector(prs, 10);
  const double eta = 1.0 / (2.0 * spec.L_inner);
  const int Q = 60;

  // At the exact inner solution the estimator targets grad Phi itself.
  const Vector y_star = oracle->solve_inner_exact(x);
  const Vector est = estimate_hypergrad_full(*oracle, x, y_star, eta, Q);

  const Vector analytic = oracle->analytic_hypergrad(x);
  const double rel_an = norm(sub(est, analytic)) / norm(analytic);
  require(rel_an <= 1e-6, "relative error vs analytic oracle is " + fmt(rel_an));

  auto phi = [&](const Vector& xp) {
    return oracle->loss(xp, oracle->solve_inner_exact(xp), Split::kValidation);
  };
  const Vector fd = finite_difference_grad(phi, x);
  const double rel_fd = norm(sub(est, fd)) / norm(fd);
  require(rel_fd <= 1e-3, "relative error vs finite differences is " + fmt(rel_fd));
}

// ---------------------------------------------------------------------------
// Criterion 4: Monte-Carlo variance below the G^2 and sigma'^2/S1 bounds.

void criterion_variance_bounds() {
  auto oracle = sq1(0.1, 256, 4);
  const Vector x = {2.0};
  const Vector y = {1.5};
  const double eta = 0.5;
  const int Q = 3;
  const SmoothnessConstants c = oracle->constants_on_ball(x, y, 0.0);
  const Vector reference = estimate_hypergrad_full(*oracle, x, y, eta, Q);
  const int n_draws = 10000;

  for (std::size_t S : {1u, 10u, 100u}) {
    const DerivedConstants dc = derive_constants(c, eta, Q, S);

    HypergradConfig shared;
    shared.eta = eta;
    shared.Q = Q;
    shared.mode = HypergradMode::kSharedBatch;
    shared.batch_size = S;
    RngStream root_s(40 + S, "a4-shared");
    double var_shared = 0.0;
    for (int i = 0; i < n_draws; ++i) {
      RngStream ds = root_s.child("draw" + std::to_string(i));
      const HypergradSampleSet samples = draw_hypergrad_samples(ds, *oracle, shared);
      const double e = estimate_hypergrad_shared(*oracle, x, y, shared, samples)[0];
      var_shared += (e - reference[0]) * (e - reference[0]);
    }
    var_shared /= n_draws;
    require(var_shared <= dc.G_sq,
            "shared-batch variance " + fmt(var_shared) + " exceeds G^2 " +
                fmt(dc.G_sq) + " at S=" + std::to_string(S));

    HypergradConfig per = shared;
    per.mode = HypergradMode::kPerSample;
    RngStream root_p(60 + S, "a4-per");
    double var_per = 0.0;
    for (int i = 0; i < n_draws; ++i) {
      RngStream ds = root_p.child("draw" + std::to_string(i));
      const HypergradSampleSet samples = draw_hypergrad_samples(ds, *oracle, per);
      const double e = estimate_hypergrad_per_sample(*oracle, x, y, per, samples)[0];
      var_per += (e - reference[0]) * (e - reference[0]);
    }
    var_per /= n_draws;
    require(var_per <= dc.sigma_prime_sq / static_cast<double>(S),
            "per-sample variance " + fmt(var_per) + " exceeds sigma'^2/S1 " +
                fmt(dc.sigma_prime_sq / static_cast<double>(S)) + " at S1=" +
                std::to_string(S));
  }
}

// ---------------------------------------------------------------------------
// Criterion 5: momentum driver under the theorem schedule. The theorem step
// sizes keep x essentially frozen, so the run starts at the outer minimizer
// (with the warm inner start the theorem assumes) and the criterion checks
// that stationarity is held and that the averaged error measure decays at
// the theorem rate.

void criterion_mrbo_convergence() {
  auto oracle = make_quadratic_problem(origin_instance(100));
  const Vector x0 = zeros(10);
  const Vector y0 = oracle->solve_inner_exact(x0);
  const SmoothnessConstants c = oracle->constants_on_ball(x0, y0, 2.0);
  const double eta = 0.45 / c.L;
  const int Q = 3;
  const std::size_t S = 16;
  const std::int64_t K = 5000;
  const DerivedConstants dc = derive_constants(c, eta, Q, S);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MrboConfig config =
        derive_mrbo_hyperparams(c, /*d=*/2.0, /*lambda=*/1e-4, 1.0, eta, Q, S, K);
    config.x0 = x0;
    config.y0 = y0;
    config.seed = seed;

    std::vector<double> triple;
    std::vector<double> quarter_v_sq;
    double min_grad = 1e300;
    RunOptions options;
    options.diagnostics = true;
    options.sink = [&](const TraceRow& row) {
      min_grad = std::min(min_grad, *row.grad_norm_sq);
      triple.push_back(dc.L_prime * dc.L_prime / 4.0 * *row.tracking_sq +
                       0.25 * *row.eps_bar_sq);
    };
    options.observer = [&](const StepInfo& info) {
      // |x_{k+1} - x_k|^2 / (4 gamma^2 eta_k^2) = |v_k|^2 / 4.
      quarter_v_sq.push_back(0.25 * norm_sq(*info.v));
    };
    run_mrbo(config, *oracle, options);
    require(min_grad <= 1e-3, "seed " + std::to_string(seed) +
                                  ": min |grad Phi|^2 = " + fmt(min_grad));

    for (std::size_t i = 0; i < triple.size(); ++i) triple[i] += quarter_v_sq[i];
    std::vector<double> running(triple.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < triple.size(); ++i) {
      acc += triple[i];
      running[i] = acc / static_cast<double>(i + 1);
    }
    double best = 1e300;
    for (double& r : running) {
      best = std::min(best, r);
      r = best;  // running minimum of the running average
    }
    const double slope = least_squares_slope(running, running.size() / 10);
    require(slope <= -0.4, "seed " + std::to_string(seed) +
                               ": log-log slope = " + fmt(slope));
  }
}

// ---------------------------------------------------------------------------
// Criterion 6: variance-reduced driver, practical settings (Q=3, eta=0.5,
// period 3). Additive-noise quadratics make the recursive increments
// deterministic, so the epoch-start vs mid-epoch comparison holds at
// equality; 1% slack absorbs the epoch-weighting jitter.

void criterion_vrbo_convergence() {
  auto oracle = make_quadratic_problem(origin_instance(100));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    VrboConfig config;
    config.alpha = 0.1;
    config.beta = 0.5;
    config.S1 = 64;
    config.S2 = 8;
    config.period_q = 3;
    config.m_inner = 5;
    config.K = 2000;
    config.hypergrad.eta = 0.5;
    config.hypergrad.Q = 3;
    config.hypergrad.mode = HypergradMode::kPerSample;
    RngStream rs(seed, "a6-x0");
    config.x0 = gaussian_vector(rs, 10);
    config.y0 = zeros(10);
    config.seed = seed;

    double min_grad = 1e300;
    double eps_start = 0.0, eps_mid = 0.0;
    std::int64_t n_start = 0, n_mid = 0;
    RunOptions options;
    options.diagnostics = true;
    options.sink = [&](const TraceRow& row) {
      min_grad = std::min(min_grad, *row.grad_norm_sq);
      if (row.k % config.period_q == 0) {
        eps_start += *row.eps_bar_sq;
        ++n_start;
      } else {
        eps_mid += *row.eps_bar_sq;
        ++n_mid;
      }
    };
    run_vrbo(config, *oracle, options);

    require(min_grad <= 1e-3, "seed " + std::to_string(seed) +
                                  ": min |grad Phi|^2 = " + fmt(min_grad));
    require(n_start >= 100, "need at least 100 epochs");
    const double mean_start = eps_start / static_cast<double>(n_start);
    const double mean_mid = eps_mid / static_cast<double>(n_mid);
    require(mean_start <= mean_mid * 1.01,
            "seed " + std::to_string(seed) + ": epoch-start error " +
                fmt(mean_start) + " vs mid-epoch " + fmt(mean_mid));
  }
}

// ---------------------------------------------------------------------------
// Criterion 7: hyper-cleaning end to end.

double clean_oracle_val_loss(const HypercleanProblem& problem) {
  // Direct training oracle: full-batch ridge logistic regression on the
  // uncorrupted training rows.
  const Dataset& ds = problem.dataset();
  const auto train_rows = ds.split_indices(Split::kTrain);
  Vector w = zeros(problem.inner_dim());
  for (int it = 0; it < 4000; ++it) {
    Vector g = zeros(w.size());
    int n_clean = 0;
    for (std::size_t row : train_rows) {
      if (ds.corrupted[row]) continue;
      const double s = sigmoid(dot(w, ds.features[row]));
      add_scaled(g, s - ds.labels[row], ds.features[row]);
      ++n_clean;
    }
    for (double& e : g) e /= static_cast<double>(n_clean);
    add_scaled(g, 2.0 * 0.001, w);
    add_scaled(w, -0.5, g);
  }
  return problem.loss(zeros(problem.outer_dim()), w, Split::kValidation);
}

double corrupted_auc(const HypercleanProblem& problem, const Vector& lambda) {
  // Rank statistic of -lambda_i with corrupted rows as positives.
  const Dataset& ds = problem.dataset();
  const auto train_rows = ds.split_indices(Split::kTrain);
  std::vector<std::pair<double, int>> scored;
  scored.reserve(train_rows.size());
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    scored.emplace_back(-lambda[i], ds.corrupted[train_rows[i]] ? 1 : 0);
  }
  std::sort(scored.begin(), scored.end());
  double rank_sum = 0.0;
  double n_pos = 0.0, n_neg = 0.0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (scored[i].second != 0) {
      rank_sum += static_cast<double>(i + 1);
      n_pos += 1.0;
    } else {
      n_neg += 1.0;
    }
  }
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

void criterion_hyperclean_end_to_end() {
  HypercleanSpec spec;
  spec.dataset = generate_hyperclean_dataset(1000, 200, 200, 20, 0.1, 77);
  spec.ridge_c = 0.001;
  auto problem = make_hyperclean_problem(std::move(spec));
  const double target = 1.10 * clean_oracle_val_loss(*problem);

  const Vector lambda0 = zeros(problem->outer_dim());
  const Vector w0 = zeros(problem->inner_dim());

  auto check_run = [&](const char* name, double best_val, const Vector& lambda,
                       bool needs_auc) {
    require(best_val <= target, std::string(name) + ": best validation loss " +
                                    fmt(best_val) + " misses target " +
                                    fmt(target));
    if (needs_auc) {
      const double auc = corrupted_auc(*problem, lambda);
      require(auc >= 0.9,
              std::string(name) + ": corruption AUC " + fmt(auc) + " < 0.9");
    }
  };

  {  // momentum driver, practical mode
    MrboConfig config;
    config.gamma = 500.0;
    config.lambda = 1.0;
    config.c1 = 2.0;
    config.c2 = 2.0;
    config.m = 8.0;
    config.d = 1.0;
    config.S = 128;
    config.K = 2500;
    config.hypergrad.eta = 0.5;
    config.hypergrad.Q = 3;
    config.x0 = lambda0;
    config.y0 = w0;
    config.seed = 0;
    double best_val = 1e300;
    RunOptions options;
    options.sink = [&](const TraceRow& r) { best_val = std::min(best_val, r.val_loss); };
    run_mrbo(config, *problem, options);
    check_run("mrbo", best_val, lambda0, /*needs_auc=*/false);
  }
  {  // variance-reduced driver
    VrboConfig config;
    config.alpha = 100.0;
    config.beta = 0.5;
    config.S1 = 512;
    config.S2 = 32;
    config.period_q = 3;
    config.m_inner = 5;
    config.K = 1200;
    config.hypergrad.eta = 0.5;
    config.hypergrad.Q = 3;
    config.hypergrad.mode = HypergradMode::kPerSample;
    config.x0 = lambda0;
    config.y0 = w0;
    config.seed = 0;
    double best_val = 1e300;
    RunOptions options;
    options.sink = [&](const TraceRow& r) { best_val = std::min(best_val, r.val_loss); };
    const VrboState state = run_vrbo(config, *problem, options);
    check_run("vrbo", best_val, state.x, /*needs_auc=*/true);
  }
  {  // SGD baseline
    StocbioConfig config;
    config.alpha_out = 200.0;
    config.beta_in = 0.5;
    config.T_inner = 50;
    config.S = 128;
    config.K = 800;
    config.hypergrad.eta = 0.5;
    config.hypergrad.Q = 3;
    config.x0 = lambda0;
    config.y0 = w0;
    config.seed = 0;
    double best_val = 1e300;
    RunOptions options;
    options.sink = [&](const TraceRow& r) { best_val = std::min(best_val, r.val_loss); };
    const StocbioState state = run_stocbio(config, *problem, options);
    check_run("stocbio", best_val, state.x, /*needs_auc=*/true);
  }
}

// ---------------------------------------------------------------------------
// Criterion 8: sample accounting against the instrumented oracle.

void criterion_sample_accounting() {
  auto oracle = sq1(0.1, 64, 9);

  {
    CountingOracle counting(*oracle);
    MrboConfig config;
    config.S = 8;
    config.K = 100;
    config.hypergrad.eta = 0.5;
    config.hypergrad.Q = 3;
    config.x0 = {1.0};
    config.y0 = {0.5};
    const MrboState state = run_mrbo(config, counting, {});
    require(state.samples_used == counting.count(),
            "mrbo accounting: driver " + std::to_string(state.samples_used) +
                " vs oracle " + std::to_string(counting.count()));
  }
  {
    CountingOracle counting(*oracle);
    VrboConfig config;
    config.S1 = 16;
    config.S2 = 4;
    config.period_q = 3;
    config.m_inner = 2;
    config.K = 100;
    config.hypergrad.eta = 0.5;
    config.hypergrad.Q = 3;
    config.hypergrad.mode = HypergradMode::kPerSample;
    config.x0 = {1.0};
    config.y0 = {0.5};
    const VrboState state = run_vrbo(config, counting, {});
    require(state.samples_used == counting.count(),
            "vrbo accounting: driver " + std::to_string(state.samples_used) +
                " vs oracle " + std::to_string(counting.count()));
  }
  {
    CountingOracle counting(*oracle);
    StocbioConfig config;
    config.T_inner = 5;
    config.S = 8;
    config.K = 100;
    config.hypergrad.eta = 0.5;
    config.hypergrad.Q = 3;
    config.x0 = {1.0};
    config.y0 = {0.5};
    const StocbioState state = run_stocbio(config, counting, {});
    require(state.samples_used == counting.count(),
            "stocbio accounting: driver " + std::to_string(state.samples_used) +
                " vs oracle " + std::to_string(counting.count()));
  }
}

// ---------------------------------------------------------------------------
// Criterion 9: byte-level trace reproducibility except wall_ms.

std::string strip_wall_ms(const std::string& line) {
  std::string out;
  int field = 0;
  for (char ch : line) {
    if (ch == ',') {
      ++field;
      out += ch;
    } else if (field != 5) {
      out += ch;
    }
  }
  return out;
}

void criterion_determinism() {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "bilevel_acceptance_det";
  fs::remove_all(base);

  auto config_text = [&](const std::string& out_dir) {
    return "[problem]\nfamily = quadratic\np = 4\nq = 4\nmu = 0.5\n"
           "noise_scale = 0.1\nn_samples = 64\nc_x = 0.1\nseed = 5\n"
           "[algo.mrbo]\nK = 20\nS = 8\nQ = 2\n"
           "[algo.vrbo]\nK = 10\nS1 = 16\nS2 = 4\nm_inner = 2\n"
           "[algo.stocbio]\nK = 15\nS = 8\nT_inner = 4\n"
           "[run]\nseeds = 0,1\ndiagnostics = true\nout_dir = " +
           out_dir + "\n";
  };
  const fs::path dir_a = base / "a";
  const fs::path dir_b = base / "b";
  const ExperimentSummary sa =
      run_experiment(parse_config_text(config_text(dir_a.string())));
  const ExperimentSummary sb =
      run_experiment(parse_config_text(config_text(dir_b.string())));
  require(sa.all_ok() && sb.all_ok(), "grid runs failed");
  require(sa.cells.size() == 6, "expected 6 cells");

  for (const CellResult& cell : sa.cells) {
    std::ifstream fa(dir_a / (cell.run_id + ".csv"));
    std::ifstream fb(dir_b / (cell.run_id + ".csv"));
    require(fa.good() && fb.good(), "missing trace " + cell.run_id);
    std::string la, lb;
    std::size_t line_no = 0;
    while (true) {
      const bool ga = static_cast<bool>(std::getline(fa, la));
      const bool gb = static_cast<bool>(std::getline(fb, lb));
      require(ga == gb, cell.run_id + ": different row counts");
      if (!ga) break;
      ++line_no;
      require(strip_wall_ms(la) == strip_wall_ms(lb),
              cell.run_id + " line " + std::to_string(line_no) +
                  " differs beyond wall_ms");
    }
  }
  fs::remove_all(base);
}

// ---------------------------------------------------------------------------
// Criterion 10: theorem-condition self-checks on random admissible draws.

void criterion_theorem_self_checks() {
  RngStream rs(2718, "a10");
  for (int i = 0; i < 20; ++i) {
    SmoothnessConstants c;
    c.mu = 0.1 + 0.9 * rs.next_double();
    c.L = c.mu * (1.0 + 2.0 * rs.next_double());
    c.M = 0.1 + 3.0 * rs.next_double();
    c.tau = 2.0 * rs.next_double();
    c.rho = 2.0 * rs.next_double();
    c.sigma = 2.0 * rs.next_double();
    const double eta = (0.2 + 0.7 * rs.next_double()) / c.L;
    const int Q = static_cast<int>(rs.next_index(8));
    const double lambda = (0.05 + 0.9 * rs.next_double()) / (6.0 * c.L);
    const double d = 0.5 + 2.5 * rs.next_double();
    const std::size_t S = 1 + rs.next_index(16);
    const auto K = static_cast<std::int64_t>(10 + rs.next_index(5000));

    const MrboConfig mrbo = derive_mrbo_hyperparams(c, d, lambda, 1.0, eta, Q, S, K);
    const auto mrbo_violations = check_mrbo_theorem_conditions(mrbo, c);
    require(mrbo_violations.empty(),
            "draw " + std::to_string(i) + " violates: " +
                (mrbo_violations.empty() ? "" : mrbo_violations[0]));

    const std::size_t S2 = 64 + rs.next_index(64);
    const VrboTheoremParams p = derive_vrbo_hyperparams(c, eta, Q, S2);
    VrboConfig vrbo;
    vrbo.alpha = p.alpha;
    vrbo.beta = p.beta;
    vrbo.m_inner = p.m_inner;
    vrbo.period_q = p.period_q;
    vrbo.S1 = S2;
    vrbo.S2 = S2;
    vrbo.hypergrad.eta = eta;
    vrbo.hypergrad.Q = Q;
    const auto vrbo_violations = check_vrbo_theorem_conditions(vrbo, c);
    require(vrbo_violations.empty(),
            "draw " + std::to_string(i) + " violates: " +
                (vrbo_violations.empty() ? "" : vrbo_violations[0]));
  }
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;
  std::function<void()> run;
};

const Criterion kCriteria[] = {
    {1, "exact Neumann bias on the scalar instance", 1.0,
     criterion_exact_neumann_bias},
    {2, "deterministic bias below C_Q", 5.0, criterion_bias_bound},
    {3, "hypergradient correctness at Q = 60", 5.0,
     criterion_hypergrad_correctness},
    {4, "Monte-Carlo variance below G^2 and sigma'^2/S1", 60.0,
     criterion_variance_bounds},
    {5, "momentum driver: stationarity held, theorem-rate decay", 60.0,
     criterion_mrbo_convergence},
    {6, "variance-reduced driver: convergence and epoch resets", 120.0,
     criterion_vrbo_convergence},
    {7, "hyper-cleaning end to end", 360.0, criterion_hyperclean_end_to_end},
    {8, "sample accounting matches the instrumented oracle", 30.0,
     criterion_sample_accounting},
    {9, "byte-level trace reproducibility", 60.0, criterion_determinism},
    {10, "theorem-condition self-checks", 10.0, criterion_theorem_self_checks},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[i + 1]);
    }
  }

  int failures = 0;
  for (const Criterion& criterion : kCriteria) {
    if (only != 0 && criterion.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      criterion.run();
    } catch (const CheckFailure& f) {
      error = f.message;
    } catch (const std::exception& e) {
      error = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start)
            .count() /
        1000.0;
    if (error.empty() && elapsed > criterion.time_limit_s) {
      error = "runtime " + fmt(elapsed) + "s exceeds limit " +
              fmt(criterion.time_limit_s) + "s";
    }
    if (error.empty()) {
      std::printf("[PASS] criterion %2d (%5.1fs): %s\n", criterion.id, elapsed,
                  criterion.name);
    } else {
      std::printf("[FAIL] criterion %2d (%5.1fs): %s\n         %s\n",
                  criterion.id, elapsed, criterion.name, error.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
