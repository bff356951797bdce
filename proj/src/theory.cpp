#include "bilevel/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bilevel/finite_diff.hpp"
#include "bilevel/hypergrad.hpp"

namespace bilevel {
namespace {

void check_base_constants(const SmoothnessConstants& c) {
  if (!(c.mu > 0.0)) throw InvalidArgumentError("constants: mu must be positive");
  if (!(c.mu <= c.L)) throw InvalidArgumentError("constants: need mu <= L");
  if (c.M < 0.0 || c.tau < 0.0 || c.rho < 0.0 || c.sigma < 0.0) {
    throw InvalidArgumentError("constants: negative constant");
  }
}

void check_eta(const SmoothnessConstants& c, double eta) {
  if (!(eta > 0.0) || !(eta * c.mu < 1.0)) {
    throw InvalidArgumentError("constants: need 0 < eta * mu < 1");
  }
  if (!(eta < 1.0 / c.L)) {
    throw InvalidArgumentError("constants: need eta < 1/L");
  }
}

double sq(double x) { return x * x; }

// gamma <= lambda mu / sqrt(150 L'^2 L^2 / mu^2 + 8 lambda mu (L_Q^2 + L^2))
double mrbo_gamma_cap_coupling(const SmoothnessConstants& c,
                               const DerivedConstants& dc, double lambda) {
  const double denom =
      std::sqrt(150.0 * sq(dc.L_prime) * sq(c.L) / sq(c.mu) +
                8.0 * lambda * c.mu * (sq(dc.L_Q) + sq(c.L)));
  return lambda * c.mu / denom;
}

}  // namespace

DerivedConstants derive_constants(const SmoothnessConstants& c, double eta, int Q,
                                  std::size_t S) {
  check_base_constants(c);
  check_eta(c, eta);
  if (Q < 0) throw InvalidArgumentError("derive_constants: Q must be >= 0");
  if (S < 1) throw InvalidArgumentError("derive_constants: S must be >= 1");

  const double mu = c.mu, L = c.L, M = c.M, tau = c.tau, rho = c.rho;
  const double Q1 = static_cast<double>(Q) + 1.0;
  const double Qd = static_cast<double>(Q);
  const double Sd = static_cast<double>(S);

  DerivedConstants dc;
  dc.L_phi = L + (2.0 * sq(L) + tau * sq(M)) / mu +
             (rho * L * M + L * sq(L) + tau * M * L) / sq(mu) +
             rho * sq(L) * M / (sq(mu) * mu);
  const double LQ_sq = 2.0 * sq(L) + 4.0 * sq(tau) * sq(eta) * sq(M) * sq(Q1) +
                       8.0 * sq(sq(L)) * sq(eta) * sq(Q1) +
                       2.0 * sq(L) * sq(sq(eta)) * sq(M) * sq(rho) * sq(Qd) * sq(Q1);
  dc.L_Q = std::sqrt(LQ_sq);
  const double implicit_grad_const = L + sq(L) / mu + M * tau / mu + L * M * rho / sq(mu);
  dc.L_prime = std::sqrt(std::max(sq(implicit_grad_const), LQ_sq));
  dc.C_Q = bias_bound_cq(mu, M, L, eta, Q);
  dc.G_sq = 2.0 * sq(M) / Sd + 12.0 * sq(M) * sq(L) * sq(eta) * sq(Q1) / Sd +
            4.0 * sq(M) * sq(L) * (Qd + 2.0) * sq(Q1) * sq(sq(eta)) * sq(c.sigma) / Sd;
  dc.sigma_prime_sq = 2.0 * sq(M) + 28.0 * sq(L) * sq(M) * sq(eta) * sq(Q1);
  return dc;
}

MrboConfig derive_mrbo_hyperparams(const SmoothnessConstants& c, double d,
                                   double lambda, double gamma_hint, double eta,
                                   int Q, std::size_t S, std::int64_t K) {
  check_base_constants(c);
  check_eta(c, eta);
  if (!(d > 0.0)) throw InvalidArgumentError("derive_mrbo: d must be positive");
  if (!(lambda > 0.0) || !(lambda <= 1.0 / (6.0 * c.L))) {
    throw InvalidArgumentError("derive_mrbo: need 0 < lambda <= 1/(6L)");
  }
  if (!(gamma_hint > 0.0)) {
    throw InvalidArgumentError("derive_mrbo: gamma_hint must be positive");
  }
  if (K < 1) throw InvalidArgumentError("derive_mrbo: K must be >= 1");

  const DerivedConstants dc = derive_constants(c, eta, Q, S);
  MrboConfig config;
  config.d = d;
  config.lambda = lambda;
  config.c1 = 2.0 / (3.0 * d * d * d) + 9.0 * lambda * c.mu / 4.0;
  config.c2 = 2.0 / (3.0 * d * d * d) + 75.0 * sq(dc.L_prime) * lambda / (2.0 * c.mu);
  config.m = std::max({2.0, d * d * d, std::pow(config.c1 * d, 3.0),
                       std::pow(config.c2 * d, 3.0)});
  const double eta_K = eta_schedule(d, config.m, K);
  config.gamma = std::min({gamma_hint, 1.0 / (4.0 * dc.L_phi * eta_K),
                           mrbo_gamma_cap_coupling(c, dc, lambda)});
  config.S = S;
  config.K = K;
  config.hypergrad.eta = eta;
  config.hypergrad.Q = Q;
  config.hypergrad.mode = HypergradMode::kSharedBatch;
  config.hypergrad.batch_size = S;
  return config;
}

double schedule_active_lambda(const SmoothnessConstants& c, double d, double eta,
                              int Q) {
  check_base_constants(c);
  check_eta(c, eta);
  if (!(d > 0.0)) throw InvalidArgumentError("schedule_active_lambda: d must be > 0");
  const DerivedConstants dc = derive_constants(c, eta, Q, 1);
  // m = max{2, d^3} holds iff c2 d <= max(2^{1/3}, d); c1 <= c2 throughout.
  const double c2_target = 0.999 * std::min(1.0, std::cbrt(2.0) / d);
  const double lam = (c2_target - 2.0 / (3.0 * d * d * d)) * 2.0 * c.mu /
                     (75.0 * sq(dc.L_prime));
  const double cap = 1.0 / (6.0 * c.L);
  if (!(lam > 0.0)) return cap;
  return std::min(lam, cap);
}

VrboTheoremParams derive_vrbo_hyperparams(const SmoothnessConstants& c, double eta,
                                          int Q, std::size_t S2) {
  check_base_constants(c);
  check_eta(c, eta);
  if (S2 < 1) throw InvalidArgumentError("derive_vrbo: S2 must be >= 1");
  const DerivedConstants dc = derive_constants(c, eta, Q, /*S=*/1);
  VrboTheoremParams p;
  const double L_m = std::max(dc.L_Q, dc.L_phi);
  p.alpha = 1.0 / (20.0 * L_m * L_m * L_m);
  p.beta = 2.0 / (13.0 * dc.L_Q);
  const double s2_bound = 2.0 * (c.L / c.mu + 1.0) * c.L * p.beta;
  if (static_cast<double>(S2) < s2_bound) {
    throw InvalidArgumentError("derive_vrbo: S2 too small, need S2 >= " +
                               std::to_string(s2_bound));
  }
  p.m_inner = static_cast<std::int64_t>(std::ceil(16.0 / (c.mu * p.beta))) - 1;
  p.period_q = static_cast<std::int64_t>(
      std::ceil(c.mu * c.L * p.beta * static_cast<double>(S2) / (c.mu + c.L)));
  return p;
}

std::vector<std::string> check_mrbo_theorem_conditions(const MrboConfig& config,
                                                       const SmoothnessConstants& c) {
  std::vector<std::string> bad;
  const double eta = config.hypergrad.eta;
  const double rel = 1.0 + 1e-9;
  if (!(eta < 1.0 / c.L)) bad.push_back("eta < 1/L");
  if (!(eta * c.mu < 1.0)) bad.push_back("eta * mu < 1");
  if (!(config.lambda >= 0.0 && config.lambda <= rel / (6.0 * c.L))) {
    bad.push_back("0 <= lambda <= 1/(6L)");
  }
  const DerivedConstants dc =
      derive_constants(c, eta, config.hypergrad.Q, config.S);
  if (!(config.c1 * rel >= 2.0 / (3.0 * std::pow(config.d, 3.0)) +
                              9.0 * config.lambda * c.mu / 4.0)) {
    bad.push_back("c1 >= 2/(3d^3) + 9 lambda mu / 4");
  }
  if (!(config.c2 * rel >= 2.0 / (3.0 * std::pow(config.d, 3.0)) +
                              75.0 * sq(dc.L_prime) * config.lambda / (2.0 * c.mu))) {
    bad.push_back("c2 >= 2/(3d^3) + 75 L'^2 lambda / (2 mu)");
  }
  const double m_req = std::max({2.0, std::pow(config.d, 3.0),
                                 std::pow(config.c1 * config.d, 3.0),
                                 std::pow(config.c2 * config.d, 3.0)});
  if (!(config.m * rel >= m_req)) {
    bad.push_back("m >= max{2, d^3, (c1 d)^3, (c2 d)^3}");
  }
  const double eta_K = eta_schedule(config.d, config.m, config.K);
  if (!(config.gamma >= 0.0)) bad.push_back("gamma >= 0");
  if (!(config.gamma <= rel / (4.0 * dc.L_phi * eta_K))) {
    bad.push_back("gamma <= 1/(4 L_phi eta_K)");
  }
  if (!(config.gamma <= rel * mrbo_gamma_cap_coupling(c, dc, config.lambda))) {
    bad.push_back("gamma <= lambda mu / sqrt(150 L'^2 L^2/mu^2 + 8 lambda mu (L_Q^2 + L^2))");
  }
  const double eta0 = eta_schedule(config.d, config.m, 0);
  const double alpha1 = config.c1 * eta0 * eta0;
  const double beta1 = config.c2 * eta0 * eta0;
  if (!(alpha1 > 0.0 && alpha1 <= rel)) bad.push_back("alpha_1 = c1 eta_0^2 in (0,1]");
  if (!(beta1 > 0.0 && beta1 <= rel)) bad.push_back("beta_1 = c2 eta_0^2 in (0,1]");
  return bad;
}

std::vector<std::string> check_vrbo_theorem_conditions(const VrboConfig& config,
                                                       const SmoothnessConstants& c) {
  std::vector<std::string> bad;
  const double eta = config.hypergrad.eta;
  if (!(eta < 1.0 / c.L)) bad.push_back("eta < 1/L");
  if (!(eta * c.mu < 1.0)) bad.push_back("eta * mu < 1");
  const DerivedConstants dc = derive_constants(c, eta, config.hypergrad.Q, 1);
  const double L_m = std::max(dc.L_Q, dc.L_phi);
  const double alpha_target = 1.0 / (20.0 * L_m * L_m * L_m);
  const double beta_target = 2.0 / (13.0 * dc.L_Q);
  if (std::abs(config.alpha - alpha_target) > 1e-9 * alpha_target) {
    bad.push_back("alpha = 1/(20 L_m^3)");
  }
  if (std::abs(config.beta - beta_target) > 1e-9 * beta_target) {
    bad.push_back("beta = 2/(13 L_Q)");
  }
  if (!(config.beta <= (1.0 + 1e-9) / (2.0 * c.L))) bad.push_back("beta <= 1/(2L)");
  if (!(static_cast<double>(config.S2) >=
        2.0 * (c.L / c.mu + 1.0) * c.L * config.beta * (1.0 - 1e-9))) {
    bad.push_back("S2 >= 2 (L/mu + 1) L beta");
  }
  if (!(static_cast<double>(config.m_inner) + 1.0 >=
        16.0 / (c.mu * config.beta) * (1.0 - 1e-9))) {
    bad.push_back("m_inner + 1 >= 16/(mu beta)");
  }
  const double q_req = c.mu * c.L * config.beta * static_cast<double>(config.S2) /
                       (c.mu + c.L);
  if (!(static_cast<double>(config.period_q) >= q_req * (1.0 - 1e-9)) ||
      config.period_q < 1) {
    bad.push_back("period_q >= mu L beta S2 / (mu + L)");
  }
  return bad;
}

double mrbo_rate_constant(const MrboConfig& config, const SmoothnessConstants& c,
                          double phi_gap) {
  const DerivedConstants dc =
      derive_constants(c, config.hypergrad.eta, config.hypergrad.Q, config.S);
  const double eta0 = eta_schedule(config.d, config.m, 0);
  const double eta_K = eta_schedule(config.d, config.m, config.K);
  const double logterm =
      std::log(config.m + static_cast<double>(config.K));
  return phi_gap / (config.gamma * config.d) +
         (2.0 * dc.G_sq * (sq(config.c1) + sq(config.c2)) * sq(config.d) /
              (config.lambda * c.mu) +
          2.0 * sq(dc.C_Q) * sq(config.d) / sq(eta_K)) *
             logterm +
         2.0 * dc.G_sq /
             (static_cast<double>(config.S) * config.lambda * c.mu * config.d * eta0);
}

double vrbo_step_margin(const VrboConfig& config, const SmoothnessConstants& c) {
  const DerivedConstants dc =
      derive_constants(c, config.hypergrad.eta, config.hypergrad.Q, 1);
  const double a = config.alpha;
  return a / 2.0 - dc.L_phi * sq(a) / 2.0 -
         62.0 * a * sq(a) * sq(dc.L_prime) * sq(dc.L_Q) / sq(c.mu) -
         44.0 * a * sq(a) * sq(dc.L_Q);
}

Vector solve_inner_descent(const BilevelOracle& oracle, const Vector& x,
                           const Vector& y_start, double tol,
                           std::int64_t max_iters) {
  const BatchIndices full = oracle.full_inner_batch();
  Vector y = y_start;

  // Step size from the dominant Hessian eigenvalue at the start point.
  RngStream rs(0, "inner-descent-powiter");
  Vector probe(oracle.inner_dim());
  for (double& e : probe) e = rs.next_gaussian();
  double lam = 1.0;
  for (int i = 0; i < 50; ++i) {
    Vector w = oracle.inner_hvp_yy(x, y, probe, full);
    const double n = norm(w);
    if (n == 0.0) break;
    lam = n / norm(probe);
    probe = scale(1.0 / n, w);
  }
  const double step = 1.0 / lam;

  for (std::int64_t it = 0; it < max_iters; ++it) {
    const Vector g = oracle.inner_grad_y(x, y, full);
    if (norm(g) <= tol) return y;
    add_scaled(y, -step, g);
  }
  const Vector g = oracle.inner_grad_y(x, y, full);
  if (norm(g) <= tol) return y;
  throw NumericDomainError("solve_inner_descent: did not reach tolerance");
}

double stationarity_measure(const BilevelOracle& oracle, const Vector& x,
                            bool fd_fallback) {
  if (oracle.has_analytic_hypergradient()) {
    return norm_sq(oracle.analytic_hypergrad(x));
  }
  if (!fd_fallback) {
    throw UnsupportedOperationError(
        "stationarity_measure: no analytic hypergradient and fd_fallback off");
  }
  const Vector y0 = zeros(oracle.inner_dim());
  auto phi = [&](const Vector& xp) {
    const Vector yh = solve_inner_descent(oracle, xp, y0, 1e-10);
    return oracle.loss(xp, yh, Split::kValidation);
  };
  const Vector g = finite_difference_grad(phi, x);
  return norm_sq(g);
}

Diagnostics compute_diagnostics(const BilevelOracle& oracle, const Vector& x,
                                const Vector& y, const Vector* v, const Vector* u,
                                double eta, int Q) {
  Diagnostics d;
  const Vector gy_full = oracle.inner_grad_y(x, y, oracle.full_inner_batch());
  d.delta_small = norm_sq(gy_full);
  if (v != nullptr) {
    const Vector nabla_bar = estimate_hypergrad_full(oracle, x, y, eta, Q);
    d.eps_bar_sq = norm_sq(sub(*v, nabla_bar));
    if (u != nullptr) {
      d.delta_cap = *d.eps_bar_sq + norm_sq(sub(*u, gy_full));
    }
  }
  if (oracle.has_exact_inner_solution()) {
    d.tracking_sq = norm_sq(sub(y, oracle.solve_inner_exact(x)));
  }
  if (oracle.has_analytic_hypergradient()) {
    d.grad_norm_sq = norm_sq(oracle.analytic_hypergrad(x));
  }
  return d;
}

SmoothnessConstants estimate_constants_empirical(const BilevelOracle& oracle,
                                                 const Vector& x_center,
                                                 const Vector& y_center,
                                                 double radius,
                                                 std::size_t n_points,
                                                 RngStream& stream) {
  if (!(radius > 0.0) || n_points < 2) {
    throw InvalidArgumentError("estimate_constants_empirical: bad radius or count");
  }
  const std::size_t p = oracle.outer_dim();
  const std::size_t q = oracle.inner_dim();
  const BatchIndices full_inner = oracle.full_inner_batch();

  auto random_point = [&](RngStream& rs, const Vector& center, std::size_t dim) {
    Vector g(dim);
    for (double& e : g) e = rs.next_gaussian();
    const double n = norm(g);
    const double r = radius * rs.next_double();
    Vector out = center;
    if (n > 0.0) add_scaled(out, r / n, g);
    return out;
  };

  SmoothnessConstants c;
  double mu_min = std::numeric_limits<double>::infinity();
  Vector prev_x, prev_y, prev_gy, prev_hvp, prev_jvp, prev_gfx, prev_gfy, dir;
  RngStream point_rs = stream.child("points");
  RngStream sample_rs = stream.child("samples");
  for (std::size_t it = 0; it < n_points; ++it) {
    const Vector xp = random_point(point_rs, x_center, p);
    const Vector yp = random_point(point_rs, y_center, q);
    if (it == 0) {
      dir.assign(q, 0.0);
      for (double& e : dir) e = point_rs.next_gaussian();
      const double n = norm(dir);
      if (n > 0.0) dir = scale(1.0 / n, dir);
    }

    // Single-sample probes for M and the Lipschitz constants.
    BatchIndices zeta = sample_batch(sample_rs, oracle.n_inner(), 1);
    BatchIndices xi = sample_batch(sample_rs, oracle.n_outer(), 1);
    const OuterGrads og = oracle.outer_grads(xp, yp, xi);
    c.M = std::max(c.M, std::sqrt(norm_sq(og.grad_x) + norm_sq(og.grad_y)));
    const Vector gy = oracle.inner_grad_y(xp, yp, zeta);
    const Vector hvp = oracle.inner_hvp_yy(xp, yp, dir, zeta);
    const Vector jvp = oracle.inner_jvp_xy(xp, yp, dir, zeta);
    c.L = std::max(c.L, norm(hvp));
    c.L = std::max(c.L, norm(jvp));

    // Curvature extremes from the full-population Hessian.
    const Vector hvp_full = oracle.inner_hvp_yy(xp, yp, dir, full_inner);
    mu_min = std::min(mu_min, dot(dir, hvp_full));

    // Per-sample inner-gradient variance around the full-population mean.
    const Vector gy_full = oracle.inner_grad_y(xp, yp, full_inner);
    double var = 0.0;
    const int probes = 16;
    for (int s = 0; s < probes; ++s) {
      BatchIndices single = sample_batch(sample_rs, oracle.n_inner(), 1);
      var += norm_sq(sub(oracle.inner_grad_y(xp, yp, single), gy_full));
    }
    c.sigma = std::max(c.sigma, std::sqrt(var / probes));

    if (it > 0) {
      const double dist = std::sqrt(norm_sq(sub(xp, prev_x)) + norm_sq(sub(yp, prev_y)));
      if (dist > 1e-12) {
        c.L = std::max(c.L, norm(sub(gy, prev_gy)) / dist);
        c.L = std::max(c.L, std::sqrt(norm_sq(sub(og.grad_x, prev_gfx)) +
                                      norm_sq(sub(og.grad_y, prev_gfy))) / dist);
        c.rho = std::max(c.rho, norm(sub(hvp, prev_hvp)) / dist);
        c.tau = std::max(c.tau, norm(sub(jvp, prev_jvp)) / dist);
      }
    }
    prev_x = xp; prev_y = yp; prev_gy = gy; prev_hvp = hvp; prev_jvp = jvp;
    prev_gfx = og.grad_x; prev_gfy = og.grad_y;
  }
  c.M *= 1.5;
  c.L *= 1.5;
  c.tau *= 1.5;
  c.rho *= 1.5;
  c.sigma *= 1.5;
  c.mu = mu_min / 1.5;
  if (!(c.mu > 0.0)) {
    throw NumericDomainError("estimate_constants_empirical: non-positive curvature observed");
  }
  c.L = std::max(c.L, c.mu);
  return c;
}

}  // namespace bilevel
