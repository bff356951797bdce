#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bilevel/mrbo.hpp"
#include "bilevel/oracle.hpp"
#include "bilevel/rng.hpp"
#include "bilevel/vrbo.hpp"

namespace bilevel {

// Constants derived from the base smoothness constants for a given estimator
// setting (eta, Q) and minibatch size S.
struct DerivedConstants {
  double L_phi = 0.0;           // smoothness of Phi
  double L_Q = 0.0;             // Lipschitz constant of the stochastic estimator
  double L_prime = 0.0;         // max of the implicit-gradient and estimator constants
  double C_Q = 0.0;             // Hessian-inverse truncation bias bound
  double G_sq = 0.0;            // minibatch estimator variance bound
  double sigma_prime_sq = 0.0;  // single-sample estimator variance bound
};

DerivedConstants derive_constants(const SmoothnessConstants& c, double eta, int Q,
                                  std::size_t S);

// Hyperparameters satisfying every stated convergence condition of the
// momentum driver, instantiated at equality (the tightest admissible values).
// The caller supplies lambda (<= 1/(6L)), the schedule constant d, a gamma
// cap, and the estimator settings; x0/y0/seed are left for the caller.
MrboConfig derive_mrbo_hyperparams(const SmoothnessConstants& c, double d,
                                   double lambda, double gamma_hint, double eta,
                                   int Q, std::size_t S, std::int64_t K);

// Largest admissible lambda that keeps the schedule constant m at
// max(2, d^3), i.e. keeps eta_k actually decaying over desk-scale horizons
// instead of freezing near 1/c2. Falls back to 1/(6L) when d is too small
// for that regime.
double schedule_active_lambda(const SmoothnessConstants& c, double d, double eta,
                              int Q);

struct VrboTheoremParams {
  double alpha = 0.0;
  double beta = 0.0;
  std::int64_t m_inner = 0;
  std::int64_t period_q = 0;
};

VrboTheoremParams derive_vrbo_hyperparams(const SmoothnessConstants& c, double eta,
                                          int Q, std::size_t S2);

// Re-check every stated theorem inequality against a config. Returns the
// violated conditions by name; empty means the config is admissible.
std::vector<std::string> check_mrbo_theorem_conditions(const MrboConfig& config,
                                                       const SmoothnessConstants& c);
std::vector<std::string> check_vrbo_theorem_conditions(const VrboConfig& config,
                                                       const SmoothnessConstants& c);

// Informational only, never used for control flow.
double mrbo_rate_constant(const MrboConfig& config, const SmoothnessConstants& c,
                          double phi_gap);           // M' of the momentum rate
double vrbo_step_margin(const VrboConfig& config, const SmoothnessConstants& c);
                                                     // 1/L'' of the VR analysis

// |grad Phi(x)|^2. Uses the analytic hypergradient when available; otherwise,
// with fd_fallback, central differences of x -> f(x, y(x)) with the inner
// problem solved to 1e-10 by full-batch descent.
double stationarity_measure(const BilevelOracle& oracle, const Vector& x,
                            bool fd_fallback = false);

// Full-batch descent to |grad_y g| <= tol; the fallback inner solver.
Vector solve_inner_descent(const BilevelOracle& oracle, const Vector& x,
                           const Vector& y_start, double tol = 1e-10,
                           std::int64_t max_iters = 2000000);

// Estimator-error diagnostics at one optimization step. Fields are absent
// when the oracle lacks the needed capability.
struct Diagnostics {
  std::optional<double> eps_bar_sq;
  std::optional<double> delta_cap;
  std::optional<double> delta_small;
  std::optional<double> tracking_sq;
  std::optional<double> grad_norm_sq;
};

// The reference value for eps_bar is the deterministic full-population
// truncated-Neumann hypergradient at (x, y) with the run's (eta, Q).
Diagnostics compute_diagnostics(const BilevelOracle& oracle, const Vector& x,
                                const Vector& y, const Vector* v, const Vector* u,
                                double eta, int Q);

// Ball-sampled estimates of the base constants, max observed norms times a
// 1.5 safety factor (mu divided by it). For problem families whose true
// global constants do not exist, these are the constants "valid on a stated
// iterate ball".
SmoothnessConstants estimate_constants_empirical(const BilevelOracle& oracle,
                                                 const Vector& x_center,
                                                 const Vector& y_center,
                                                 double radius,
                                                 std::size_t n_points,
                                                 RngStream& stream);

}  // namespace bilevel
