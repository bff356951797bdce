#pragma once

#include <cstdint>

#include "bilevel/hypergrad.hpp"
#include "bilevel/oracle.hpp"
#include "bilevel/trace.hpp"

namespace bilevel {

// Step-size schedule d / (m + k)^{1/3}.
double eta_schedule(double d, double m, std::int64_t k);

// STORM momentum combine: fresh + (1 - alpha)(v_prev - fresh_at_prev).
Vector storm_combine(const Vector& fresh, double alpha, const Vector& v_prev,
                     const Vector& fresh_at_prev);

// Momentum-recursive single-loop driver. Both the inner gradient and the
// hypergradient carry STORM estimators; momentum coefficients follow
// alpha_{k+1} = c1 eta_k^2, beta_{k+1} = c2 eta_k^2 with the eta schedule
// above. Updates: x <- x - gamma eta_k v_k, y <- y - lambda eta_k u_k.
struct MrboConfig {
  double gamma = 0.1;
  double lambda = 0.1;
  double c1 = 2.0;
  double c2 = 2.0;
  double m = 8.0;
  double d = 1.0;
  std::size_t S = 32;
  std::int64_t K = 100;
  HypergradConfig hypergrad;  // mode must be shared_batch
  Vector x0;
  Vector y0;
  std::uint64_t seed = 0;
  // Evaluate the previous-point estimators on the current iteration's
  // batches (the STORM convention). Off = independent batches, for ablation.
  bool reuse_prev_batch = true;
};

struct MrboState {
  std::int64_t k = 0;
  Vector x;
  Vector y;
  Vector v;  // hypergradient momentum estimator
  Vector u;  // inner-gradient momentum estimator
  Vector prev_x;
  Vector prev_y;
  std::int64_t samples_used = 0;
};

// One iteration: draws B_y and the B_x component batches from children of
// `run_root` keyed by state.k, refreshes (v, u), then applies the updates.
MrboState mrbo_step(MrboState state, const MrboConfig& config,
                    const BilevelOracle& oracle, const RngStream& run_root);

MrboState run_mrbo(const MrboConfig& config, const BilevelOracle& oracle,
                   const RunOptions& options = {});

}  // namespace bilevel
