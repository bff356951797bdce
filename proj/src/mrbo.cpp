#include "bilevel/mrbo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "driver_common.hpp"

namespace bilevel {
namespace {

void validate(const MrboConfig& config, const BilevelOracle& oracle) {
  if (!(config.gamma > 0.0) || !(config.lambda > 0.0)) {
    throw InvalidArgumentError("mrbo: step scales must be positive");
  }
  if (!(config.c1 > 0.0) || !(config.c2 > 0.0)) {
    throw InvalidArgumentError("mrbo: momentum coefficients must be positive");
  }
  if (!(config.m >= 1.0) || !(config.d > 0.0)) {
    throw InvalidArgumentError("mrbo: need m >= 1 and d > 0");
  }
  if (config.S < 1 || config.K < 1) {
    throw InvalidArgumentError("mrbo: need S >= 1 and K >= 1");
  }
  if (config.hypergrad.mode != HypergradMode::kSharedBatch) {
    throw InvalidArgumentError("mrbo: hypergradient mode must be shared_batch");
  }
  if (config.x0.size() != oracle.outer_dim() ||
      config.y0.size() != oracle.inner_dim()) {
    throw InvalidArgumentError("mrbo: initial point has wrong dimension");
  }
  // Momentum coefficients peak at k = 1; eta_k is non-increasing. Values
  // above 1 are clamped in the step (momentum fully disabled), so only
  // positivity is rejected here.
  const double eta0 = eta_schedule(config.d, config.m, 0);
  if (!(config.c1 * eta0 * eta0 > 0.0) || !(config.c2 * eta0 * eta0 > 0.0)) {
    throw InvalidArgumentError("mrbo: momentum coefficients must be positive");
  }
}

}  // namespace

double eta_schedule(double d, double m, std::int64_t k) {
  if (!(d > 0.0) || !(m >= 1.0) || k < 0) {
    throw InvalidArgumentError("eta_schedule: need d > 0, m >= 1, k >= 0");
  }
  return d / std::cbrt(m + static_cast<double>(k));
}

Vector storm_combine(const Vector& fresh, double alpha, const Vector& v_prev,
                     const Vector& fresh_at_prev) {
  Vector out = fresh;
  Vector drift = sub(v_prev, fresh_at_prev);
  add_scaled(out, 1.0 - alpha, drift);
  return out;
}

MrboState mrbo_step(MrboState state, const MrboConfig& config,
                    const BilevelOracle& oracle, const RngStream& run_root) {
  const std::int64_t k = state.k;
  RngStream kstream = run_root.child("k" + std::to_string(k));
  const int Q = config.hypergrad.Q;

  HypergradConfig hg = config.hypergrad;
  hg.batch_size = config.S;

  RngStream bx = kstream.child("Bx");
  const HypergradSampleSet samples = draw_hypergrad_samples(bx, oracle, hg);
  RngStream by = kstream.child("By");
  const BatchIndices batch_y = sample_batch(by, oracle.n_inner(), config.S);

  if (k == 0) {
    state.v = estimate_hypergrad_shared(oracle, state.x, state.y, hg, samples);
    state.u = oracle.inner_grad_y(state.x, state.y, batch_y);
    state.samples_used += detail::hypergrad_cost(config.S, Q) +
                          static_cast<std::int64_t>(config.S);
  } else {
    // alpha_k and beta_k were fixed at the end of step k-1 from eta_{k-1}.
    const double eta_prev = eta_schedule(config.d, config.m, k - 1);
    const double alpha_k = std::min(1.0, config.c1 * eta_prev * eta_prev);
    const double beta_k = std::min(1.0, config.c2 * eta_prev * eta_prev);

    const Vector g_cur =
        estimate_hypergrad_shared(oracle, state.x, state.y, hg, samples);
    const Vector gy_cur = oracle.inner_grad_y(state.x, state.y, batch_y);

    Vector g_prev, gy_prev;
    if (config.reuse_prev_batch) {
      g_prev = estimate_hypergrad_shared(oracle, state.prev_x, state.prev_y, hg,
                                         samples);
      gy_prev = oracle.inner_grad_y(state.prev_x, state.prev_y, batch_y);
    } else {
      RngStream bx2 = kstream.child("Bx-prev");
      const HypergradSampleSet samples2 = draw_hypergrad_samples(bx2, oracle, hg);
      RngStream by2 = kstream.child("By-prev");
      const BatchIndices batch_y2 = sample_batch(by2, oracle.n_inner(), config.S);
      g_prev = estimate_hypergrad_shared(oracle, state.prev_x, state.prev_y, hg,
                                         samples2);
      gy_prev = oracle.inner_grad_y(state.prev_x, state.prev_y, batch_y2);
    }
    state.v = storm_combine(g_cur, alpha_k, state.v, g_prev);
    state.u = storm_combine(gy_cur, beta_k, state.u, gy_prev);
    state.samples_used += 2 * detail::hypergrad_cost(config.S, Q) +
                          2 * static_cast<std::int64_t>(config.S);
  }

  const double eta_k = eta_schedule(config.d, config.m, k);
  state.prev_x = state.x;
  state.prev_y = state.y;
  add_scaled(state.x, -config.gamma * eta_k, state.v);
  add_scaled(state.y, -config.lambda * eta_k, state.u);
  detail::check_iterate(state.x, k, "x iterate");
  detail::check_iterate(state.y, k, "y iterate");
  state.k = k + 1;
  return state;
}

MrboState run_mrbo(const MrboConfig& config, const BilevelOracle& oracle,
                   const RunOptions& options) {
  validate(config, oracle);
  detail::RunTimer timer;
  const RunOptions opts = detail::with_wall_clock(options, timer);
  RngStream root(config.seed, "mrbo");

  MrboState state;
  state.x = config.x0;
  state.y = config.y0;
  state.prev_x = config.x0;
  state.prev_y = config.y0;

  for (std::int64_t k = 0; k < config.K; ++k) {
    if (opts.stop && opts.stop()) break;
    // Keep the pre-update point; the row describes iteration k.
    const Vector x_k = state.x;
    const Vector y_k = state.y;
    state = mrbo_step(std::move(state), config, oracle, root);

    detail::notify(opts, k, x_k, y_k, &state.v, &state.u, state.samples_used);
    if (opts.sink) {
      TraceRow row = detail::make_row(k, state.samples_used, oracle, x_k, y_k);
      if (opts.diagnostics) {
        detail::fill_diagnostics(row, oracle, x_k, y_k, &state.v, &state.u,
                                 config.hypergrad.eta, config.hypergrad.Q);
      }
      opts.sink(row);
    }
  }
  return state;
}

}  // namespace bilevel
