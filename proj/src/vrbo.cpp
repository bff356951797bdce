#include "bilevel/vrbo.hpp"

#include <string>

#include "driver_common.hpp"

namespace bilevel {
namespace {

void validate(const VrboConfig& config, const BilevelOracle& oracle) {
  if (!(config.alpha > 0.0) || !(config.beta > 0.0)) {
    throw InvalidArgumentError("vrbo: step sizes must be positive");
  }
  if (config.S1 < config.S2 || config.S2 < 1) {
    throw InvalidArgumentError("vrbo: need S1 >= S2 >= 1");
  }
  if (config.period_q < 1) {
    throw InvalidArgumentError("vrbo: period must be >= 1");
  }
  if (config.m_inner < 0) {
    throw InvalidArgumentError("vrbo: m_inner must be >= 0");
  }
  if (config.K < 1) throw InvalidArgumentError("vrbo: K must be >= 1");
  if (config.hypergrad.mode != HypergradMode::kPerSample) {
    throw InvalidArgumentError("vrbo: hypergradient mode must be per_sample");
  }
  if (config.x0.size() != oracle.outer_dim() ||
      config.y0.size() != oracle.inner_dim()) {
    throw InvalidArgumentError("vrbo: initial point has wrong dimension");
  }
}

// The inner-gradient batch reuses the chains' JVP samples zeta_i.
BatchIndices chain_zeta_batch(const HypergradSampleSet& samples,
                              std::size_t source_size) {
  BatchIndices batch;
  batch.source_size = source_size;
  batch.indices.reserve(samples.chains.size());
  for (const SampleChain& chain : samples.chains) {
    batch.indices.push_back(chain.jacobian.indices.front());
  }
  return batch;
}

}  // namespace

Vector sarah_combine(const Vector& prev, const Vector& new_est,
                     const Vector& old_est) {
  // prev + (new - old): the difference term cancels bitwise when the two
  // evaluation points coincide, so the estimator carries over exactly.
  Vector out = sub(new_est, old_est);
  return add(prev, out);
}

VrboState vrbo_outer_step(VrboState state, const VrboConfig& config,
                          const BilevelOracle& oracle, const RngStream& run_root,
                          const RunOptions& options) {
  const std::int64_t k = state.k;
  RngStream kstream = run_root.child("k" + std::to_string(k));
  const int Q = config.hypergrad.Q;

  HypergradConfig hg_large = config.hypergrad;
  hg_large.batch_size = config.S1;
  HypergradConfig hg_small = config.hypergrad;
  hg_small.batch_size = config.S2;

  state.epoch_phase = k % config.period_q;
  if (state.epoch_phase == 0) {
    // Epoch start: fresh large-batch estimators replace the carried ones.
    RngStream s1 = kstream.child("S1");
    const HypergradSampleSet samples = draw_hypergrad_samples(s1, oracle, hg_large);
    state.v = estimate_hypergrad_per_sample(oracle, state.x, state.y, hg_large,
                                            samples);
    state.u = oracle.inner_grad_y(state.x, state.y,
                                  chain_zeta_batch(samples, oracle.n_inner()));
    state.samples_used += detail::hypergrad_cost(config.S1, Q) +
                          static_cast<std::int64_t>(config.S1);
  }

  detail::notify(options, k, state.x, state.y, &state.v, &state.u,
                 state.samples_used);
  if (options.sink) {
    TraceRow row = detail::make_row(k, state.samples_used, oracle, state.x, state.y);
    if (options.diagnostics) {
      detail::fill_diagnostics(row, oracle, state.x, state.y, &state.v, &state.u,
                               config.hypergrad.eta, Q);
    }
    options.sink(row);
  }

  Vector x_next = state.x;
  add_scaled(x_next, -config.alpha, state.v);
  detail::check_iterate(x_next, k, "x iterate");

  // Inner recursion. x is frozen at x_next throughout; only y moves.
  Vector xt_prev = state.x;
  Vector yt_prev = state.y;
  const Vector& xt = x_next;
  Vector yt = state.y;
  Vector v_cur = state.v;
  Vector u_cur = state.u;
  const std::int64_t t_end =
      config.inner_plus_one ? config.m_inner + 1 : config.m_inner;
  for (std::int64_t t = 0; t <= t_end; ++t) {
    RngStream tstream = kstream.child("t" + std::to_string(t));
    const HypergradSampleSet samples =
        draw_hypergrad_samples(tstream, oracle, hg_small);
    const Vector est_new =
        estimate_hypergrad_per_sample(oracle, xt, yt, hg_small, samples);
    const Vector est_old =
        estimate_hypergrad_per_sample(oracle, xt_prev, yt_prev, hg_small, samples);
    v_cur = sarah_combine(v_cur, est_new, est_old);

    const BatchIndices batch_y = chain_zeta_batch(samples, oracle.n_inner());
    const Vector gy_new = oracle.inner_grad_y(xt, yt, batch_y);
    const Vector gy_old = oracle.inner_grad_y(xt_prev, yt_prev, batch_y);
    u_cur = sarah_combine(u_cur, gy_new, gy_old);

    state.samples_used += 2 * detail::hypergrad_cost(config.S2, Q) +
                          2 * static_cast<std::int64_t>(config.S2);

    detail::notify(options, k, xt, yt, &v_cur, &u_cur, state.samples_used, t);
    if (config.trace_inner && options.sink) {
      options.sink(detail::make_row(k, state.samples_used, oracle, xt, yt));
    }

    xt_prev = xt;
    yt_prev = yt;
    add_scaled(yt, -config.beta, u_cur);
    detail::check_iterate(yt, k, "y iterate");
  }

  // Literal loop bound: the final recursion step only refreshes the carried
  // estimators at (x_{k+1}, y_{k+1}); its y update is discarded.
  state.y = config.inner_plus_one ? yt_prev : yt;
  state.x = x_next;
  state.v = v_cur;
  state.u = u_cur;
  state.k = k + 1;
  return state;
}

VrboState run_vrbo(const VrboConfig& config, const BilevelOracle& oracle,
                   const RunOptions& options) {
  validate(config, oracle);
  detail::RunTimer timer;
  const RunOptions opts = detail::with_wall_clock(options, timer);
  RngStream root(config.seed, "vrbo");

  VrboState state;
  state.x = config.x0;
  state.y = config.y0;
  for (std::int64_t k = 0; k < config.K; ++k) {
    if (opts.stop && opts.stop()) break;
    state = vrbo_outer_step(std::move(state), config, oracle, root, opts);
  }
  return state;
}

}  // namespace bilevel
