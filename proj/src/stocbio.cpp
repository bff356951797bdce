#include "bilevel/stocbio.hpp"

#include <string>

#include "driver_common.hpp"

namespace bilevel {
namespace {

void validate(const StocbioConfig& config, const BilevelOracle& oracle) {
  if (!(config.alpha_out >= 0.0) || !(config.beta_in > 0.0)) {
    throw InvalidArgumentError("stocbio: bad step sizes");
  }
  if (config.T_inner < 1) {
    throw InvalidArgumentError("stocbio: T_inner must be >= 1");
  }
  if (config.S < 1 || config.K < 1) {
    throw InvalidArgumentError("stocbio: need S >= 1 and K >= 1");
  }
  if (config.hypergrad.mode != HypergradMode::kSharedBatch) {
    throw InvalidArgumentError("stocbio: hypergradient mode must be shared_batch");
  }
  if (config.x0.size() != oracle.outer_dim() ||
      config.y0.size() != oracle.inner_dim()) {
    throw InvalidArgumentError("stocbio: initial point has wrong dimension");
  }
}

}  // namespace

StocbioState run_stocbio(const StocbioConfig& config, const BilevelOracle& oracle,
                         const RunOptions& options) {
  validate(config, oracle);
  detail::RunTimer timer;
  const RunOptions opts = detail::with_wall_clock(options, timer);
  RngStream root(config.seed, "stocbio");

  HypergradConfig hg = config.hypergrad;
  hg.batch_size = config.S;

  StocbioState state;
  state.x = config.x0;
  state.y = config.y0;

  for (std::int64_t k = 0; k < config.K; ++k) {
    if (opts.stop && opts.stop()) break;
    RngStream kstream = root.child("k" + std::to_string(k));
    for (std::int64_t t = 0; t < config.T_inner; ++t) {
      RngStream ts = kstream.child("inner" + std::to_string(t));
      const BatchIndices batch = sample_batch(ts, oracle.n_inner(), config.S);
      state.u = oracle.inner_grad_y(state.x, state.y, batch);
      state.samples_used += static_cast<std::int64_t>(config.S);
      add_scaled(state.y, -config.beta_in, state.u);
      detail::check_iterate(state.y, k, "y iterate");
    }

    RngStream bx = kstream.child("Bx");
    const HypergradSampleSet samples = draw_hypergrad_samples(bx, oracle, hg);
    state.v = estimate_hypergrad_shared(oracle, state.x, state.y, hg, samples);
    state.samples_used += detail::hypergrad_cost(config.S, config.hypergrad.Q);

    detail::notify(opts, k, state.x, state.y, &state.v, &state.u,
                   state.samples_used);
    if (opts.sink) {
      TraceRow row =
          detail::make_row(k, state.samples_used, oracle, state.x, state.y);
      if (opts.diagnostics) {
        detail::fill_diagnostics(row, oracle, state.x, state.y, &state.v, &state.u,
                                 config.hypergrad.eta, config.hypergrad.Q);
      }
      opts.sink(row);
    }

    add_scaled(state.x, -config.alpha_out, state.v);
    detail::check_iterate(state.x, k, "x iterate");
    state.k = k + 1;
  }
  return state;
}

}  // namespace bilevel
