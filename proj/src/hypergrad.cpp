#include "bilevel/hypergrad.hpp"

#include <cmath>
#include <string>

namespace bilevel {
namespace {

void check_config(const HypergradConfig& config) {
  if (!(config.eta > 0.0)) {
    throw InvalidArgumentError("hypergrad: eta must be positive");
  }
  if (config.Q < 0) throw InvalidArgumentError("hypergrad: Q must be >= 0");
  if (config.batch_size < 1) {
    throw InvalidArgumentError("hypergrad: batch_size must be >= 1");
  }
}

// One product chain on the given batches; shared mode and the per-sample
// chains differ only in the batches they evaluate.
Vector chain_estimate(const BilevelOracle& oracle, const Vector& x,
                      const Vector& y, double eta, int Q,
                      const BatchIndices& outer, const BatchIndices& jacobian,
                      std::span<const BatchIndices> hessian) {
  const OuterGrads grads = oracle.outer_grads(x, y, outer);
  const NeumannResult nm = neumann_vector(oracle, x, y, grads.grad_y, eta, Q, hessian);
  const Vector correction = oracle.inner_jvp_xy(x, y, nm.m_q, jacobian);
  return sub(grads.grad_x, correction);
}

}  // namespace

HypergradSampleSet draw_hypergrad_samples(RngStream& stream,
                                          const BilevelOracle& oracle,
                                          const HypergradConfig& config) {
  check_config(config);
  HypergradSampleSet out;
  const std::size_t S = config.batch_size;
  if (config.mode == HypergradMode::kSharedBatch) {
    SharedBatches sb;
    RngStream bf = stream.child("BF");
    sb.outer = sample_batch(bf, oracle.n_outer(), S);
    RngStream bg = stream.child("BG");
    sb.jacobian = sample_batch(bg, oracle.n_inner(), S);
    sb.hessian.reserve(static_cast<std::size_t>(config.Q));
    for (int j = 1; j <= config.Q; ++j) {
      RngStream bj = stream.child("B" + std::to_string(j));
      sb.hessian.push_back(sample_batch(bj, oracle.n_inner(), S));
    }
    out.shared = std::move(sb);
  } else {
    out.chains.reserve(S);
    for (std::size_t i = 0; i < S; ++i) {
      RngStream ci = stream.child("chain" + std::to_string(i));
      SampleChain chain;
      RngStream xi = ci.child("xi");
      chain.outer = sample_batch(xi, oracle.n_outer(), 1);
      RngStream zeta = ci.child("zeta");
      chain.jacobian = sample_batch(zeta, oracle.n_inner(), 1);
      chain.hessian.reserve(static_cast<std::size_t>(config.Q));
      for (int j = 1; j <= config.Q; ++j) {
        RngStream zj = ci.child("zeta" + std::to_string(j));
        chain.hessian.push_back(sample_batch(zj, oracle.n_inner(), 1));
      }
      out.chains.push_back(std::move(chain));
    }
  }
  return out;
}

NeumannResult neumann_vector(const BilevelOracle& oracle, const Vector& x,
                             const Vector& y, const Vector& r0, double eta,
                             int Q, std::span<const BatchIndices> hessian_batches) {
  if (!(eta > 0.0)) throw InvalidArgumentError("neumann_vector: eta must be > 0");
  if (Q < 0) throw InvalidArgumentError("neumann_vector: Q must be >= 0");
  if (hessian_batches.size() != static_cast<std::size_t>(Q)) {
    throw InvalidArgumentError("neumann_vector: need exactly Q Hessian batches");
  }
  if (r0.size() != oracle.inner_dim()) {
    throw InvalidArgumentError("neumann_vector: r0 has wrong dimension");
  }
  NeumannResult out;
  out.r_trace.reserve(static_cast<std::size_t>(Q) + 1);
  out.r_trace.push_back(r0);
  Vector r = r0;
  for (int j = 0; j < Q; ++j) {
    // Step j consumes batch B_{Q-j}: the last batch first.
    const BatchIndices& batch = hessian_batches[static_cast<std::size_t>(Q - 1 - j)];
    const Vector hv = oracle.inner_hvp_yy(x, y, r, batch);
    add_scaled(r, -eta, hv);
    ensure_finite(r, "neumann_vector");
    out.r_trace.push_back(r);
  }
  out.m_q = scale(eta, reduce_sum(out.r_trace, r0.size()));
  return out;
}

Vector estimate_hypergrad_shared(const BilevelOracle& oracle, const Vector& x,
                                 const Vector& y, const HypergradConfig& config,
                                 const HypergradSampleSet& samples) {
  check_config(config);
  if (config.mode != HypergradMode::kSharedBatch) {
    throw InvalidArgumentError("estimate_hypergrad_shared: config mode is not shared_batch");
  }
  if (!samples.shared.has_value()) {
    throw InvalidArgumentError("estimate_hypergrad_shared: no shared batches drawn");
  }
  const SharedBatches& sb = *samples.shared;
  if (sb.hessian.size() != static_cast<std::size_t>(config.Q)) {
    throw InvalidArgumentError("estimate_hypergrad_shared: sample set holds wrong Q");
  }
  return chain_estimate(oracle, x, y, config.eta, config.Q, sb.outer, sb.jacobian,
                        sb.hessian);
}

Vector estimate_hypergrad_per_sample(const BilevelOracle& oracle, const Vector& x,
                                     const Vector& y, const HypergradConfig& config,
                                     const HypergradSampleSet& samples) {
  check_config(config);
  if (config.mode != HypergradMode::kPerSample) {
    throw InvalidArgumentError("estimate_hypergrad_per_sample: config mode is not per_sample");
  }
  if (samples.chains.empty()) {
    throw InvalidArgumentError("estimate_hypergrad_per_sample: no chains drawn");
  }
  std::vector<Vector> per_chain;
  per_chain.reserve(samples.chains.size());
  for (const SampleChain& chain : samples.chains) {
    if (chain.hessian.size() != static_cast<std::size_t>(config.Q)) {
      throw InvalidArgumentError("estimate_hypergrad_per_sample: chain holds wrong Q");
    }
    per_chain.push_back(chain_estimate(oracle, x, y, config.eta, config.Q,
                                       chain.outer, chain.jacobian, chain.hessian));
  }
  Vector mean = reduce_sum(per_chain, oracle.outer_dim());
  return scale(1.0 / static_cast<double>(per_chain.size()), mean);
}

Vector estimate_hypergrad(const BilevelOracle& oracle, const Vector& x,
                          const Vector& y, const HypergradConfig& config,
                          const HypergradSampleSet& samples) {
  return config.mode == HypergradMode::kSharedBatch
             ? estimate_hypergrad_shared(oracle, x, y, config, samples)
             : estimate_hypergrad_per_sample(oracle, x, y, config, samples);
}

Vector estimate_hypergrad_full(const BilevelOracle& oracle, const Vector& x,
                               const Vector& y, double eta, int Q) {
  const BatchIndices outer = oracle.full_outer_batch();
  const BatchIndices inner = oracle.full_inner_batch();
  std::vector<BatchIndices> hessian(static_cast<std::size_t>(Q), inner);
  return chain_estimate(oracle, x, y, eta, Q, outer, inner, hessian);
}

double bias_bound_cq(double mu, double M, double L, double eta, int Q) {
  if (!(mu > 0.0) || !(eta > 0.0) || !(eta * mu < 1.0)) {
    throw InvalidArgumentError("bias_bound_cq: need 0 < eta * mu < 1");
  }
  if (Q < 0) throw InvalidArgumentError("bias_bound_cq: Q must be >= 0");
  return std::pow(1.0 - eta * mu, Q + 1) * M * L / mu;
}

}  // namespace bilevel
