#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bilevel/oracle.hpp"
#include "bilevel/rng.hpp"

namespace bilevel {

enum class HypergradMode { kSharedBatch, kPerSample };

// Truncated-Neumann hypergradient estimator settings. The series
//   eta * sum_{j=0..Q} (I - eta H)^j
// approximates H^{-1}; eta * L_inner < 1 keeps the iteration contractive.
struct HypergradConfig {
  double eta = 0.5;
  int Q = 3;  // number of Hessian-vector terms; Q = 0 keeps only eta * r0
  HypergradMode mode = HypergradMode::kSharedBatch;
  std::size_t batch_size = 1;  // S per component (shared) or S1 chains
};

// Shared-batch sample set: one batch per estimator component.
struct SharedBatches {
  BatchIndices outer;                   // B_F, outer gradients
  BatchIndices jacobian;                // B_G, mixed-partial product
  std::vector<BatchIndices> hessian;    // B_1..B_Q, one per Neumann term
};

// One per-sample chain: singleton batches for every component.
struct SampleChain {
  BatchIndices outer;                   // xi_i
  BatchIndices jacobian;                // zeta_i
  std::vector<BatchIndices> hessian;    // zeta_i^1..zeta_i^Q
};

struct HypergradSampleSet {
  std::optional<SharedBatches> shared;
  std::vector<SampleChain> chains;
};

// Draws the sample set for `config` from independent labeled child streams.
HypergradSampleSet draw_hypergrad_samples(RngStream& stream,
                                          const BilevelOracle& oracle,
                                          const HypergradConfig& config);

struct NeumannResult {
  Vector m_q;                   // eta * sum_{j=0..Q} r_j
  std::vector<Vector> r_trace;  // r_0..r_Q, for diagnostics
};

// Neumann recursion r_{j+1} = r_j - eta * HVP(x, y, r_j; batch_{Q-j}).
// Batches are consumed in reversed index order: step j uses
// hessian_batches[Q-1-j], i.e. B_Q first and B_1 last.
NeumannResult neumann_vector(const BilevelOracle& oracle, const Vector& x,
                             const Vector& y, const Vector& r0, double eta,
                             int Q, std::span<const BatchIndices> hessian_batches);

// Shared-batch estimator:
//   grad_x F(B_F) - JVP(x, y, M_Q; B_G),  M_Q from r0 = grad_y F(B_F).
Vector estimate_hypergrad_shared(const BilevelOracle& oracle, const Vector& x,
                                 const Vector& y, const HypergradConfig& config,
                                 const HypergradSampleSet& samples);

// Per-sample estimator: one full single-sample product chain per i, averaged
// in chain order.
Vector estimate_hypergrad_per_sample(const BilevelOracle& oracle, const Vector& x,
                                     const Vector& y, const HypergradConfig& config,
                                     const HypergradSampleSet& samples);

// Mode dispatch.
Vector estimate_hypergrad(const BilevelOracle& oracle, const Vector& x,
                          const Vector& y, const HypergradConfig& config,
                          const HypergradSampleSet& samples);

// Deterministic full-population value of the truncated-Neumann hypergradient
// at (x, y): the quantity the stochastic estimators are unbiased for.
Vector estimate_hypergrad_full(const BilevelOracle& oracle, const Vector& x,
                               const Vector& y, double eta, int Q);

// Hessian-inverse truncation bias bound (1 - eta mu)^{Q+1} M L / mu.
double bias_bound_cq(double mu, double M, double L, double eta, int Q);

}  // namespace bilevel
