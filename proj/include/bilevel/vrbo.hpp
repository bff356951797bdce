#pragma once

#include <cstdint>

#include "bilevel/hypergrad.hpp"
#include "bilevel/oracle.hpp"
#include "bilevel/trace.hpp"

namespace bilevel {

// SARAH/SPIDER recursive combine: prev + new_est - old_est.
Vector sarah_combine(const Vector& prev, const Vector& new_est,
                     const Vector& old_est);

// Double-loop variance-reduced driver. Every `period_q` outer steps the
// estimators are recomputed from a large per-sample batch S1; in between they
// carry over from the previous inner loop. Each outer step updates x once and
// then runs the inner recursion on y with small per-sample batches S2.
struct VrboConfig {
  double alpha = 0.1;  // outer step
  double beta = 0.1;   // inner step
  std::size_t S1 = 64;
  std::size_t S2 = 8;
  std::int64_t period_q = 3;
  std::int64_t m_inner = 20;
  std::int64_t K = 100;
  HypergradConfig hypergrad;  // mode must be per_sample
  Vector x0;
  Vector y0;
  std::uint64_t seed = 0;
  // Literal inner loop bound t = 0..m+1 (m+2 recursion steps). Off selects
  // the (m+1)-step reading, for sensitivity checks.
  bool inner_plus_one = true;
  bool trace_inner = false;  // emit a row per inner step as well
};

struct VrboState {
  std::int64_t k = 0;
  Vector x;
  Vector y;
  Vector v;
  Vector u;
  std::int64_t samples_used = 0;
  std::int64_t epoch_phase = 0;  // k mod period_q at the last completed step
};

VrboState vrbo_outer_step(VrboState state, const VrboConfig& config,
                          const BilevelOracle& oracle, const RngStream& run_root,
                          const RunOptions& options = {});

VrboState run_vrbo(const VrboConfig& config, const BilevelOracle& oracle,
                   const RunOptions& options = {});

}  // namespace bilevel
