#pragma once

#include <chrono>

#include "bilevel/oracle.hpp"
#include "bilevel/theory.hpp"
#include "bilevel/trace.hpp"

namespace bilevel::detail {

inline constexpr double kDivergenceLimit = 1e12;

class RunTimer {
 public:
  RunTimer() : start_(std::chrono::steady_clock::now()) {}
  std::int64_t ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline void check_iterate(const Vector& v, std::int64_t k, const char* what) {
  for (double e : v) {
    if (!std::isfinite(e) || std::abs(e) > kDivergenceLimit) {
      throw DivergenceError(k, what);
    }
  }
}

// wall_ms is stamped by the run-level sink wrapper, not here.
inline TraceRow make_row(std::int64_t k, std::int64_t samples,
                         const BilevelOracle& oracle, const Vector& x,
                         const Vector& y) {
  TraceRow row;
  row.k = k;
  row.samples_cum = samples;
  row.train_loss = oracle.loss(x, y, Split::kTrain);
  row.val_loss = oracle.loss(x, y, Split::kValidation);
  return row;
}

inline RunOptions with_wall_clock(const RunOptions& options, const RunTimer& timer) {
  RunOptions wrapped = options;
  if (options.sink) {
    const TraceSink user_sink = options.sink;
    wrapped.sink = [user_sink, &timer](const TraceRow& row) {
      TraceRow stamped = row;
      stamped.wall_ms = timer.ms();
      user_sink(stamped);
    };
  }
  return wrapped;
}

inline void fill_diagnostics(TraceRow& row, const BilevelOracle& oracle,
                             const Vector& x, const Vector& y, const Vector* v,
                             const Vector* u, double eta, int Q) {
  const Diagnostics d = compute_diagnostics(oracle, x, y, v, u, eta, Q);
  row.eps_bar_sq = d.eps_bar_sq;
  row.delta_cap = d.delta_cap;
  row.delta_small = d.delta_small;
  row.tracking_sq = d.tracking_sq;
  row.grad_norm_sq = d.grad_norm_sq;
}

inline void notify(const RunOptions& options, std::int64_t k, const Vector& x,
                   const Vector& y, const Vector* v, const Vector* u,
                   std::int64_t samples, std::int64_t inner_t = -1) {
  if (options.observer) {
    StepInfo info;
    info.k = k;
    info.inner_t = inner_t;
    info.x = &x;
    info.y = &y;
    info.v = v;
    info.u = u;
    info.samples_cum = samples;
    options.observer(info);
  }
}

// Accounting rule: one shared-batch or per-sample hypergradient estimate
// costs batch * (Q + 3) single-sample oracle calls (outer gradients count
// twice, the JVP once, and Q HVPs once each).
inline std::int64_t hypergrad_cost(std::size_t batch, int Q) {
  return static_cast<std::int64_t>(batch) * (static_cast<std::int64_t>(Q) + 3);
}

}  // namespace bilevel::detail
