#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "bilevel/vec.hpp"

namespace bilevel {

// One logged optimization step. Optional fields stay absent when the oracle
// lacks the capability or diagnostics are off; they serialize as empty cells.
struct TraceRow {
  std::string run_id;
  std::string algo;
  std::uint64_t seed = 0;
  std::int64_t k = 0;
  std::int64_t samples_cum = 0;
  std::int64_t wall_ms = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> grad_norm_sq;   // |grad Phi(x_k)|^2
  std::optional<double> eps_bar_sq;     // |v_k - full-batch estimator|^2
  std::optional<double> delta_cap;      // eps_bar_sq + inner-gradient error
  std::optional<double> delta_small;    // |grad_y g(x_k, y_k)|^2
  std::optional<double> tracking_sq;    // |y_k - y*(x_k)|^2
};

using TraceSink = std::function<void(const TraceRow&)>;

// Observer hook exposing raw iterates and estimators; used by tests and the
// acceptance suite, never serialized.
struct StepInfo {
  std::int64_t k = 0;
  std::int64_t inner_t = -1;  // >= 0 on inner-loop steps of double-loop drivers
  const Vector* x = nullptr;
  const Vector* y = nullptr;
  const Vector* v = nullptr;  // hypergradient estimator, when the driver has one
  const Vector* u = nullptr;  // inner-gradient estimator, when the driver has one
  std::int64_t samples_cum = 0;
};

using StepObserver = std::function<void(const StepInfo&)>;

struct RunOptions {
  TraceSink sink;         // may be empty
  StepObserver observer;  // may be empty
  bool diagnostics = false;
  // Checked before each outer iteration; true stops the run early (used for
  // wall-clock budgets).
  std::function<bool()> stop;
};

}  // namespace bilevel
