#pragma once

#include <cstdint>

#include "bilevel/hypergrad.hpp"
#include "bilevel/oracle.hpp"
#include "bilevel/trace.hpp"

namespace bilevel {

// Double-loop SGD baseline: per outer step, T_inner minibatch SGD steps on y
// followed by one shared-batch hypergradient step on x.
struct StocbioConfig {
  double alpha_out = 0.1;
  double beta_in = 0.1;
  std::int64_t T_inner = 10;
  std::size_t S = 32;
  std::int64_t K = 100;
  HypergradConfig hypergrad;  // mode must be shared_batch
  Vector x0;
  Vector y0;
  std::uint64_t seed = 0;
};

struct StocbioState {
  std::int64_t k = 0;
  Vector x;
  Vector y;
  Vector v;  // last hypergradient estimate
  Vector u;  // last inner minibatch gradient
  std::int64_t samples_used = 0;
};

StocbioState run_stocbio(const StocbioConfig& config, const BilevelOracle& oracle,
                         const RunOptions& options = {});

}  // namespace bilevel
