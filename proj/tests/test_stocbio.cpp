#include <doctest.h>

#include <cmath>

#include "bilevel/stocbio.hpp"
#include "test_util.hpp"

using namespace bilevel;
using namespace bilevel::testutil;

namespace {

StocbioConfig base_config(std::int64_t K = 10) {
  StocbioConfig config;
  config.alpha_out = 0.1;
  config.beta_in = 0.1;
  config.T_inner = 5;
  config.S = 4;
  config.K = K;
  config.hypergrad.eta = 0.5;
  config.hypergrad.Q = 3;
  config.hypergrad.mode = HypergradMode::kSharedBatch;
  config.x0 = {2.0};
  config.y0 = {0.0};
  config.seed = 1;
  return config;
}

}  // namespace

TEST_CASE("inner SGD contracts geometrically on the scalar instance") {
  auto sq1 = make_sq1();
  StocbioConfig config = base_config(1);
  config.alpha_out = 0.0;  // hold x at 2
  config.beta_in = 0.5;
  config.T_inner = 50;
  config.S = 1;
  config.hypergrad.Q = 60;
  config.hypergrad.eta = 0.5;

  const StocbioState state = run_stocbio(config, *sq1, {});
  // y_{t+1} = y_t - 0.5 (y_t - 2): y after 50 steps is 2 (1 - 0.5^50).
  const double expected_y = 2.0 * (1.0 - std::pow(0.5, 50));
  CHECK(state.y[0] == doctest::Approx(expected_y).epsilon(1e-14));
  CHECK(state.x[0] == 2.0);
  // Hypergradient at the near-converged inner point.
  CHECK(std::abs(state.v[0] - 2.0) < 1e-9);
}

TEST_CASE("T_inner = 0 is rejected") {
  auto sq1 = make_sq1();
  StocbioConfig config = base_config();
  config.T_inner = 0;
  CHECK_THROWS_AS(run_stocbio(config, *sq1, {}), InvalidArgumentError);
}

TEST_CASE("equal seeds give identical traces") {
  auto noisy = make_sq1(0.1, 64, 3);
  const StocbioConfig config = base_config(15);
  auto collect = [&]() {
    std::vector<TraceRow> rows;
    RunOptions options;
    options.sink = [&rows](const TraceRow& r) { rows.push_back(r); };
    run_stocbio(config, *noisy, options);
    return rows;
  };
  const auto a = collect();
  const auto b = collect();
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == 15);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].train_loss == b[i].train_loss);
    CHECK(a[i].val_loss == b[i].val_loss);
    CHECK(a[i].samples_cum == b[i].samples_cum);
  }
}

TEST_CASE("sample accounting matches an instrumented oracle") {
  auto noisy = make_sq1(0.1, 32, 5);
  CountingOracle counting(*noisy);
  const StocbioConfig config = base_config(100);
  const StocbioState state = run_stocbio(config, counting, {});
  CHECK(state.samples_used == counting.count());
  // Per outer step: T_inner inner batches plus one shared-batch estimate.
  const std::int64_t expected = 100 * (5 * 4 + 4 * (3 + 3));
  CHECK(state.samples_used == expected);
}

TEST_CASE("converges on the noisy scalar instance") {
  auto noisy = make_sq1(0.1, 128, 11);
  StocbioConfig config = base_config(60);
  config.T_inner = 20;
  config.S = 64;
  config.hypergrad.Q = 10;

  double min_grad = 1e300;
  RunOptions options;
  options.diagnostics = true;
  options.sink = [&](const TraceRow& r) {
    if (r.grad_norm_sq.has_value()) min_grad = std::min(min_grad, *r.grad_norm_sq);
  };
  run_stocbio(config, *noisy, options);
  CHECK(min_grad <= 1e-3);
}

TEST_CASE("divergence carries the outer step index") {
  auto sq1 = make_sq1();
  StocbioConfig config = base_config(100);
  config.beta_in = 1e9;
  try {
    run_stocbio(config, *sq1, {});
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == 0);
  }
}
