#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bilevel/vec.hpp"

namespace bilevel {

struct QuadraticProblemBlock {
  std::size_t p = 10;
  std::size_t q = 10;
  double mu = 0.5;
  double L_inner = 1.0;
  double noise_scale = 0.0;
  std::size_t n_samples = 512;
  double c_x = 0.0;
  double coupling_norm = 0.5;
  double target_norm = 1.0;  // |y_t|; direction drawn from the problem seed
  std::uint64_t seed = 0;
  double ball_radius = 10.0;  // ball for constants reporting
};

struct HypercleanProblemBlock {
  std::size_t n_train = 1000;
  std::size_t n_val = 200;
  std::size_t n_test = 200;
  std::size_t dim = 20;
  double corrupt_rate = 0.1;
  double ridge_c = 0.001;
  std::uint64_t seed = 0;
  double ball_radius = 10.0;
  std::string dataset_path;  // non-empty: load instead of generating
};

enum class AlgoKind { kMrbo, kVrbo, kStocbio };
enum class AlgoMode { kPractical, kTheorem };

// Initial point spec: absent = zeros, scalar = constant vector, list =
// explicit entries, argmin = minimizer of Phi (quadratic family only).
struct InitSpec {
  enum class Kind { kZeros, kScalar, kList, kArgmin } kind = Kind::kZeros;
  double scalar = 0.0;
  Vector list;
};

struct AlgoBlock {
  std::string name;  // section name; also the algorithm kind
  AlgoKind kind = AlgoKind::kMrbo;
  AlgoMode mode = AlgoMode::kPractical;
  std::int64_t K = 0;          // 0 = unset
  std::int64_t budget_ms = 0;  // 0 = none
  double eta = 0.5;
  int Q = 3;
  std::size_t S = 1000;
  std::size_t S1 = 1000;
  std::size_t S2 = 500;
  // mrbo, practical mode
  double gamma = 0.1;
  double lambda = 0.1;
  double c1 = 2.0;
  double c2 = 2.0;
  double m = 8.0;
  double d = 1.0;
  bool reuse_prev_batch = true;
  // vrbo
  double alpha = 0.1;
  double beta = 0.1;
  std::int64_t period_q = 3;
  std::int64_t m_inner = 20;
  bool inner_plus_one = true;
  // stocbio
  double alpha_out = 0.1;
  double beta_in = 0.1;
  std::int64_t T_inner = 200;
  // theorem mode
  std::optional<double> theorem_lambda;  // absent = largest keeping m = max(2, d^3)
  double theorem_d = 2.0;
  double gamma_hint = 1.0;
  bool warm_start = true;  // theorem mode: y0 = y*(x0) when solvable
  bool empirical_constants = false;
  InitSpec x0;
  InitSpec y0;
};

struct RunBlock {
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "results";
  bool diagnostics = true;
  bool trace_inner = false;
  int parallel = 1;
  std::int64_t flush_every = 64;
};

struct ExperimentConfig {
  std::variant<QuadraticProblemBlock, HypercleanProblemBlock> problem;
  std::vector<AlgoBlock> algos;
  RunBlock run;

  bool is_quadratic() const {
    return std::holds_alternative<QuadraticProblemBlock>(problem);
  }
};

// Sectioned key=value format with [problem], [algo.<name>], [run] headers and
// '#' comments. Unknown keys, malformed values, and invalid combinations are
// reported with the key path and line number.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

}  // namespace bilevel
