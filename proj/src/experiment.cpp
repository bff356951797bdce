#include "bilevel/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "bilevel/dataset.hpp"
#include "bilevel/hyperclean.hpp"
#include "bilevel/mrbo.hpp"
#include "bilevel/quadratic.hpp"
#include "bilevel/stocbio.hpp"
#include "bilevel/theory.hpp"
#include "bilevel/vrbo.hpp"

namespace bilevel {
namespace {

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fmt_opt(const std::optional<double>& v) {
  return v.has_value() ? fmt(*v) : std::string();
}

}  // namespace

struct TraceWriter::Impl {
  std::ofstream out;
  std::int64_t flush_every = 64;
};

TraceWriter::TraceWriter(const std::string& path, std::int64_t flush_every)
    : impl_(std::make_unique<Impl>()) {
  impl_->out.open(path, std::ios::binary);
  if (!impl_->out) throw FormatError("cannot open trace file: " + path);
  impl_->flush_every = std::max<std::int64_t>(1, flush_every);
  impl_->out << header() << '\n';
}

TraceWriter::~TraceWriter() = default;

std::string TraceWriter::header() {
  return "run_id,algo,seed,k,samples_cum,wall_ms,train_loss,val_loss,"
         "grad_norm_sq,eps_bar_sq,delta_cap,delta_small,tracking_sq";
}

std::string TraceWriter::format_row(const TraceRow& row) {
  std::string line;
  line.reserve(160);
  line += row.run_id;
  line += ',';
  line += row.algo;
  line += ',';
  line += std::to_string(row.seed);
  line += ',';
  line += std::to_string(row.k);
  line += ',';
  line += std::to_string(row.samples_cum);
  line += ',';
  line += std::to_string(row.wall_ms);
  line += ',';
  line += fmt(row.train_loss);
  line += ',';
  line += fmt(row.val_loss);
  line += ',';
  line += fmt_opt(row.grad_norm_sq);
  line += ',';
  line += fmt_opt(row.eps_bar_sq);
  line += ',';
  line += fmt_opt(row.delta_cap);
  line += ',';
  line += fmt_opt(row.delta_small);
  line += ',';
  line += fmt_opt(row.tracking_sq);
  return line;
}

void TraceWriter::write(const TraceRow& row) {
  impl_->out << format_row(row) << '\n';
  ++rows_;
  if (rows_ % impl_->flush_every == 0) impl_->out.flush();
  if (!impl_->out) throw FormatError("trace write failed");
}

std::unique_ptr<BilevelOracle> build_oracle(const ExperimentConfig& config) {
  if (config.is_quadratic()) {
    const auto& b = std::get<QuadraticProblemBlock>(config.problem);
    QuadraticSpec spec;
    spec.p = b.p;
    spec.q = b.q;
    spec.mu = b.mu;
    spec.L_inner = b.L_inner;
    spec.noise_scale = b.noise_scale;
    spec.n_samples = b.n_samples;
    spec.c_x = b.c_x;
    spec.coupling_norm = b.coupling_norm;
    spec.seed = b.seed;
    if (b.target_norm != 0.0) {
      RngStream rs(b.seed, "quadratic-target");
      Vector t(b.q);
      for (double& e : t) e = rs.next_gaussian();
      const double n = norm(t);
      spec.y_target = n > 0.0 ? scale(b.target_norm / n, t) : zeros(b.q);
    }
    return make_quadratic_problem(spec);
  }
  const auto& b = std::get<HypercleanProblemBlock>(config.problem);
  HypercleanSpec spec;
  spec.ridge_c = b.ridge_c;
  spec.dataset = b.dataset_path.empty()
                     ? generate_hyperclean_dataset(b.n_train, b.n_val, b.n_test,
                                                   b.dim, b.corrupt_rate, b.seed)
                     : load_dataset_csv(b.dataset_path);
  return make_hyperclean_problem(std::move(spec));
}

namespace {

Vector resolve_init(const InitSpec& spec, std::size_t dim,
                    const BilevelOracle& oracle, const char* which) {
  switch (spec.kind) {
    case InitSpec::Kind::kZeros:
      return zeros(dim);
    case InitSpec::Kind::kScalar:
      return Vector(dim, spec.scalar);
    case InitSpec::Kind::kList:
      if (spec.list.size() != dim) {
        throw InvalidArgumentError(std::string(which) +
                                   " list has wrong dimension");
      }
      return spec.list;
    case InitSpec::Kind::kArgmin: {
      const auto* quad = dynamic_cast<const QuadraticProblem*>(&oracle);
      if (quad == nullptr) {
        throw InvalidArgumentError("argmin init needs the quadratic family");
      }
      return quad->argmin_phi();
    }
  }
  throw InvalidArgumentError("bad init spec");
}

SmoothnessConstants constants_for(const ExperimentConfig& config,
                                  const BilevelOracle& oracle, const Vector& x0,
                                  const Vector& y0) {
  if (config.is_quadratic()) {
    const auto& b = std::get<QuadraticProblemBlock>(config.problem);
    const auto& quad = dynamic_cast<const QuadraticProblem&>(oracle);
    return quad.constants_on_ball(x0, y0, b.ball_radius);
  }
  const auto& b = std::get<HypercleanProblemBlock>(config.problem);
  RngStream rs(b.seed, "empirical-constants");
  return estimate_constants_empirical(oracle, x0, y0, b.ball_radius, 1000, rs);
}

struct ResolvedCell {
  AlgoKind kind;
  MrboConfig mrbo;
  VrboConfig vrbo;
  StocbioConfig stocbio;
};

ResolvedCell resolve_cell(const ExperimentConfig& config, const AlgoBlock& a,
                          const BilevelOracle& oracle, std::uint64_t seed) {
  ResolvedCell cell;
  cell.kind = a.kind;
  Vector x0 = resolve_init(a.x0, oracle.outer_dim(), oracle, "x0");
  Vector y0 = resolve_init(a.y0, oracle.inner_dim(), oracle, "y0");
  const std::int64_t K = a.K > 0 ? a.K : std::numeric_limits<std::int64_t>::max() / 2;

  if (a.mode == AlgoMode::kTheorem && a.warm_start &&
      oracle.has_exact_inner_solution()) {
    y0 = oracle.solve_inner_exact(x0);
  }

  switch (a.kind) {
    case AlgoKind::kMrbo: {
      if (a.mode == AlgoMode::kTheorem) {
        const SmoothnessConstants c = constants_for(config, oracle, x0, y0);
        const double lambda =
            a.theorem_lambda.has_value()
                ? *a.theorem_lambda
                : schedule_active_lambda(c, a.theorem_d, a.eta, a.Q);
        cell.mrbo = derive_mrbo_hyperparams(c, a.theorem_d, lambda, a.gamma_hint,
                                            a.eta, a.Q, a.S, K);
      } else {
        cell.mrbo.gamma = a.gamma;
        cell.mrbo.lambda = a.lambda;
        cell.mrbo.c1 = a.c1;
        cell.mrbo.c2 = a.c2;
        cell.mrbo.m = a.m;
        cell.mrbo.d = a.d;
        cell.mrbo.S = a.S;
        cell.mrbo.K = K;
        cell.mrbo.hypergrad.eta = a.eta;
        cell.mrbo.hypergrad.Q = a.Q;
        cell.mrbo.hypergrad.mode = HypergradMode::kSharedBatch;
        cell.mrbo.hypergrad.batch_size = a.S;
      }
      cell.mrbo.reuse_prev_batch = a.reuse_prev_batch;
      cell.mrbo.x0 = std::move(x0);
      cell.mrbo.y0 = std::move(y0);
      cell.mrbo.seed = seed;
      break;
    }
    case AlgoKind::kVrbo: {
      cell.vrbo.S1 = a.S1;
      cell.vrbo.S2 = a.S2;
      cell.vrbo.K = K;
      cell.vrbo.hypergrad.eta = a.eta;
      cell.vrbo.hypergrad.Q = a.Q;
      cell.vrbo.hypergrad.mode = HypergradMode::kPerSample;
      if (a.mode == AlgoMode::kTheorem) {
        const SmoothnessConstants c = constants_for(config, oracle, x0, y0);
        const VrboTheoremParams p = derive_vrbo_hyperparams(c, a.eta, a.Q, a.S2);
        cell.vrbo.alpha = p.alpha;
        cell.vrbo.beta = p.beta;
        cell.vrbo.m_inner = p.m_inner;
        cell.vrbo.period_q = p.period_q;
      } else {
        cell.vrbo.alpha = a.alpha;
        cell.vrbo.beta = a.beta;
        cell.vrbo.m_inner = a.m_inner;
        cell.vrbo.period_q = a.period_q;
      }
      cell.vrbo.inner_plus_one = a.inner_plus_one;
      cell.vrbo.trace_inner = config.run.trace_inner;
      cell.vrbo.x0 = std::move(x0);
      cell.vrbo.y0 = std::move(y0);
      cell.vrbo.seed = seed;
      break;
    }
    case AlgoKind::kStocbio: {
      cell.stocbio.alpha_out = a.alpha_out;
      cell.stocbio.beta_in = a.beta_in;
      cell.stocbio.T_inner = a.T_inner;
      cell.stocbio.S = a.S;
      cell.stocbio.K = K;
      cell.stocbio.hypergrad.eta = a.eta;
      cell.stocbio.hypergrad.Q = a.Q;
      cell.stocbio.hypergrad.mode = HypergradMode::kSharedBatch;
      cell.stocbio.hypergrad.batch_size = a.S;
      cell.stocbio.x0 = std::move(x0);
      cell.stocbio.y0 = std::move(y0);
      cell.stocbio.seed = seed;
      break;
    }
  }
  return cell;
}

CellResult run_cell(const ExperimentConfig& config, const AlgoBlock& a,
                    const BilevelOracle& oracle, std::uint64_t seed) {
  CellResult result;
  result.algo = a.name;
  result.seed = seed;
  result.run_id = a.name + "_s" + std::to_string(seed);

  const std::filesystem::path trace_path =
      std::filesystem::path(config.run.out_dir) / (result.run_id + ".csv");

  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&start]() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
  };

  try {
    TraceWriter writer(trace_path.string(), config.run.flush_every);
    RunOptions options;
    options.diagnostics = config.run.diagnostics;
    options.sink = [&](const TraceRow& row) {
      TraceRow stamped = row;
      stamped.run_id = result.run_id;
      stamped.algo = a.name;
      stamped.seed = seed;
      writer.write(stamped);
      result.k_final = stamped.k;
      result.samples_total = stamped.samples_cum;
      result.final_train_loss = stamped.train_loss;
      result.final_val_loss = stamped.val_loss;
      if (stamped.grad_norm_sq.has_value()) {
        if (!result.min_grad_norm_sq.has_value() ||
            *stamped.grad_norm_sq < *result.min_grad_norm_sq) {
          result.min_grad_norm_sq = stamped.grad_norm_sq;
        }
      }
    };
    if (a.budget_ms > 0) {
      const std::int64_t budget = a.budget_ms;
      options.stop = [budget, elapsed_ms]() { return elapsed_ms() >= budget; };
    }

    const ResolvedCell cell = resolve_cell(config, a, oracle, seed);
    switch (cell.kind) {
      case AlgoKind::kMrbo:
        run_mrbo(cell.mrbo, oracle, options);
        break;
      case AlgoKind::kVrbo:
        run_vrbo(cell.vrbo, oracle, options);
        break;
      case AlgoKind::kStocbio:
        run_stocbio(cell.stocbio, oracle, options);
        break;
    }
    result.ok = true;
  } catch (const DivergenceError& e) {
    result.diverged = true;
    result.error = e.what();
  } catch (const std::exception& e) {
    result.error = e.what();
  }
  result.wall_ms_total = elapsed_ms();
  return result;
}

}  // namespace

bool ExperimentSummary::all_ok() const {
  for (const CellResult& c : cells) {
    if (!c.ok) return false;
  }
  return true;
}

int ExperimentSummary::exit_code() const { return all_ok() ? 0 : 3; }

ExperimentSummary run_experiment(const ExperimentConfig& config) {
  std::filesystem::create_directories(config.run.out_dir);
  const std::unique_ptr<BilevelOracle> oracle = build_oracle(config);

  struct Cell {
    const AlgoBlock* algo;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const AlgoBlock& a : config.algos) {
    for (std::uint64_t seed : config.run.seeds) cells.push_back({&a, seed});
  }

  ExperimentSummary summary;
  summary.out_dir = config.run.out_dir;
  std::mutex mu;
  std::size_t next = 0;

  auto worker = [&]() {
    for (;;) {
      std::size_t idx;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= cells.size()) return;
        idx = next++;
      }
      CellResult r = run_cell(config, *cells[idx].algo, *oracle, cells[idx].seed);
      {
        std::lock_guard<std::mutex> lock(mu);
        summary.cells.push_back(std::move(r));  // completion order
      }
    }
  };

  const int n_workers =
      std::max(1, std::min<int>(config.run.parallel,
                                static_cast<int>(cells.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  const std::filesystem::path summary_path =
      std::filesystem::path(config.run.out_dir) / "summary.csv";
  std::ofstream out(summary_path, std::ios::binary);
  if (!out) throw FormatError("cannot open summary file: " + summary_path.string());
  out << "run_id,algo,seed,status,error,k_final,samples_total,wall_ms_total,"
         "final_train_loss,final_val_loss,min_grad_norm_sq\n";
  for (const CellResult& c : summary.cells) {
    std::string error = c.error;
    for (char& ch : error) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    out << c.run_id << ',' << c.algo << ',' << c.seed << ','
        << (c.ok ? "ok" : c.diverged ? "diverged" : "failed") << ','
        << error << ',' << c.k_final << ',' << c.samples_total << ','
        << c.wall_ms_total << ',' << fmt(c.final_train_loss) << ','
        << fmt(c.final_val_loss) << ',' << fmt_opt(c.min_grad_norm_sq) << '\n';
  }
  return summary;
}

}  // namespace bilevel
