#pragma once

#include <memory>
#include <string>
#include <vector>

#include "bilevel/config.hpp"
#include "bilevel/oracle.hpp"
#include "bilevel/trace.hpp"

namespace bilevel {

// Append-only CSV trace file. The header is written on construction; rows
// are flushed every `flush_every` writes. Reals serialize as shortest
// round-trip decimals, absent optional fields as empty cells.
class TraceWriter {
 public:
  TraceWriter(const std::string& path, std::int64_t flush_every = 64);
  ~TraceWriter();
  TraceWriter(const TraceWriter&) = delete;
  TraceWriter& operator=(const TraceWriter&) = delete;

  void write(const TraceRow& row);
  std::int64_t rows_written() const { return rows_; }

  static std::string header();
  static std::string format_row(const TraceRow& row);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::int64_t rows_ = 0;
};

struct CellResult {
  std::string run_id;
  std::string algo;
  std::uint64_t seed = 0;
  bool ok = false;
  bool diverged = false;
  std::string error;
  std::int64_t k_final = 0;
  std::int64_t samples_total = 0;
  std::int64_t wall_ms_total = 0;
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  std::optional<double> min_grad_norm_sq;
};

struct ExperimentSummary {
  std::vector<CellResult> cells;  // completion order
  std::string out_dir;

  bool all_ok() const;
  int exit_code() const;  // 0 all cells succeeded, 3 otherwise
};

// Builds the problem instance described by the config.
std::unique_ptr<BilevelOracle> build_oracle(const ExperimentConfig& config);

// Runs every (algorithm, seed) cell, one trace file per cell plus
// summary.csv in run.out_dir. Cell failures are recorded and do not stop
// the remaining cells.
ExperimentSummary run_experiment(const ExperimentConfig& config);

}  // namespace bilevel
