#include "bilevel/oracle.hpp"

namespace bilevel {

Vector BilevelOracle::solve_inner_exact(const Vector&) const {
  throw UnsupportedOperationError(
      "solve_inner_exact: oracle has no exact inner solution");
}

Vector BilevelOracle::analytic_hypergrad(const Vector&) const {
  throw UnsupportedOperationError(
      "analytic_hypergrad: oracle has no analytic hypergradient");
}

Vector BilevelOracle::implicit_hypergrad(const Vector&, const Vector&) const {
  throw UnsupportedOperationError(
      "implicit_hypergrad: oracle has no analytic hypergradient");
}

void BilevelOracle::check_inner_batch(const BatchIndices& batch) const {
  if (batch.source_size != n_inner()) {
    throw InvalidArgumentError("batch drawn against wrong inner population");
  }
  for (std::size_t i : batch.indices) {
    if (i >= n_inner()) {
      throw InvalidArgumentError("inner batch index out of range");
    }
  }
}

void BilevelOracle::check_outer_batch(const BatchIndices& batch) const {
  if (batch.source_size != n_outer()) {
    throw InvalidArgumentError("batch drawn against wrong outer population");
  }
  for (std::size_t i : batch.indices) {
    if (i >= n_outer()) {
      throw InvalidArgumentError("outer batch index out of range");
    }
  }
}

void BilevelOracle::check_point(const Vector& x, const Vector& y) const {
  if (x.size() != outer_dim() || y.size() != inner_dim()) {
    throw InvalidArgumentError("point dimension mismatch");
  }
}

}  // namespace bilevel
