#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bilevel/errors.hpp"

namespace bilevel {

// Dense real vector. All reductions in the toolkit run left-to-right in index
// order so that identical inputs give bitwise-identical outputs.
using Vector = std::vector<double>;

inline void check_same_dim(const Vector& a, const Vector& b, const char* where) {
  if (a.size() != b.size()) {
    throw InvalidArgumentError(std::string(where) + ": dimension mismatch (" +
                               std::to_string(a.size()) + " vs " +
                               std::to_string(b.size()) + ")");
  }
}

inline void ensure_finite(const Vector& v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericDomainError(std::string(where) + ": non-finite entry");
    }
  }
}

inline Vector zeros(std::size_t dim) { return Vector(dim, 0.0); }

inline Vector add(const Vector& a, const Vector& b) {
  check_same_dim(a, b, "add");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline Vector sub(const Vector& a, const Vector& b) {
  check_same_dim(a, b, "sub");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline Vector scale(double s, const Vector& a) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

// y += s * x
inline void add_scaled(Vector& y, double s, const Vector& x) {
  check_same_dim(y, x, "add_scaled");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * x[i];
}

inline double dot(const Vector& a, const Vector& b) {
  check_same_dim(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm_sq(const Vector& a) { return dot(a, a); }

inline double norm(const Vector& a) { return std::sqrt(norm_sq(a)); }

inline double max_abs(const Vector& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

// Left-to-right sequential sum; the canonical reduction order everywhere.
// `dim` disambiguates the empty sum.
inline Vector reduce_sum(std::span<const Vector> vectors, std::size_t dim) {
  Vector acc = zeros(dim);
  for (const Vector& v : vectors) {
    if (v.size() != dim) {
      throw InvalidArgumentError("reduce_sum: dimension mismatch");
    }
    for (std::size_t i = 0; i < dim; ++i) acc[i] += v[i];
  }
  return acc;
}

inline Vector reduce_sum(const std::vector<Vector>& vectors, std::size_t dim) {
  return reduce_sum(std::span<const Vector>(vectors), dim);
}

}  // namespace bilevel
