#pragma once

#include <cstdint>
#include <memory>

#include "bilevel/rng.hpp"
#include "bilevel/vec.hpp"

namespace bilevel {

enum class Split { kTrain, kValidation, kTest };

struct OuterGrads {
  Vector grad_x;  // batch mean of d F / d x
  Vector grad_y;  // batch mean of d F / d y
};

// Base smoothness/variance constants of a problem instance, valid on the
// ball the reporting routine was asked about.
struct SmoothnessConstants {
  double mu = 0.0;     // strong convexity of G in y
  double L = 0.0;      // gradient Lipschitz constant of F and G
  double M = 0.0;      // bound on the gradient of F
  double tau = 0.0;    // Lipschitz constant of the mixed partial of G
  double rho = 0.0;    // Lipschitz constant of the y-Hessian of G
  double sigma = 0.0;  // per-sample inner-gradient standard deviation bound
};

// Stochastic bilevel problem. Outer objective is the expectation of
// F(x, y; xi) over n_outer samples, inner objective the expectation of
// G(x, y; zeta) over n_inner samples. Every evaluation is a batch mean in
// left-to-right reduction order and is deterministic given (x, y, batch).
// Implementations are immutable after construction and safe to evaluate
// concurrently.
class BilevelOracle {
 public:
  virtual ~BilevelOracle() = default;

  virtual std::size_t outer_dim() const = 0;  // p, dimension of x
  virtual std::size_t inner_dim() const = 0;  // q, dimension of y
  virtual std::size_t n_outer() const = 0;    // population size of xi
  virtual std::size_t n_inner() const = 0;    // population size of zeta

  virtual bool has_exact_inner_solution() const { return false; }
  virtual bool has_analytic_hypergradient() const { return false; }

  // Batch mean of the inner gradient d G / d y.
  virtual Vector inner_grad_y(const Vector& x, const Vector& y,
                              const BatchIndices& batch) const = 0;

  // Batch mean of the inner Hessian-vector product (d^2 G / d y^2) v.
  virtual Vector inner_hvp_yy(const Vector& x, const Vector& y, const Vector& v,
                              const BatchIndices& batch) const = 0;

  // Batch mean of the mixed-partial product (d^2 G / d x d y) v, in R^p.
  virtual Vector inner_jvp_xy(const Vector& x, const Vector& y, const Vector& v,
                              const BatchIndices& batch) const = 0;

  // Batch means of the outer gradients (d F / d x, d F / d y).
  virtual OuterGrads outer_grads(const Vector& x, const Vector& y,
                                 const BatchIndices& batch) const = 0;

  // Full-population objective on the named split: inner objective for train,
  // outer objective for validation/test.
  virtual double loss(const Vector& x, const Vector& y, Split split) const = 0;

  // y*(x) by direct solve. Requires has_exact_inner_solution().
  virtual Vector solve_inner_exact(const Vector& x) const;

  // Exact hypergradient of Phi(x) = f(x, y*(x)). Requires
  // has_analytic_hypergradient().
  virtual Vector analytic_hypergrad(const Vector& x) const;

  // Exact implicit-gradient quantity at an arbitrary point:
  // d_x f - (d_x d_y g) [d_y^2 g]^{-1} d_y f evaluated at (x, y).
  // Requires has_analytic_hypergradient().
  virtual Vector implicit_hypergrad(const Vector& x, const Vector& y) const;

  BatchIndices full_inner_batch() const { return full_batch(n_inner()); }
  BatchIndices full_outer_batch() const { return full_batch(n_outer()); }

 protected:
  void check_inner_batch(const BatchIndices& batch) const;
  void check_outer_batch(const BatchIndices& batch) const;
  void check_point(const Vector& x, const Vector& y) const;
};

// Forwarding wrapper that counts single-sample oracle evaluations under the
// accounting rule: a batch gradient, HVP, or JVP costs |batch| calls and an
// outer-gradients evaluation costs 2|batch| (both components counted).
class CountingOracle : public BilevelOracle {
 public:
  explicit CountingOracle(const BilevelOracle& inner) : inner_(inner) {}

  std::size_t outer_dim() const override { return inner_.outer_dim(); }
  std::size_t inner_dim() const override { return inner_.inner_dim(); }
  std::size_t n_outer() const override { return inner_.n_outer(); }
  std::size_t n_inner() const override { return inner_.n_inner(); }
  bool has_exact_inner_solution() const override {
    return inner_.has_exact_inner_solution();
  }
  bool has_analytic_hypergradient() const override {
    return inner_.has_analytic_hypergradient();
  }

  Vector inner_grad_y(const Vector& x, const Vector& y,
                      const BatchIndices& batch) const override {
    count_ += batch.size();
    return inner_.inner_grad_y(x, y, batch);
  }
  Vector inner_hvp_yy(const Vector& x, const Vector& y, const Vector& v,
                      const BatchIndices& batch) const override {
    count_ += batch.size();
    return inner_.inner_hvp_yy(x, y, v, batch);
  }
  Vector inner_jvp_xy(const Vector& x, const Vector& y, const Vector& v,
                      const BatchIndices& batch) const override {
    count_ += batch.size();
    return inner_.inner_jvp_xy(x, y, v, batch);
  }
  OuterGrads outer_grads(const Vector& x, const Vector& y,
                         const BatchIndices& batch) const override {
    count_ += 2 * batch.size();
    return inner_.outer_grads(x, y, batch);
  }
  double loss(const Vector& x, const Vector& y, Split split) const override {
    return inner_.loss(x, y, split);
  }
  Vector solve_inner_exact(const Vector& x) const override {
    return inner_.solve_inner_exact(x);
  }
  Vector analytic_hypergrad(const Vector& x) const override {
    return inner_.analytic_hypergrad(x);
  }
  Vector implicit_hypergrad(const Vector& x, const Vector& y) const override {
    return inner_.implicit_hypergrad(x, y);
  }

  std::int64_t count() const { return count_; }
  void reset() { count_ = 0; }

 private:
  const BilevelOracle& inner_;
  mutable std::int64_t count_ = 0;
};

}  // namespace bilevel
