#pragma once

#include <memory>

#include "bilevel/dataset.hpp"
#include "bilevel/oracle.hpp"

namespace bilevel {

// Data hyper-cleaning on binary weighted logistic regression. The outer
// variable is the per-training-sample weight vector lambda (one entry per
// training row); the inner variable is the classifier w. Inner objective per
// training sample i,
//   G(lambda, w; i) = sigmoid(lambda_i) * ce(w'x_i, y_i) + C |w|^2,
// outer objective per validation sample j,
//   F(lambda, w; j) = ce(w'x_j, y_j).
struct HypercleanSpec {
  Dataset dataset;
  double ridge_c = 0.001;
};

class HypercleanProblem : public BilevelOracle {
 public:
  explicit HypercleanProblem(HypercleanSpec spec);
  ~HypercleanProblem() override;

  std::size_t outer_dim() const override;  // number of training rows
  std::size_t inner_dim() const override;  // feature dimension
  std::size_t n_outer() const override;    // number of validation rows
  std::size_t n_inner() const override;    // number of training rows

  Vector inner_grad_y(const Vector& x, const Vector& y,
                      const BatchIndices& batch) const override;
  Vector inner_hvp_yy(const Vector& x, const Vector& y, const Vector& v,
                      const BatchIndices& batch) const override;
  Vector inner_jvp_xy(const Vector& x, const Vector& y, const Vector& v,
                      const BatchIndices& batch) const override;
  OuterGrads outer_grads(const Vector& x, const Vector& y,
                         const BatchIndices& batch) const override;
  double loss(const Vector& x, const Vector& y, Split split) const override;

  // Inner strong convexity constant, 2C.
  double mu() const;

  const Dataset& dataset() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<HypercleanProblem> make_hyperclean_problem(HypercleanSpec spec);

// Numerically stable sigmoid and binary cross-entropy on the logit scale.
double sigmoid(double t);
double binary_cross_entropy(double logit, int label);

}  // namespace bilevel
