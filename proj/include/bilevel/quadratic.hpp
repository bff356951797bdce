#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "bilevel/oracle.hpp"

namespace bilevel {

// Synthetic strongly-convex-quadratic instance with fully analytic ground
// truth. Inner objective per sample,
//   G(x, y; zeta_i) = 1/2 y'A y + y'(B x + c + noise_scale * eps_i),
// with A symmetric, eigenvalues in [mu, L_inner]. Outer objective per sample,
//   F(x, y; xi_j) = 1/2 |y - y_t|^2 + 1/2 c_x |x|^2
//                   + noise_scale * delta_j'(y - y_t).
// Noise vectors are paired antithetically so every population sum is exactly
// zero: the full-population problem is the noiseless one, bit for bit.
struct QuadraticSpec {
  std::size_t p = 1;  // outer dimension
  std::size_t q = 1;  // inner dimension
  double mu = 1.0;
  double L_inner = 1.0;
  double noise_scale = 0.0;
  std::size_t n_samples = 1;
  Vector y_target;  // dim q; empty means zero
  double c_x = 0.0;
  std::uint64_t seed = 0;

  // Spectral norm of the generated coupling matrix.
  double coupling_norm = 0.5;
  // Explicit overrides, used to pin closed-form test instances.
  std::optional<std::vector<double>> coupling;  // row-major q x p
  std::optional<Vector> offset;                 // inner affine term c
};

class QuadraticProblem : public BilevelOracle {
 public:
  explicit QuadraticProblem(const QuadraticSpec& spec);
  ~QuadraticProblem() override;

  std::size_t outer_dim() const override;
  std::size_t inner_dim() const override;
  std::size_t n_outer() const override;
  std::size_t n_inner() const override;
  bool has_exact_inner_solution() const override { return true; }
  bool has_analytic_hypergradient() const override { return true; }

  Vector inner_grad_y(const Vector& x, const Vector& y,
                      const BatchIndices& batch) const override;
  Vector inner_hvp_yy(const Vector& x, const Vector& y, const Vector& v,
                      const BatchIndices& batch) const override;
  Vector inner_jvp_xy(const Vector& x, const Vector& y, const Vector& v,
                      const BatchIndices& batch) const override;
  OuterGrads outer_grads(const Vector& x, const Vector& y,
                         const BatchIndices& batch) const override;
  double loss(const Vector& x, const Vector& y, Split split) const override;

  Vector solve_inner_exact(const Vector& x) const override;
  Vector analytic_hypergrad(const Vector& x) const override;
  Vector implicit_hypergrad(const Vector& x, const Vector& y) const override;

  // Minimizer of Phi (the outer objective is convex for this family).
  Vector argmin_phi() const;

  // Closed-form constants valid on the ball of radius `radius` around
  // (x_center, y_center). mu/L_inner are the exact extreme eigenvalues.
  SmoothnessConstants constants_on_ball(const Vector& x_center,
                                        const Vector& y_center,
                                        double radius) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<QuadraticProblem> make_quadratic_problem(const QuadraticSpec& spec);

}  // namespace bilevel
