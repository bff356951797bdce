#include "bilevel/quadratic.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>

namespace bilevel {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd to_eigen(const Vector& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vector from_eigen(const VectorXd& v) {
  return Vector(v.data(), v.data() + v.size());
}

MatrixXd gaussian_matrix(RngStream& rs, Eigen::Index rows, Eigen::Index cols) {
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rs.next_gaussian();
  }
  return m;
}

// Rayleigh-quotient estimate of the dominant eigenvalue of a symmetric
// positive operator.
double power_iteration(const std::function<VectorXd(const VectorXd&)>& op,
                       Eigen::Index dim, RngStream& rs, int iters) {
  VectorXd v = gaussian_matrix(rs, dim, 1);
  v.normalize();
  for (int i = 0; i < iters; ++i) {
    VectorXd w = op(v);
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
  }
  return v.dot(op(v));
}

}  // namespace

struct QuadraticProblem::Impl {
  QuadraticSpec spec;
  MatrixXd A;   // q x q, SPD
  MatrixXd B;   // q x p coupling
  VectorXd c;   // inner affine term
  VectorXd yt;  // outer target
  Eigen::LLT<MatrixXd> llt;
  std::vector<VectorXd> eps;    // inner per-sample noise, population sum zero
  std::vector<VectorXd> delta;  // outer per-sample noise, population sum zero
  double eig_min = 0.0;
  double eig_max = 0.0;
  double joint_hess_norm = 0.0;  // |[[0, B'], [B, A]]|
  double mean_eps_sq = 0.0;      // population mean of |eps_i|^2
  double max_delta_norm = 0.0;

  Eigen::Index p() const { return B.cols(); }
  Eigen::Index q() const { return A.rows(); }

  VectorXd batch_mean(const std::vector<VectorXd>& table,
                      const BatchIndices& batch) const {
    VectorXd acc = VectorXd::Zero(table.front().size());
    for (std::size_t i : batch.indices) acc += table[i];
    return acc / static_cast<double>(batch.size());
  }
};

QuadraticProblem::QuadraticProblem(const QuadraticSpec& spec)
    : impl_(std::make_unique<Impl>()) {
  if (spec.p < 1 || spec.q < 1) {
    throw InvalidArgumentError("quadratic: dimensions must be >= 1");
  }
  if (!(spec.mu > 0.0) || !(spec.mu <= spec.L_inner)) {
    throw InvalidArgumentError("quadratic: need 0 < mu <= L_inner");
  }
  if (spec.noise_scale < 0.0) {
    throw InvalidArgumentError("quadratic: noise_scale must be >= 0");
  }
  if (spec.n_samples < 1) {
    throw InvalidArgumentError("quadratic: n_samples must be >= 1");
  }
  Impl& im = *impl_;
  im.spec = spec;
  const auto p = static_cast<Eigen::Index>(spec.p);
  const auto q = static_cast<Eigen::Index>(spec.q);

  RngStream root(spec.seed, "quadratic");

  // A = R diag(mu..L_inner) R' with a random orthogonal R.
  VectorXd eigs(q);
  if (q == 1) {
    eigs(0) = spec.L_inner;
  } else {
    for (Eigen::Index i = 0; i < q; ++i) {
      eigs(i) = spec.mu + (spec.L_inner - spec.mu) * static_cast<double>(i) /
                              static_cast<double>(q - 1);
    }
  }
  RngStream rot_rs = root.child("rotation");
  const MatrixXd R =
      Eigen::HouseholderQR<MatrixXd>(gaussian_matrix(rot_rs, q, q)).householderQ();
  im.A = R * eigs.asDiagonal() * R.transpose();
  im.A = 0.5 * (im.A + im.A.transpose().eval());

  if (spec.coupling.has_value()) {
    if (spec.coupling->size() != spec.q * spec.p) {
      throw InvalidArgumentError("quadratic: coupling override has wrong size");
    }
    im.B = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                          Eigen::RowMajor>>(spec.coupling->data(),
                                                            q, p);
  } else {
    RngStream cpl_rs = root.child("coupling");
    im.B = gaussian_matrix(cpl_rs, q, p);
    const double sv = im.B.jacobiSvd().singularValues()(0);
    if (sv > 0.0) im.B *= spec.coupling_norm / sv;
  }

  if (spec.offset.has_value()) {
    if (spec.offset->size() != spec.q) {
      throw InvalidArgumentError("quadratic: offset override has wrong size");
    }
    im.c = to_eigen(*spec.offset);
  } else {
    im.c = VectorXd::Zero(q);
  }

  if (spec.y_target.empty()) {
    im.yt = VectorXd::Zero(q);
  } else if (spec.y_target.size() == spec.q) {
    im.yt = to_eigen(spec.y_target);
  } else {
    throw InvalidArgumentError("quadratic: y_target has wrong dimension");
  }

  im.llt.compute(im.A);
  if (im.llt.info() != Eigen::Success) {
    throw NumericDomainError("quadratic: generated Hessian is not SPD");
  }

  // Antithetic noise tables: pairs (g, -g) make every population sum exactly
  // zero, so the full batch reproduces the noiseless problem bit for bit.
  auto fill_antithetic = [&](std::vector<VectorXd>& table, const char* label) {
    RngStream rs = root.child(label);
    table.resize(spec.n_samples);
    for (std::size_t i = 0; i < spec.n_samples; i += 2) {
      VectorXd g = gaussian_matrix(rs, q, 1);
      if (i + 1 < spec.n_samples) {
        table[i] = g;
        table[i + 1] = -g;
      } else {
        table[i] = VectorXd::Zero(q);
      }
    }
  };
  fill_antithetic(im.eps, "noise-inner");
  fill_antithetic(im.delta, "noise-outer");
  for (const VectorXd& e : im.eps) {
    im.mean_eps_sq += e.squaredNorm();
  }
  im.mean_eps_sq /= static_cast<double>(spec.n_samples);
  for (const VectorXd& d : im.delta) {
    im.max_delta_norm = std::max(im.max_delta_norm, d.norm());
  }

  // Construction self-check: extreme eigenvalues of A by power iteration.
  RngStream pow_rs = root.child("powiter");
  auto apply_A = [&](const VectorXd& v) { return (im.A * v).eval(); };
  const double lam_max = power_iteration(apply_A, q, pow_rs, 300);
  const double shift = lam_max + 1.0;
  auto apply_shifted = [&](const VectorXd& v) {
    return (shift * v - im.A * v).eval();
  };
  const double lam_min = shift - power_iteration(apply_shifted, q, pow_rs, 300);
  if (lam_max > spec.L_inner + 1e-6 || lam_min < spec.mu - 1e-6) {
    throw NumericDomainError("quadratic: generated spectrum escaped [mu, L_inner]");
  }
  // The exact extremes are the eigenvalue grid endpoints; the power iteration
  // above only guards the construction.
  im.eig_min = q == 1 ? spec.L_inner : spec.mu;
  im.eig_max = spec.L_inner;

  // Gradient Lipschitz constant of G is the joint Hessian norm.
  MatrixXd joint = MatrixXd::Zero(p + q, p + q);
  joint.block(0, p, p, q) = im.B.transpose();
  joint.block(p, 0, q, p) = im.B;
  joint.block(p, p, q, q) = im.A;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(joint);
  im.joint_hess_norm = es.eigenvalues().cwiseAbs().maxCoeff();
}

QuadraticProblem::~QuadraticProblem() = default;

std::size_t QuadraticProblem::outer_dim() const { return impl_->spec.p; }
std::size_t QuadraticProblem::inner_dim() const { return impl_->spec.q; }
std::size_t QuadraticProblem::n_outer() const { return impl_->spec.n_samples; }
std::size_t QuadraticProblem::n_inner() const { return impl_->spec.n_samples; }

Vector QuadraticProblem::inner_grad_y(const Vector& x, const Vector& y,
                                      const BatchIndices& batch) const {
  check_point(x, y);
  check_inner_batch(batch);
  const Impl& im = *impl_;
  VectorXd g = im.A * to_eigen(y) + im.B * to_eigen(x) + im.c;
  if (im.spec.noise_scale > 0.0) {
    g += im.spec.noise_scale * im.batch_mean(im.eps, batch);
  }
  Vector out = from_eigen(g);
  ensure_finite(out, "inner_grad_y");
  return out;
}

Vector QuadraticProblem::inner_hvp_yy(const Vector& x, const Vector& y,
                                      const Vector& v,
                                      const BatchIndices& batch) const {
  check_point(x, y);
  check_inner_batch(batch);
  if (v.size() != impl_->spec.q) {
    throw InvalidArgumentError("inner_hvp_yy: v has wrong dimension");
  }
  Vector out = from_eigen((impl_->A * to_eigen(v)).eval());
  ensure_finite(out, "inner_hvp_yy");
  return out;
}

Vector QuadraticProblem::inner_jvp_xy(const Vector& x, const Vector& y,
                                      const Vector& v,
                                      const BatchIndices& batch) const {
  check_point(x, y);
  check_inner_batch(batch);
  if (v.size() != impl_->spec.q) {
    throw InvalidArgumentError("inner_jvp_xy: v has wrong dimension");
  }
  Vector out = from_eigen((impl_->B.transpose() * to_eigen(v)).eval());
  ensure_finite(out, "inner_jvp_xy");
  return out;
}

OuterGrads QuadraticProblem::outer_grads(const Vector& x, const Vector& y,
                                         const BatchIndices& batch) const {
  check_point(x, y);
  check_outer_batch(batch);
  const Impl& im = *impl_;
  VectorXd gy = to_eigen(y) - im.yt;
  if (im.spec.noise_scale > 0.0) {
    gy += im.spec.noise_scale * im.batch_mean(im.delta, batch);
  }
  OuterGrads out;
  out.grad_x = from_eigen((im.spec.c_x * to_eigen(x)).eval());
  out.grad_y = from_eigen(gy);
  ensure_finite(out.grad_x, "outer_grads");
  ensure_finite(out.grad_y, "outer_grads");
  return out;
}

double QuadraticProblem::loss(const Vector& x, const Vector& y,
                              Split split) const {
  check_point(x, y);
  const Impl& im = *impl_;
  const VectorXd xe = to_eigen(x);
  const VectorXd ye = to_eigen(y);
  double value = 0.0;
  if (split == Split::kTrain) {
    value = 0.5 * ye.dot(im.A * ye) + ye.dot(im.B * xe + im.c);
  } else {
    value = 0.5 * (ye - im.yt).squaredNorm() + 0.5 * im.spec.c_x * xe.squaredNorm();
  }
  if (!std::isfinite(value)) throw NumericDomainError("loss: non-finite value");
  return value;
}

Vector QuadraticProblem::solve_inner_exact(const Vector& x) const {
  const Impl& im = *impl_;
  if (x.size() != im.spec.p) {
    throw InvalidArgumentError("solve_inner_exact: x has wrong dimension");
  }
  return from_eigen(im.llt.solve((-(im.B * to_eigen(x) + im.c)).eval()));
}

Vector QuadraticProblem::implicit_hypergrad(const Vector& x,
                                            const Vector& y) const {
  check_point(x, y);
  const Impl& im = *impl_;
  const VectorXd grad_y_f = to_eigen(y) - im.yt;
  const VectorXd solved = im.llt.solve(grad_y_f);
  return from_eigen(
      (im.spec.c_x * to_eigen(x) - im.B.transpose() * solved).eval());
}

Vector QuadraticProblem::analytic_hypergrad(const Vector& x) const {
  return implicit_hypergrad(x, solve_inner_exact(x));
}

Vector QuadraticProblem::argmin_phi() const {
  const Impl& im = *impl_;
  // grad Phi(x) = (c_x I + B'A^{-2}B) x + B'A^{-2}c + B'A^{-1}y_t = 0.
  const MatrixXd C = im.llt.solve(im.B);  // A^{-1}B
  MatrixXd H = C.transpose() * C;
  H.diagonal().array() += im.spec.c_x;
  const VectorXd rhs =
      -(C.transpose() * im.llt.solve(im.c) + im.B.transpose() * im.llt.solve(im.yt));
  Eigen::LDLT<MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success) {
    throw UnsupportedOperationError("argmin_phi: outer Hessian is singular");
  }
  Vector out = from_eigen(ldlt.solve(rhs).eval());
  ensure_finite(out, "argmin_phi");
  return out;
}

SmoothnessConstants QuadraticProblem::constants_on_ball(const Vector& x_center,
                                                        const Vector& y_center,
                                                        double radius) const {
  const Impl& im = *impl_;
  if (x_center.size() != im.spec.p || y_center.size() != im.spec.q) {
    throw InvalidArgumentError("constants_on_ball: center has wrong dimension");
  }
  if (!(radius >= 0.0)) {
    throw InvalidArgumentError("constants_on_ball: radius must be >= 0");
  }
  SmoothnessConstants c;
  c.mu = im.eig_min;
  c.tau = 0.0;
  c.rho = 0.0;
  c.L = std::max(im.joint_hess_norm, std::max(im.spec.c_x, 1.0));
  const double x_reach = to_eigen(x_center).norm() + radius;
  const double y_reach = (to_eigen(y_center) - im.yt).norm() + radius +
                         im.spec.noise_scale * im.max_delta_norm;
  c.M = std::sqrt(im.spec.c_x * im.spec.c_x * x_reach * x_reach +
                  y_reach * y_reach);
  c.sigma = im.spec.noise_scale * std::sqrt(im.mean_eps_sq);
  return c;
}

std::unique_ptr<QuadraticProblem> make_quadratic_problem(const QuadraticSpec& spec) {
  return std::make_unique<QuadraticProblem>(spec);
}

}  // namespace bilevel
