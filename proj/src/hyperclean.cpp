#include "bilevel/hyperclean.hpp"

#include <cmath>

namespace bilevel {

double sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double binary_cross_entropy(double logit, int label) {
  // softplus(logit) - label * logit, evaluated without overflow.
  const double softplus = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
  return softplus - static_cast<double>(label) * logit;
}

struct HypercleanProblem::Impl {
  HypercleanSpec spec;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
  std::vector<std::size_t> test_rows;

  const Vector& feat(std::size_t row) const { return spec.dataset.features[row]; }
  int label(std::size_t row) const { return spec.dataset.labels[row]; }
};

HypercleanProblem::HypercleanProblem(HypercleanSpec spec)
    : impl_(std::make_unique<Impl>()) {
  if (!(spec.ridge_c > 0.0)) {
    throw InvalidArgumentError("hyperclean: ridge C must be positive");
  }
  if (spec.dataset.size() == 0) {
    throw InvalidArgumentError("hyperclean: empty dataset");
  }
  impl_->spec = std::move(spec);
  const Dataset& ds = impl_->spec.dataset;
  impl_->train_rows = ds.split_indices(Split::kTrain);
  impl_->val_rows = ds.split_indices(Split::kValidation);
  impl_->test_rows = ds.split_indices(Split::kTest);
  if (impl_->train_rows.empty() || impl_->val_rows.empty()) {
    throw InvalidArgumentError("hyperclean: need train and validation rows");
  }
}

HypercleanProblem::~HypercleanProblem() = default;

std::size_t HypercleanProblem::outer_dim() const { return impl_->train_rows.size(); }
std::size_t HypercleanProblem::inner_dim() const { return impl_->spec.dataset.dim(); }
std::size_t HypercleanProblem::n_outer() const { return impl_->val_rows.size(); }
std::size_t HypercleanProblem::n_inner() const { return impl_->train_rows.size(); }

double HypercleanProblem::mu() const { return 2.0 * impl_->spec.ridge_c; }

const Dataset& HypercleanProblem::dataset() const { return impl_->spec.dataset; }

Vector HypercleanProblem::inner_grad_y(const Vector& x, const Vector& y,
                                       const BatchIndices& batch) const {
  check_point(x, y);
  check_inner_batch(batch);
  const Impl& im = *impl_;
  const double inv = 1.0 / static_cast<double>(batch.size());
  Vector g = zeros(y.size());
  for (std::size_t i : batch.indices) {
    const std::size_t row = im.train_rows[i];
    const Vector& xi = im.feat(row);
    const double s = sigmoid(dot(y, xi));
    const double w = sigmoid(x[i]) * (s - static_cast<double>(im.label(row)));
    add_scaled(g, w, xi);
  }
  for (std::size_t j = 0; j < g.size(); ++j) {
    g[j] = inv * g[j] + 2.0 * im.spec.ridge_c * y[j];
  }
  ensure_finite(g, "inner_grad_y");
  return g;
}

Vector HypercleanProblem::inner_hvp_yy(const Vector& x, const Vector& y,
                                       const Vector& v,
                                       const BatchIndices& batch) const {
  check_point(x, y);
  check_inner_batch(batch);
  if (v.size() != inner_dim()) {
    throw InvalidArgumentError("inner_hvp_yy: v has wrong dimension");
  }
  const Impl& im = *impl_;
  const double inv = 1.0 / static_cast<double>(batch.size());
  Vector h = zeros(v.size());
  for (std::size_t i : batch.indices) {
    const std::size_t row = im.train_rows[i];
    const Vector& xi = im.feat(row);
    const double s = sigmoid(dot(y, xi));
    const double w = sigmoid(x[i]) * s * (1.0 - s) * dot(xi, v);
    add_scaled(h, w, xi);
  }
  for (std::size_t j = 0; j < h.size(); ++j) {
    h[j] = inv * h[j] + 2.0 * im.spec.ridge_c * v[j];
  }
  ensure_finite(h, "inner_hvp_yy");
  return h;
}

Vector HypercleanProblem::inner_jvp_xy(const Vector& x, const Vector& y,
                                       const Vector& v,
                                       const BatchIndices& batch) const {
  check_point(x, y);
  check_inner_batch(batch);
  if (v.size() != inner_dim()) {
    throw InvalidArgumentError("inner_jvp_xy: v has wrong dimension");
  }
  const Impl& im = *impl_;
  const double inv = 1.0 / static_cast<double>(batch.size());
  Vector out = zeros(outer_dim());
  for (std::size_t i : batch.indices) {
    const std::size_t row = im.train_rows[i];
    const Vector& xi = im.feat(row);
    const double s = sigmoid(dot(y, xi));
    const double sl = sigmoid(x[i]);
    // d sigmoid(lambda_i) / d lambda_i = sl (1 - sl)
    out[i] += inv * sl * (1.0 - sl) * (s - static_cast<double>(im.label(row))) *
              dot(xi, v);
  }
  ensure_finite(out, "inner_jvp_xy");
  return out;
}

OuterGrads HypercleanProblem::outer_grads(const Vector& x, const Vector& y,
                                          const BatchIndices& batch) const {
  check_point(x, y);
  check_outer_batch(batch);
  const Impl& im = *impl_;
  const double inv = 1.0 / static_cast<double>(batch.size());
  OuterGrads out;
  out.grad_x = zeros(outer_dim());  // F does not depend on lambda directly
  out.grad_y = zeros(inner_dim());
  for (std::size_t j : batch.indices) {
    const std::size_t row = im.val_rows[j];
    const Vector& xj = im.feat(row);
    const double s = sigmoid(dot(y, xj));
    add_scaled(out.grad_y, s - static_cast<double>(im.label(row)), xj);
  }
  for (double& g : out.grad_y) g *= inv;
  ensure_finite(out.grad_y, "outer_grads");
  return out;
}

double HypercleanProblem::loss(const Vector& x, const Vector& y,
                               Split split) const {
  check_point(x, y);
  const Impl& im = *impl_;
  if (split == Split::kTrain) {
    double acc = 0.0;
    for (std::size_t i = 0; i < im.train_rows.size(); ++i) {
      const std::size_t row = im.train_rows[i];
      acc += sigmoid(x[i]) * binary_cross_entropy(dot(y, im.feat(row)), im.label(row));
    }
    return acc / static_cast<double>(im.train_rows.size()) +
           im.spec.ridge_c * norm_sq(y);
  }
  const std::vector<std::size_t>& rows =
      split == Split::kValidation ? im.val_rows : im.test_rows;
  if (rows.empty()) {
    throw InvalidArgumentError("loss: requested split has no rows");
  }
  double acc = 0.0;
  for (std::size_t row : rows) {
    acc += binary_cross_entropy(dot(y, im.feat(row)), im.label(row));
  }
  return acc / static_cast<double>(rows.size());
}

std::unique_ptr<HypercleanProblem> make_hyperclean_problem(HypercleanSpec spec) {
  return std::make_unique<HypercleanProblem>(std::move(spec));
}

}  // namespace bilevel
