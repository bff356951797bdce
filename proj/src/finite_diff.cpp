#include "bilevel/finite_diff.hpp"

#include <cmath>

namespace bilevel {

Vector finite_difference_grad(const std::function<double(const Vector&)>& f,
                              const Vector& x, double h) {
  if (!(h > 0.0)) {
    throw InvalidArgumentError("finite_difference_grad: h must be positive");
  }
  Vector grad(x.size());
  Vector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericDomainError("finite_difference_grad: non-finite evaluation");
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

Vector finite_difference_jvp(const std::function<Vector(const Vector&)>& g,
                             const Vector& x, const Vector& v, double h) {
  if (!(h > 0.0)) {
    throw InvalidArgumentError("finite_difference_jvp: h must be positive");
  }
  check_same_dim(x, v, "finite_difference_jvp");
  Vector xp = x;
  Vector xm = x;
  add_scaled(xp, h, v);
  add_scaled(xm, -h, v);
  const Vector gp = g(xp);
  const Vector gm = g(xm);
  ensure_finite(gp, "finite_difference_jvp");
  ensure_finite(gm, "finite_difference_jvp");
  Vector out = sub(gp, gm);
  return scale(1.0 / (2.0 * h), out);
}

}  // namespace bilevel
