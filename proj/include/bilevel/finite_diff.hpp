#pragma once

#include <functional>

#include "bilevel/vec.hpp"

namespace bilevel {

inline constexpr double kDefaultFdStep = 1e-5;

// Central-difference gradient, (f(x + h e_i) - f(x - h e_i)) / (2h) per
// coordinate. O(h^2) error; the independent oracle for gradient checks.
Vector finite_difference_grad(const std::function<double(const Vector&)>& f,
                              const Vector& x, double h = kDefaultFdStep);

// Central-difference directional derivative of a vector-valued map,
// (g(x + h v) - g(x - h v)) / (2h). Used to cross-check HVPs and JVPs.
Vector finite_difference_jvp(const std::function<Vector(const Vector&)>& g,
                             const Vector& x, const Vector& v,
                             double h = kDefaultFdStep);

}  // namespace bilevel
