#include "reinforce/quadrature.hpp"

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "reinforce/error.hpp"

namespace reinforce {

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& opts) {
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, opts.max_depth, opts.rel_tol, &error);
  if (!std::isfinite(value)) throw NumericalError("quadrature produced a non-finite value");
  return {value, error};
}

QuadratureResult integrate_2d(const std::function<double(double, double)>& f, double ax, double bx,
                              double ay, double by, const QuadratureOptions& opts) {
  double inner_error = 0.0;
  const auto outer = integrate(
      [&](double x) {
        const auto inner = integrate([&](double y) { return f(x, y); }, ay, by, opts);
        inner_error = std::max(inner_error, inner.error);
        return inner.value;
      },
      ax, bx, opts);
  return {outer.value, outer.error + inner_error * std::abs(bx - ax)};
}

}  // namespace reinforce
