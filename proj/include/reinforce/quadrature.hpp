#pragma once

#include <functional>

namespace reinforce {

struct QuadratureResult {
  double value;
  double error;  // estimated absolute error
};

struct QuadratureOptions {
  double rel_tol = 1e-10;
  unsigned max_depth = 15;
};

// Adaptive Gauss-Kronrod (31 points) on [a, b]; either end may be infinite.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& opts = {});

// Iterated 1-d scheme on the rectangle [ax, bx] x [ay, by].
QuadratureResult integrate_2d(const std::function<double(double, double)>& f, double ax, double bx,
                              double ay, double by, const QuadratureOptions& opts = {});

}  // namespace reinforce
