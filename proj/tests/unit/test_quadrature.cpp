#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/beta.hpp>

#include "doctest.h"
#include "reinforce/quadrature.hpp"

using namespace reinforce;

TEST_CASE("gaussian integral on the whole line") {
  const auto r = integrate([](double x) { return std::exp(-x * x); }, -std::numeric_limits<double>::infinity(),
                           std::numeric_limits<double>::infinity());
  CHECK(std::abs(r.value - std::sqrt(std::numbers::pi)) < 1e-12);
}

TEST_CASE("powers of sech against the beta function") {
  for (double p : {0.5, 1.0, 1.5, 3.0, 10.0}) {
    const auto r = integrate([p](double t) { return std::pow(1.0 / std::cosh(t), p); }, -200.0, 200.0);
    CHECK(std::abs(r.value - boost::math::beta(p / 2.0, 0.5)) < 1e-10);
  }
}

TEST_CASE("tensorized product integral") {
  const auto r = integrate_2d([](double x, double y) { return std::exp(-x * x - 2.0 * y * y); }, -10, 10, -10, 10);
  CHECK(std::abs(r.value - std::numbers::pi / std::sqrt(2.0)) < 1e-10);
}

TEST_CASE("half tolerance reproduces the value") {
  auto f = [](double x) { return std::exp(-std::cosh(x)); };
  const auto a = integrate(f, -30, 30, {1e-10, 30});
  const auto b = integrate(f, -30, 30, {5e-11, 30});
  CHECK(std::abs(a.value - b.value) < 1e-10);
}
