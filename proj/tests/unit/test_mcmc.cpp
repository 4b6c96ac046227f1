#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "reinforce/error.hpp"
#include "reinforce/mcmc.hpp"
#include "reinforce/quadrature.hpp"
#include "reinforce/stats.hpp"

using namespace reinforce;

namespace {

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index j) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, j);
  return out;
}

// CDF tabulated by piecewise quadrature on [lo, hi], linearly interpolated.
struct TabulatedCdf {
  double lo, hi, step;
  std::vector<double> values;

  TabulatedCdf(const std::function<double(double)>& pdf, double lo_, double hi_, std::size_t cells)
      : lo(lo_), hi(hi_), step((hi_ - lo_) / static_cast<double>(cells)) {
    values.push_back(0.0);
    for (std::size_t k = 0; k < cells; ++k) {
      const double a = lo + step * static_cast<double>(k);
      values.push_back(values.back() + integrate(pdf, a, a + step).value);
    }
  }
  double operator()(double x) const {
    if (x <= lo) return 0.0;
    if (x >= hi) return values.back();
    const double pos = (x - lo) / step;
    const auto k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    return values[k] + frac * (values[k + 1] - values[k]);
  }
};

}  // namespace

TEST_CASE("metropolis acceptance probability") {
  CHECK(metropolis_acceptance(0.0, 1.0) == 1.0);
  CHECK(metropolis_acceptance(0.0, 0.0) == 1.0);
  CHECK(metropolis_acceptance(0.0, -1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(metropolis_acceptance(0.0, std::numeric_limits<double>::quiet_NaN()) == 0.0);
  CHECK(metropolis_acceptance(0.0, -std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(metropolis_acceptance(0.0, std::numeric_limits<double>::infinity()) == 0.0);
}

TEST_CASE("two-state caricature satisfies detailed balance") {
  const double log_pi[2] = {std::log(0.3), std::log(0.7)};
  // Symmetric proposal: always propose the other state.
  for (int i = 0; i < 2; ++i) {
    const int j = 1 - i;
    const double flow_ij = std::exp(log_pi[i]) * metropolis_acceptance(log_pi[i], log_pi[j]);
    const double flow_ji = std::exp(log_pi[j]) * metropolis_acceptance(log_pi[j], log_pi[i]);
    CHECK(flow_ij == doctest::Approx(flow_ji).epsilon(1e-15));
  }
  // The simulated chain visits states in proportion to pi.
  Stream rng(3, 0);
  int state = 0;
  std::size_t visits1 = 0;
  const std::size_t steps = 400'000;
  for (std::size_t k = 0; k < steps; ++k) {
    const int prop = 1 - state;
    if (rng.uniform() < metropolis_acceptance(log_pi[state], log_pi[prop])) state = prop;
    visits1 += static_cast<std::size_t>(state);
  }
  CHECK(static_cast<double>(visits1) / steps == doctest::Approx(0.7).epsilon(0.01));
}

TEST_CASE("uniform target accepts every proposal") {
  const LogDensity flat = [](std::span<const double>) { return 0.0; };
  McmcSettings s;
  s.burn_in = 500;
  s.thinning = 1;
  auto out = adapt_and_sample(flat, 3, Gauge::Free, 2'000, s, 11);
  CHECK(out.diagnostics.acceptance == 1.0);
}

TEST_CASE("tiny proposal scale accepts almost everything") {
  const auto params = MeasureParams::rooted(make_complete(3), 0);
  McmcSettings s;
  s.burn_in = 0;
  s.thinning = 1;
  s.initial_scale = 1e-6;
  auto out = adapt_and_sample(params, 5'000, s, 2);
  CHECK(out.diagnostics.acceptance > 0.999);
  CHECK(out.diagnostics.scale == 1e-6);
}

TEST_CASE("non-finite proposals are rejected") {
  const LogDensity half_line = [](std::span<const double> x) {
    return x[0] > 1.0 ? -std::numeric_limits<double>::infinity() : -0.5 * x[0] * x[0];
  };
  McmcSettings s;
  s.burn_in = 1'000;
  s.thinning = 1;
  auto out = adapt_and_sample(half_line, 1, Gauge::Free, 20'000, s, 5);
  CHECK(out.samples.maxCoeff() <= 1.0);
  CHECK(out.diagnostics.rejected_nonfinite > 0);
}

TEST_CASE("sampler is deterministic given the seed and freezes its scale") {
  const auto params = MeasureParams::rooted(make_complete(3, 2.0), 0);
  McmcSettings s;
  s.burn_in = 2'000;
  auto a = adapt_and_sample(params, 1'000, s, 77);
  auto b = adapt_and_sample(params, 1'000, s, 77);
  CHECK(a.samples == b.samples);
  auto longer = adapt_and_sample(params, 3'000, s, 77);
  CHECK(longer.diagnostics.scale == a.diagnostics.scale);
  CHECK(longer.diagnostics.thinning == a.diagnostics.thinning);
  CHECK((longer.samples.topRows(1'000) - a.samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-vertex rooted samples match the quadrature law") {
  const double w = 1.5;
  const auto g = make_path(2, w);
  const auto params = MeasureParams::rooted(g, 0);
  McmcSettings s;
  auto out = adapt_and_sample(params, 100'000, s, 2024);
  std::vector<double> diffs(static_cast<std::size_t>(out.samples.rows()));
  for (Eigen::Index i = 0; i < out.samples.rows(); ++i)
    diffs[static_cast<std::size_t>(i)] = out.samples(i, 1) - out.samples(i, 0);
  const auto pdf = [&](double d) {
    const double u[2] = {-d / 2, d / 2};
    return std::exp(limit_log_density(g, 0, u));
  };
  const TabulatedCdf cdf(pdf, -20.0, 20.0, 8'000);
  CHECK(cdf.values.back() == doctest::Approx(1.0).epsilon(1e-9));
  const auto ks = ks_one_sample(diffs, [&](double x) { return cdf(x); });
  CHECK(ks.statistic < 0.02);
  CHECK(out.diagnostics.acceptance > 0.2);
  CHECK(out.diagnostics.acceptance < 0.7);
  CHECK(!out.diagnostics.flagged);
}

TEST_CASE("triangle samples stay on the zero-sum hyperplane") {
  const auto params = MeasureParams::rooted(make_complete(3, 0.8), 1);
  McmcSettings s;
  s.burn_in = 3'000;
  auto out = adapt_and_sample(params, 5'000, s, 9);
  for (Eigen::Index i = 0; i < out.samples.rows(); ++i) {
    const double sum = out.samples.row(i).sum();
    CHECK(std::abs(sum) <= 1e-12);
  }
}

TEST_CASE("independent seeds agree in law") {
  const auto params = MeasureParams::rooted(make_complete(3, 1.0), 0);
  McmcSettings s;
  auto a = adapt_and_sample(params, 20'000, s, 1);
  auto b = adapt_and_sample(params, 20'000, s, 2);
  for (Eigen::Index j = 0; j < 3; ++j) {
    const auto ks = ks_two_sample(column(a.samples, j), column(b.samples, j));
    CHECK(ks.statistic < 0.03);
  }
}

TEST_CASE("single pinned vertex reproduces the quadrature mean of cosh - 1") {
  const double eps = 0.7;
  PinnedGraph p(WeightedGraph(1, {}), {eps});
  const auto params = MeasureParams::pinned(p);
  McmcSettings s;
  auto out = adapt_and_sample(params, 50'000, s, 31);
  std::vector<double> values;
  for (Eigen::Index i = 0; i < out.samples.rows(); ++i) values.push_back(std::cosh(out.samples(i, 0)) - 1.0);
  const auto pdf = [&](double t) {
    const double x[1] = {t};
    return std::exp(sigma_log_density(p, x));
  };
  const double mass = integrate(pdf, -60.0, 60.0).value;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
  const double exact = integrate([&](double t) { return (std::cosh(t) - 1.0) * pdf(t); }, -60.0, 60.0).value;
  const auto sum = summarize(values);
  const double ess = effective_sample_size(values);
  const double se = std::sqrt(sum.variance / ess);
  CHECK(std::abs(sum.mean - exact) < 2.0 * se);
}

TEST_CASE("effective sample size and R-hat on known sequences") {
  Stream rng(4, 0);
  std::vector<double> iid(20'000);
  for (auto& x : iid) x = rng.normal();
  const double ess = effective_sample_size(iid);
  CHECK(ess > 15'000);
  CHECK(ess < 25'000);
  // AR(1) with rho = 0.9 has integrated autocorrelation time 19.
  std::vector<double> ar(200'000);
  double x = 0.0;
  for (auto& v : ar) {
    x = 0.9 * x + std::sqrt(1 - 0.81) * rng.normal();
    v = x;
  }
  CHECK(static_cast<double>(ar.size()) / effective_sample_size(ar) == doctest::Approx(19.0).epsilon(0.15));
  CHECK(autocorrelation(ar, 1) == doctest::Approx(0.9).epsilon(0.01));

  std::vector<double> c1(iid.begin(), iid.begin() + 10'000), c2(iid.begin() + 10'000, iid.end());
  CHECK(split_rhat({c1, c2}) < 1.01);
  for (auto& v : c2) v += 1.0;
  CHECK(split_rhat({c1, c2}) > 1.05);
}

TEST_CASE("poorly mixed chains are flagged") {
  // Standard normal explored with tiny frozen steps: each half of the run
  // covers a different stretch of the line.
  const LogDensity wells = [](std::span<const double> x) { return -0.5 * x[0] * x[0]; };
  McmcSettings s;
  s.burn_in = 0;
  s.thinning = 1;
  s.initial_scale = 0.02;
  s.chains = 2;
  auto out = adapt_and_sample(wells, 1, Gauge::Free, 4'000, s, 8);
  CHECK(out.diagnostics.flagged);
  CHECK(!out.diagnostics.messages.empty());
}

TEST_CASE("samples CSV and diagnostics JSON") {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 3, 0.5;
  std::ostringstream os;
  write_samples_csv(os, m, "u");
  CHECK(os.str() == "u_0,u_1\n1,2\n3,0.5\n");
  McmcDiagnostics d;
  d.ess = {10.0};
  d.rhat = {1.01};
  d.acceptance = 0.3;
  d.scale = 0.7;
  const auto j = diagnostics_json(d);
  for (const char* key : {"ess", "rhat", "acceptance", "scale"}) CHECK(j.contains(key));
}
