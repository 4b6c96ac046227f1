#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "reinforce/error.hpp"
#include "reinforce/process.hpp"
#include "reinforce/quadrature.hpp"
#include "reinforce/stats.hpp"

using namespace reinforce;

TEST_CASE("ERRW path probabilities") {
  const auto tri = make_complete(3);
  const std::vector<Vertex> back_and_forth{0, 1, 0, 1, 0};
  CHECK(errw_path_prob(tri, back_and_forth) == doctest::Approx(0.2).epsilon(1e-15));
  const std::vector<Vertex> one{0, 2};
  CHECK(errw_path_prob(tri, one) == 0.5);
  const std::vector<Vertex> bad{0, 1, 1};
  CHECK_THROWS_AS(errw_path_prob(tri, bad), InvalidArgument);
  WeightedGraph path(3, {{0, 1, 1.0}, {1, 2, 2.0}});
  const std::vector<Vertex> p{1, 0};
  CHECK(errw_path_prob(path, p) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("enumerated path law sums to one") {
  const auto law = enumerate_path_law(make_complete(3), 0, 4);
  CHECK(law.size() == 16);
  CHECK(std::abs(law.total() - 1.0) < 1e-12);
  const auto law2 = enumerate_path_law(make_cycle(5, 0.7), 2, 8);
  CHECK(law2.size() == 256);
  CHECK(std::abs(law2.total() - 1.0) < 1e-12);
  const Path p{0, 1, 0, 1, 0};
  REQUIRE(law.index_of(p) < law.size());
  CHECK(law.probabilities[law.index_of(p)] == doctest::Approx(0.2));
  CHECK_THROWS_AS(enumerate_path_law(make_complete(3), 0, 9), SizeError);
  CHECK_THROWS_AS(enumerate_path_law(make_complete(4), 0, 8, 1000), CapacityError);
}

TEST_CASE("chi-square basics") {
  const std::vector<double> probs{0.1, 0.2, 0.3, 0.4};
  const std::vector<double> exact{100, 200, 300, 400};
  const auto r = chi_square_gof(exact, probs);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
  CHECK(r.dof == 3);
  const std::vector<double> tiny{1, 1};
  const std::vector<double> half{0.5, 0.5};
  CHECK_THROWS_AS(chi_square_gof(tiny, half), InvalidArgument);
  // 11.345 is the 0.99 quantile with 3 degrees of freedom.
  CHECK(chi_square_sf(11.344866730144373, 3) == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("chi-square pools small cells") {
  const std::vector<double> probs{0.001, 0.001, 0.498, 0.5};
  const std::vector<double> obs{2, 0, 500, 498};
  const auto r = chi_square_gof(obs, probs);
  CHECK(r.cells == 2);
}

TEST_CASE("simulated ERRW against its own oracle, and power against a wrong law") {
  const auto tri = make_complete(3);
  const auto law = enumerate_path_law(tri, 0, 4);
  int passes = 0;
  std::vector<double> last_counts;
  ProcessState s;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    Stream rng(4242, rep);
    std::vector<double> counts(law.size(), 0.0);
    for (int i = 0; i < 1'000'000; ++i) {
      s.reset(tri, ProcessKind::Errw, 0);
      std::size_t code = 0;
      for (int k = 0; k < 4; ++k) {
        const Vertex from = s.current;
        const Vertex to = errw_step(tri, s, rng);
        // neighbours of `from` in increasing order: bit 1 for the larger one
        code = 2 * code + (to > 3 - from - to ? 1 : 0);
      }
      counts[code] += 1.0;
    }
    if (chi_square_gof(counts, law.probabilities).p_value > 0.01) ++passes;
    last_counts = counts;
  }
  CHECK(passes >= 98);
  auto wrong = law.probabilities;
  std::swap(wrong[0], wrong[5]);
  REQUIRE(wrong[0] != wrong[5]);
  CHECK(chi_square_gof(last_counts, wrong).p_value < 1e-6);
}

TEST_CASE("path codes follow enumeration order") {
  // The binary code used above matches the enumeration order of the law.
  const auto law = enumerate_path_law(make_complete(3), 0, 4);
  for (std::size_t idx = 0; idx < law.size(); ++idx) {
    const auto& p = law.paths[idx];
    std::size_t code = 0;
    for (int k = 0; k < 4; ++k) code = 2 * code + (p[k + 1] > 3 - p[k] - p[k + 1] ? 1 : 0);
    CHECK(code == idx);
  }
}

TEST_CASE("chi-square homogeneity") {
  const std::vector<double> a{100, 200, 300}, b{200, 400, 600};
  CHECK(chi_square_homogeneity(a, b).statistic == doctest::Approx(0.0));
  const std::vector<double> c{300, 200, 100};
  CHECK(chi_square_homogeneity(a, c).p_value < 1e-6);
}

TEST_CASE("KS two-sample") {
  const std::vector<double> xs{0.3, 1.2, -0.5, 2.2};
  CHECK(ks_two_sample(xs, xs).statistic == 0.0);
  Stream rng(1, 0);
  std::vector<double> e1(10000), e2(10000);
  for (auto& x : e1) x = rng.exponential();
  for (auto& x : e2) x = 0.5 * rng.exponential();
  CHECK(ks_two_sample(e1, e2).p_value < 1e-6);
  int ok = 0;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    Stream r1(100, rep), r2(200, rep);
    std::vector<double> a(2000), b(2000);
    for (auto& x : a) x = r1.exponential();
    for (auto& x : b) x = r2.exponential();
    if (ks_two_sample(a, b).p_value > 0.01) ++ok;
  }
  CHECK(ok >= 98);
}

TEST_CASE("Kolmogorov distribution") {
  CHECK(kolmogorov_sf(1.3580986393225505) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(kolmogorov_sf(1.6276236115189136) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(kolmogorov_sf(0.0) == 1.0);
}

TEST_CASE("KS one-sample") {
  Stream rng(2, 0);
  std::vector<double> u(5000);
  for (auto& x : u) x = rng.uniform();
  CHECK(ks_one_sample(u, [](double x) { return x; }).p_value > 0.01);
  CHECK(ks_one_sample(u, [](double x) { return x * x; }).p_value < 1e-6);
}

TEST_CASE("inverse Gaussian CDF against its density") {
  for (auto [mu, shape] : {std::pair{1.0, 1.0}, std::pair{2.0, 0.3}, std::pair{0.5, 40.0}}) {
    auto pdf = [mu, shape](double x) {
      return std::sqrt(shape / (2.0 * std::numbers::pi * x * x * x)) *
             std::exp(-shape * (x - mu) * (x - mu) / (2.0 * mu * mu * x));
    };
    for (double x : {0.1, 0.5, 1.0, 3.0}) {
      const double q = integrate(pdf, 0.0, x, {1e-12, 30}).value;
      CHECK(std::abs(inverse_gaussian_cdf(x, mu, shape) - q) < 1e-9);
    }
  }
}

TEST_CASE("inverse Gaussian moment fit") {
  // Michael-Schucany-Haas sampler as an independent generator.
  Stream rng(3, 0);
  const double mu = 1.5, shape = 2.0;
  std::vector<double> xs(20000);
  for (auto& x : xs) {
    const double z = rng.normal();
    const double y = z * z;
    const double c = mu + mu * mu * y / (2 * shape) - mu / (2 * shape) * std::sqrt(4 * mu * shape * y + mu * mu * y * y);
    x = rng.uniform() <= mu / (mu + c) ? c : mu * mu / c;
  }
  const auto fit = fit_inverse_gaussian(xs);
  CHECK(fit.mu == doctest::Approx(mu).epsilon(0.03));
  CHECK(fit.shape == doctest::Approx(shape).epsilon(0.1));
  CHECK(ks_one_sample(xs, [&](double x) { return inverse_gaussian_cdf(x, fit.mu, fit.shape); }).p_value > 0.01);
}
