#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "reinforce/graph.hpp"

namespace reinforce {

using Path = std::vector<Vertex>;

// Exact law of the first n steps of a walk, one entry per path.
struct PathLaw {
  std::vector<Path> paths;
  std::vector<double> probabilities;

  std::size_t size() const { return paths.size(); }
  // Index of `path` in `paths`, or size() when absent.
  std::size_t index_of(const Path& path) const;
  double total() const;

 private:
  friend PathLaw enumerate_path_law(const WeightedGraph&, Vertex, std::size_t, std::size_t);
  std::map<Path, std::size_t> lookup_;
};

inline constexpr std::size_t kMaxOraclePathLength = 8;

// Probability that the edge-reinforced walk with initial weights a (the
// graph weights) follows `path`, computed with running crossing counts.
// Written independently of the simulators.
double errw_path_prob(const WeightedGraph& a, std::span<const Vertex> path);

// Every n-step path from `start` with its ERRW probability.
PathLaw enumerate_path_law(const WeightedGraph& a, Vertex start, std::size_t n,
                           std::size_t max_paths = 1'000'000);

struct ChiSquareResult {
  double statistic;
  std::size_t dof;
  double p_value;
  std::size_t cells;  // after pooling
};

// Goodness of fit of counts against probabilities. Cells with expected
// count below 5 are pooled.
ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> expected_prob);

// Two-sample homogeneity test on a shared set of categories.
ChiSquareResult chi_square_homogeneity(std::span<const double> counts_a, std::span<const double> counts_b);

double chi_square_sf(double statistic, double dof);

struct KsResult {
  double statistic;
  double p_value;
};

// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_sf(double lambda);

KsResult ks_two_sample(std::span<const double> xs, std::span<const double> ys);
KsResult ks_one_sample(std::span<const double> xs, const std::function<double(double)>& cdf);

// Inverse Gaussian law with mean mu and shape lambda.
double inverse_gaussian_cdf(double x, double mu, double shape);

struct InverseGaussianFit {
  double mu;
  double shape;
};

// Method of moments: mu = mean, shape = mean^3 / variance.
InverseGaussianFit fit_inverse_gaussian(std::span<const double> xs);

struct Summary {
  double mean;
  double variance;  // unbiased
  double stderr_mean;
  std::size_t n;
};

Summary summarize(std::span<const double> xs);

}  // namespace reinforce
