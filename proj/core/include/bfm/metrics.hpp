#pragma once

#include <cstdint>

#include "bfm/linalg.hpp"
#include "bfm/sample_set.hpp"

namespace bfm {

// Biased V-statistic MMD^2 with Gaussian kernel exp(-|x-y|^2 / (2 bw^2));
// nonnegative, zero for identical multisets.
double mmd_rbf(const SampleSet& X, const SampleSet& Y, double bandwidth);

// Median pairwise distance over the pooled sets (subsampled to cap the
// quadratic cost), the usual default bandwidth.
double median_heuristic_bandwidth(const SampleSet& X, const SampleSet& Y,
                                  std::uint64_t seed = 0, std::size_t cap = 512);

// Mean over seeded random unit directions of the 1-D 2-Wasserstein distance
// (RMS difference of sorted projections). Unequal sample counts are handled
// by deterministically subsampling the larger set.
double sliced_wasserstein(const SampleSet& X, const SampleSet& Y, int n_projections,
                          std::uint64_t seed);

// Bures closed form: W2^2 = |mu1-mu2|^2 + tr(S1 + S2 - 2 (S2^1/2 S1 S2^1/2)^1/2).
// Returns W2.
double gaussian_w2(const Vec& mu1, const Mat& cov1, const Vec& mu2, const Mat& cov2);

// Moment fit (mean, unbiased covariance) for the fit-then-W2 trend metric.
void fit_gaussian(const SampleSet& X, Vec& mu, Mat& cov);

}  // namespace bfm
