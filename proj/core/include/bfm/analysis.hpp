#pragma once

#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "bfm/common.hpp"
#include "bfm/models.hpp"
#include "bfm/sample_set.hpp"

namespace bfm {

// In-place radix-2 FFT; length must be a power of two. The inverse includes
// the 1/n factor.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse);

// Row-column 2D transform of an N x N grid (row-major).
void fft2d(std::vector<std::complex<double>>& grid, int N, bool inverse);

// |DFT|^2 / N^2, shifted so DC sits at (N/2, N/2). With this scale the total
// power equals the image energy sum(x^2) (Parseval).
struct PowerSpectrum2D {
  int N = 0;
  std::vector<double> power;  // N*N, row-major, centered

  double at(int r, int c) const { return power[static_cast<std::size_t>(r) * N + c]; }
  double total() const;
};

PowerSpectrum2D power_spectrum_2d(const Vec& image, int N);

// Mean power per integer radial bin around DC; bins at radius >= N/2 (the
// spectrum corners) are folded into the Nyquist bin so the rings partition
// the grid. The normalized frequency of bin i is i / (N/2).
struct RadialProfile {
  std::vector<double> mean_power;       // length N/2 + 1
  std::vector<std::uint64_t> bin_count; // same length
};

RadialProfile azimuthal_integrate(const PowerSpectrum2D& ps);

// Shannon entropy (nats) of the normalized power distribution, DC included.
double spectral_entropy(const PowerSpectrum2D& ps);

// Fraction of total power at normalized radial frequency > threshold
// (Nyquist = 1; corner bins exceed 1 and always count as high frequency).
double high_freq_ratio(const PowerSpectrum2D& ps, double threshold = 0.5);

// SE and HFR averaged over images corrupted to x_t = t*x1 + (1-t)*eps at each
// requested timestep.
struct SpectralReport {
  std::vector<double> t;
  std::vector<double> se;
  std::vector<double> hfr;
};

SpectralReport noise_sweep_report(const std::vector<Vec>& images, int N,
                                  const std::vector<double>& timesteps,
                                  std::uint64_t seed);

// Discrete Fréchet distance between equal-length curves sampled as points
// (index, value), via the standard coupling dynamic program.
double frechet_curve_distance(const RadialProfile& p, const RadialProfile& q);
double frechet_curve_distance(const std::vector<double>& p, const std::vector<double>& q);

// Top-k principal components by power iteration with deflation on the
// centered covariance (1/(n-1) convention). Component signs are fixed so each
// vector's largest-magnitude entry is positive.
struct PcaResult {
  std::vector<Vec> components;   // k vectors of dim d
  std::vector<double> eigenvalues;
  std::vector<Vec> projections;  // n vectors of dim k
};

PcaResult pca_top_k(const std::vector<Vec>& features, int k);

// Mean squared discrepancy between the segment-start feature f_{t_{m-1}} and
// f_t on a grid of t per segment, averaged over sampled data points.
struct DiscrepancyTable {
  // per segment: (t, mse) rows with t ascending from the segment start
  std::vector<std::vector<std::pair<double, double>>> per_segment;
};

DiscrepancyTable feature_discrepancy_curve(const ModelBundle& bundle,
                                           const SampleSet& data, int n_samples = 50,
                                           int grid_points = 8, std::uint64_t seed = 0);

}  // namespace bfm
