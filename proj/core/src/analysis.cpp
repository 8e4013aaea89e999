#include "bfm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bfm/rng.hpp"

namespace bfm {

namespace {

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

}  // namespace

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_pow2(static_cast<int>(n))) {
    throw std::invalid_argument("fft_radix2: length must be a power of two");
  }
  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) *
                       (inverse ? 1.0 : -1.0);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

void fft2d(std::vector<std::complex<double>>& grid, int N, bool inverse) {
  if (grid.size() != static_cast<std::size_t>(N) * N) {
    throw std::invalid_argument("fft2d: grid size does not match N");
  }
  std::vector<std::complex<double>> line(N);
  for (int r = 0; r < N; ++r) {
    for (int c = 0; c < N; ++c) line[c] = grid[static_cast<std::size_t>(r) * N + c];
    fft_radix2(line, inverse);
    for (int c = 0; c < N; ++c) grid[static_cast<std::size_t>(r) * N + c] = line[c];
  }
  for (int c = 0; c < N; ++c) {
    for (int r = 0; r < N; ++r) line[r] = grid[static_cast<std::size_t>(r) * N + c];
    fft_radix2(line, inverse);
    for (int r = 0; r < N; ++r) grid[static_cast<std::size_t>(r) * N + c] = line[r];
  }
}

double PowerSpectrum2D::total() const {
  double t = 0.0;
  for (double p : power) t += p;
  return t;
}

PowerSpectrum2D power_spectrum_2d(const Vec& image, int N) {
  if (N < 2 || !is_pow2(N)) {
    throw std::invalid_argument("power_spectrum_2d: side must be a power of two >= 2");
  }
  if (image.size() != static_cast<std::size_t>(N) * N) {
    throw std::invalid_argument("power_spectrum_2d: image is not N x N");
  }
  std::vector<std::complex<double>> grid(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) grid[i] = image[i];
  fft2d(grid, N, false);
  PowerSpectrum2D ps;
  ps.N = N;
  ps.power.assign(image.size(), 0.0);
  const double scale = 1.0 / (static_cast<double>(N) * N);
  const int h = N / 2;
  for (int u = 0; u < N; ++u) {
    for (int v = 0; v < N; ++v) {
      // fftshift: frequency (u, v) lands at (u + h, v + h) mod N
      int r = (u + h) % N;
      int c = (v + h) % N;
      ps.power[static_cast<std::size_t>(r) * N + c] =
          std::norm(grid[static_cast<std::size_t>(u) * N + v]) * scale;
    }
  }
  return ps;
}

RadialProfile azimuthal_integrate(const PowerSpectrum2D& ps) {
  const int N = ps.N;
  const int h = N / 2;
  RadialProfile prof;
  prof.mean_power.assign(h + 1, 0.0);
  prof.bin_count.assign(h + 1, 0);
  for (int r = 0; r < N; ++r) {
    for (int c = 0; c < N; ++c) {
      const double dr = r - h;
      const double dc = c - h;
      int bin = static_cast<int>(std::lround(std::sqrt(dr * dr + dc * dc)));
      bin = std::min(bin, h);
      prof.mean_power[bin] += ps.at(r, c);
      prof.bin_count[bin] += 1;
    }
  }
  for (int b = 0; b <= h; ++b) {
    prof.mean_power[b] /= static_cast<double>(prof.bin_count[b]);
  }
  return prof;
}

double spectral_entropy(const PowerSpectrum2D& ps) {
  const double total = ps.total();
  if (!(total > 0.0)) {
    throw std::invalid_argument("spectral_entropy: spectrum has no power");
  }
  double H = 0.0;
  for (double p : ps.power) {
    if (p > 0.0) {
      const double q = p / total;
      H -= q * std::log(q);
    }
  }
  return H;
}

double high_freq_ratio(const PowerSpectrum2D& ps, double threshold) {
  if (!(threshold >= 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("high_freq_ratio: threshold must lie in [0, 1)");
  }
  const double total = ps.total();
  if (!(total > 0.0)) {
    throw std::invalid_argument("high_freq_ratio: spectrum has no power");
  }
  const int N = ps.N;
  const int h = N / 2;
  double hi = 0.0;
  for (int r = 0; r < N; ++r) {
    for (int c = 0; c < N; ++c) {
      const double dr = r - h;
      const double dc = c - h;
      const double freq = std::sqrt(dr * dr + dc * dc) / h;
      if (freq > threshold) hi += ps.at(r, c);
    }
  }
  return hi / total;
}

SpectralReport noise_sweep_report(const std::vector<Vec>& images, int N,
                                  const std::vector<double>& timesteps,
                                  std::uint64_t seed) {
  if (images.empty()) throw std::invalid_argument("noise_sweep_report: no images");
  for (const auto& img : images) {
    if (img.size() != static_cast<std::size_t>(N) * N) {
      throw std::invalid_argument("noise_sweep_report: image side mismatch");
    }
  }
  SpectralReport rep;
  Rng rng(seed);
  for (double t : timesteps) {
    double se_sum = 0.0, hfr_sum = 0.0;
    for (const auto& img : images) {
      Vec eps = rng.normal_vec(img.size());
      Vec xt(img.size());
      for (std::size_t i = 0; i < img.size(); ++i) {
        xt[i] = t * img[i] + (1.0 - t) * eps[i];
      }
      PowerSpectrum2D ps = power_spectrum_2d(xt, N);
      se_sum += spectral_entropy(ps);
      hfr_sum += high_freq_ratio(ps, 0.5);
    }
    rep.t.push_back(t);
    rep.se.push_back(se_sum / static_cast<double>(images.size()));
    rep.hfr.push_back(hfr_sum / static_cast<double>(images.size()));
  }
  return rep;
}

double frechet_curve_distance(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("frechet_curve_distance: length mismatch");
  }
  if (p.empty()) throw std::invalid_argument("frechet_curve_distance: empty curves");
  const std::size_t n = p.size();
  auto dist = [&](std::size_t i, std::size_t j) {
    const double di = static_cast<double>(i) - static_cast<double>(j);
    const double dv = p[i] - q[j];
    return std::sqrt(di * di + dv * dv);
  };
  std::vector<double> dp(n * n, 0.0);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return dp[i * n + j]; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = dist(i, j);
      if (i == 0 && j == 0) {
        at(i, j) = d;
      } else if (i == 0) {
        at(i, j) = std::max(at(0, j - 1), d);
      } else if (j == 0) {
        at(i, j) = std::max(at(i - 1, 0), d);
      } else {
        at(i, j) = std::max(
            std::min({at(i - 1, j), at(i, j - 1), at(i - 1, j - 1)}), d);
      }
    }
  }
  return at(n - 1, n - 1);
}

double frechet_curve_distance(const RadialProfile& p, const RadialProfile& q) {
  return frechet_curve_distance(p.mean_power, q.mean_power);
}

PcaResult pca_top_k(const std::vector<Vec>& features, int k) {
  if (features.size() < 2) throw std::invalid_argument("pca_top_k: need >= 2 features");
  const int d = static_cast<int>(features[0].size());
  if (k < 1 || k > d) throw std::invalid_argument("pca_top_k: k outside 1..dim");
  for (const auto& f : features) {
    if (static_cast<int>(f.size()) != d) {
      throw std::invalid_argument("pca_top_k: ragged feature dims");
    }
  }
  const std::size_t n = features.size();
  Vec mean(d, 0.0);
  for (const auto& f : features) {
    for (int i = 0; i < d; ++i) mean[i] += f[i];
  }
  for (int i = 0; i < d; ++i) mean[i] /= static_cast<double>(n);

  std::vector<Vec> cov(d, Vec(d, 0.0));
  double total_var = 0.0;
  for (const auto& f : features) {
    for (int i = 0; i < d; ++i) {
      const double xi = f[i] - mean[i];
      for (int j = 0; j < d; ++j) cov[i][j] += xi * (f[j] - mean[j]);
    }
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) cov[i][j] /= static_cast<double>(n - 1);
    total_var += cov[i][i];
  }
  if (!(total_var > 0.0)) {
    throw std::invalid_argument("pca_top_k: degenerate (all-identical) inputs");
  }

  PcaResult res;
  std::vector<Vec> C = cov;
  for (int comp = 0; comp < k; ++comp) {
    Vec v(d, 1.0 / std::sqrt(static_cast<double>(d)));
    v[comp % d] += 0.01;  // avoid a start vector orthogonal to the eigenvector
    double lambda = 0.0;
    for (int iter = 0; iter < 20000; ++iter) {
      Vec w(d, 0.0);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) w[i] += C[i][j] * v[j];
      }
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-300) {  // null space: eigenvalue 0, keep current direction
        lambda = 0.0;
        break;
      }
      for (double& x : w) x /= norm;
      double diff = 0.0;
      for (int i = 0; i < d; ++i) diff = std::max(diff, std::abs(std::abs(w[i]) - std::abs(v[i])));
      v = std::move(w);
      double ray = 0.0;
      for (int i = 0; i < d; ++i) {
        double cv = 0.0;
        for (int j = 0; j < d; ++j) cv += C[i][j] * v[j];
        ray += v[i] * cv;
      }
      lambda = ray;
      if (diff < 1e-15 && iter > 2) break;
    }
    // sign convention: largest-magnitude entry positive
    int arg = 0;
    for (int i = 1; i < d; ++i) {
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    }
    if (v[arg] < 0.0) {
      for (double& x : v) x = -x;
    }
    res.components.push_back(v);
    res.eigenvalues.push_back(lambda);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) C[i][j] -= lambda * v[i] * v[j];
    }
  }

  res.projections.assign(n, Vec(k, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    for (int c = 0; c < k; ++c) {
      double acc = 0.0;
      for (int i = 0; i < d; ++i) acc += (features[s][i] - mean[i]) * res.components[c][i];
      res.projections[s][c] = acc;
    }
  }
  return res;
}

DiscrepancyTable feature_discrepancy_curve(const ModelBundle& bundle,
                                           const SampleSet& data, int n_samples,
                                           int grid_points, std::uint64_t seed) {
  if (!bundle.use_semfeat) {
    throw unsupported_error("feature_discrepancy_curve: bundle has no alignment network");
  }
  if (data.size() == 0) throw std::invalid_argument("feature_discrepancy_curve: empty dataset");
  const int F = bundle.dims.feature_dim;
  Rng rng(seed);
  // one (x1, eps, c) draw per sample, shared across segments and grid points
  struct Draw { Vec x1, eps; int label; };
  std::vector<Draw> draws;
  draws.reserve(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    std::size_t idx = rng.uniform_int(0, data.size() - 1);
    draws.push_back({data.rows[idx], rng.normal_vec(data.dim), data.labels[idx]});
  }
  DiscrepancyTable table;
  table.per_segment.resize(bundle.M());
  for (int m = 1; m <= bundle.M(); ++m) {
    const double t_lo = bundle.schedule.lower(m);
    const double dt = bundle.schedule.width(m);
    for (int g = 0; g < grid_points; ++g) {
      const double t = t_lo + dt * static_cast<double>(g) / grid_points;
      double mse_sum = 0.0;
      for (const auto& d : draws) {
        Vec x_lo(d.x1.size()), x_t(d.x1.size());
        for (std::size_t i = 0; i < d.x1.size(); ++i) {
          x_lo[i] = t_lo * d.x1[i] + (1.0 - t_lo) * d.eps[i];
          x_t[i] = t * d.x1[i] + (1.0 - t) * d.eps[i];
        }
        Vec f_start = align_forward(bundle, x_lo, t_lo, d.label);
        Vec f_t = align_forward(bundle, x_t, t, d.label);
        double mse = 0.0;
        for (int i = 0; i < F; ++i) {
          const double e = f_t[i] - f_start[i];
          mse += e * e;
        }
        mse_sum += mse / F;
      }
      table.per_segment[m - 1].push_back({t, mse_sum / n_samples});
    }
  }
  return table;
}

}  // namespace bfm
