#include "bfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bfm/rng.hpp"

namespace bfm {

namespace {

double sq_dist(const Vec& a, const Vec& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    d += e * e;
  }
  return d;
}

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t want, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (want >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  idx.resize(want);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

double mmd_rbf(const SampleSet& X, const SampleSet& Y, double bandwidth) {
  if (X.size() == 0 || Y.size() == 0) throw std::invalid_argument("mmd_rbf: empty set");
  if (X.dim != Y.dim) throw std::invalid_argument("mmd_rbf: dim mismatch");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("mmd_rbf: bandwidth must be > 0");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  const std::size_t m = X.size(), n = Y.size();
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) kxx += std::exp(-sq_dist(X.rows[i], X.rows[j]) * inv);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) kyy += std::exp(-sq_dist(Y.rows[i], Y.rows[j]) * inv);
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) kxy += std::exp(-sq_dist(X.rows[i], Y.rows[j]) * inv);
  }
  const double mm = static_cast<double>(m), nn = static_cast<double>(n);
  const double v = kxx / (mm * mm) + kyy / (nn * nn) - 2.0 * kxy / (mm * nn);
  return std::max(v, 0.0);  // clamp the rounding of an identically-zero statistic
}

double median_heuristic_bandwidth(const SampleSet& X, const SampleSet& Y,
                                  std::uint64_t seed, std::size_t cap) {
  if (X.size() == 0 || Y.size() == 0) {
    throw std::invalid_argument("median_heuristic_bandwidth: empty set");
  }
  Rng rng(seed);
  std::vector<const Vec*> pool;
  auto half = cap / 2;
  for (std::size_t i : subsample_indices(X.size(), half, rng)) pool.push_back(&X.rows[i]);
  for (std::size_t i : subsample_indices(Y.size(), half, rng)) pool.push_back(&Y.rows[i]);
  std::vector<double> d;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      d.push_back(std::sqrt(sq_dist(*pool[i], *pool[j])));
    }
  }
  if (d.empty()) return 1.0;
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  const double med = d[d.size() / 2];
  return med > 0.0 ? med : 1.0;
}

double sliced_wasserstein(const SampleSet& X, const SampleSet& Y, int n_projections,
                          std::uint64_t seed) {
  if (X.size() == 0 || Y.size() == 0) {
    throw std::invalid_argument("sliced_wasserstein: empty set");
  }
  if (X.dim != Y.dim) throw std::invalid_argument("sliced_wasserstein: dim mismatch");
  if (n_projections < 1) {
    throw std::invalid_argument("sliced_wasserstein: need >= 1 projection");
  }
  Rng rng(seed);
  const std::size_t n = std::min(X.size(), Y.size());
  const auto xi = subsample_indices(X.size(), n, rng);
  const auto yi = subsample_indices(Y.size(), n, rng);

  const int d = X.dim;
  std::vector<double> px(n), py(n);
  double total = 0.0;
  for (int p = 0; p < n_projections; ++p) {
    Vec u = rng.normal_vec(d);
    double norm = 0.0;
    for (double v : u) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      u.assign(d, 0.0);
      u[0] = 1.0;
      norm = 1.0;
    }
    for (double& v : u) v /= norm;
    for (std::size_t i = 0; i < n; ++i) {
      double ax = 0.0, ay = 0.0;
      const Vec& rx = X.rows[xi[i]];
      const Vec& ry = Y.rows[yi[i]];
      for (int k = 0; k < d; ++k) {
        ax += u[k] * rx[k];
        ay += u[k] * ry[k];
      }
      px[i] = ax;
      py[i] = ay;
    }
    std::sort(px.begin(), px.end());
    std::sort(py.begin(), py.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = px[i] - py[i];
      acc += e * e;
    }
    total += std::sqrt(acc / static_cast<double>(n));
  }
  return total / n_projections;
}

double gaussian_w2(const Vec& mu1, const Mat& cov1, const Vec& mu2, const Mat& cov2) {
  check_same_dim(mu1, mu2, "gaussian_w2");
  const std::size_t d = mu1.size();
  if (cov1.size() != d || cov2.size() != d) {
    throw std::invalid_argument("gaussian_w2: covariance shape mismatch");
  }
  double mean_term = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double e = mu1[i] - mu2[i];
    mean_term += e * e;
  }
  const Mat s2_half = sym_matrix_sqrt(cov2);
  const Mat inner = mat_mul(mat_mul(s2_half, cov1), s2_half);
  // symmetrize against rounding before the second root
  Mat sym(inner.size(), Vec(d, 0.0));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) sym[i][j] = 0.5 * (inner[i][j] + inner[j][i]);
  }
  const Mat cross = sym_matrix_sqrt(sym);
  const double tr = trace(cov1) + trace(cov2) - 2.0 * trace(cross);
  return std::sqrt(std::max(mean_term + tr, 0.0));
}

void fit_gaussian(const SampleSet& X, Vec& mu, Mat& cov) {
  const std::size_t n = X.size();
  if (n < 2) throw std::invalid_argument("fit_gaussian: need >= 2 samples");
  const int d = X.dim;
  mu.assign(d, 0.0);
  for (const auto& row : X.rows) {
    for (int i = 0; i < d; ++i) mu[i] += row[i];
  }
  for (int i = 0; i < d; ++i) mu[i] /= static_cast<double>(n);
  cov.assign(d, Vec(d, 0.0));
  for (const auto& row : X.rows) {
    for (int i = 0; i < d; ++i) {
      const double xi = row[i] - mu[i];
      for (int j = 0; j < d; ++j) cov[i][j] += xi * (row[j] - mu[j]);
    }
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) cov[i][j] /= static_cast<double>(n - 1);
  }
}

}  // namespace bfm
