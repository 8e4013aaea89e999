#pragma once

// Shared test utilities. The oracles here (finite differences, brute-force
// Fréchet couplings, the Jacobi eigensolver) deliberately do not reuse the
// library's implementation paths they are checking.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "bfm/common.hpp"
#include "bfm/nn.hpp"

namespace testutil {

// central finite differences of f w.r.t. params.flat at the given indices
inline bfm::Vec fd_grad(bfm::ParamSet& params,
                        const std::function<double()>& f,
                        const std::vector<std::size_t>& indices, double h = 1e-5) {
  bfm::Vec g;
  g.reserve(indices.size());
  for (std::size_t i : indices) {
    const double saved = params.flat[i];
    params.flat[i] = saved + h;
    const double fp = f();
    params.flat[i] = saved - h;
    const double fm = f();
    params.flat[i] = saved;
    g.push_back((fp - fm) / (2.0 * h));
  }
  return g;
}

inline double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

// Spearman rank correlation (average ranks for ties)
inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  auto ranks = [&](const std::vector<double>& v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx == 0 || dy == 0) return 0.0;
  return num / std::sqrt(dx * dy);
}

// Brute-force discrete Fréchet distance over all monotone couplings of the
// point sequences (index, value); exponential, for tiny instances only.
inline double brute_frechet(const std::vector<double>& p, const std::vector<double>& q) {
  const std::size_t n = p.size(), m = q.size();
  auto dist = [&](std::size_t i, std::size_t j) {
    const double di = static_cast<double>(i) - static_cast<double>(j);
    const double dv = p[i] - q[j];
    return std::sqrt(di * di + dv * dv);
  };
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk =
      [&](std::size_t i, std::size_t j, double acc) {
        acc = std::max(acc, dist(i, j));
        if (acc >= best) return;
        if (i == n - 1 && j == m - 1) {
          best = std::min(best, acc);
          return;
        }
        if (i + 1 < n) walk(i + 1, j, acc);
        if (j + 1 < m) walk(i, j + 1, acc);
        if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, acc);
      };
  walk(0, 0, 0.0);
  return best;
}

// Independent cyclic Jacobi eigensolver (descending eigenvalues), used as the
// dense oracle for pca_top_k and friends.
struct EigOracle {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;  // rows
};

inline EigOracle jacobi_oracle(std::vector<std::vector<double>> a) {
  const int n = static_cast<int>(a.size());
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-28) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vpk = v[p][k], vqk = v[q][k];
          v[p][k] = c * vpk - s * vqk;
          v[q][k] = s * vpk + c * vqk;
        }
      }
    }
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a[i][i] > a[j][j]; });
  EigOracle out;
  for (int i : order) {
    out.values.push_back(a[i][i]);
    out.vectors.push_back(v[i]);
  }
  return out;
}

}  // namespace testutil
