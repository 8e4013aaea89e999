#include "bfm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bfm {

EigenSym jacobi_eigen_sym(Mat a, int max_sweeps, double tol) {
  const int n = static_cast<int>(a.size());
  for (const auto& row : a) {
    if (static_cast<int>(row.size()) != n) {
      throw std::invalid_argument("jacobi_eigen_sym: matrix not square");
    }
  }
  Mat v(n, Vec(n, 0.0));
  for (int i = 0; i < n; ++i) v[i][i] = 1.0;

  double scale = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(a[i][j]));
  }
  if (scale == 0.0) scale = 1.0;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) off = std::max(off, std::abs(a[p][q]));
    }
    if (off <= tol * scale) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) <= tol * scale * 1e-3) continue;
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
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a[i][i] > a[j][j]; });
  EigenSym out;
  out.values.resize(n);
  out.vectors.assign(n, Vec(n));
  for (int i = 0; i < n; ++i) {
    out.values[i] = a[order[i]][order[i]];
    out.vectors[i] = v[order[i]];
  }
  return out;
}

Mat sym_matrix_sqrt(const Mat& a, double psd_tol) {
  const int n = static_cast<int>(a.size());
  if (n == 2) {
    // closed form: sqrt(A) = (A + sqrt(det) I) / sqrt(tr + 2 sqrt(det))
    const double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    const double tr = a[0][0] + a[1][1];
    const double scale = std::max({std::abs(a[0][0]), std::abs(a[1][1]), 1e-300});
    if (det < -psd_tol * scale * scale || tr < -psd_tol * scale) {
      throw std::invalid_argument("sym_matrix_sqrt: matrix not PSD");
    }
    const double s = std::sqrt(std::max(det, 0.0));
    const double denom = std::sqrt(std::max(tr + 2.0 * s, 0.0));
    if (denom == 0.0) return Mat(2, Vec(2, 0.0));
    Mat out(2, Vec(2));
    out[0][0] = (a[0][0] + s) / denom;
    out[0][1] = a[0][1] / denom;
    out[1][0] = a[1][0] / denom;
    out[1][1] = (a[1][1] + s) / denom;
    return out;
  }
  EigenSym eig = jacobi_eigen_sym(a);
  double scale = 1e-300;
  for (double l : eig.values) scale = std::max(scale, std::abs(l));
  Mat out(n, Vec(n, 0.0));
  for (int k = 0; k < n; ++k) {
    double l = eig.values[k];
    if (l < -psd_tol * scale) {
      throw std::invalid_argument("sym_matrix_sqrt: matrix not PSD");
    }
    l = std::sqrt(std::max(l, 0.0));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) out[i][j] += l * eig.vectors[k][i] * eig.vectors[k][j];
    }
  }
  return out;
}

Mat mat_mul(const Mat& a, const Mat& b) {
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b[0].size());
  const int k = static_cast<int>(b.size());
  Mat out(n, Vec(m, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int p = 0; p < k; ++p) {
      const double aip = a[i][p];
      for (int j = 0; j < m; ++j) out[i][j] += aip * b[p][j];
    }
  }
  return out;
}

double trace(const Mat& a) {
  double t = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) t += a[i][i];
  return t;
}

}  // namespace bfm
