#pragma once

#include <vector>

#include "bfm/common.hpp"

namespace bfm {

using Mat = std::vector<Vec>;  // row-major dense, small dims only

// Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations;
// eigenvalues descending, eigenvectors as rows of `vectors`.
struct EigenSym {
  Vec values;
  Mat vectors;
};

EigenSym jacobi_eigen_sym(Mat a, int max_sweeps = 128, double tol = 1e-14);

// Principal square root of a symmetric PSD matrix (2x2 closed form, general
// case via eigendecomposition). Eigenvalues below -psd_tol * scale raise
// invalid_argument; tiny negatives are clamped to zero.
Mat sym_matrix_sqrt(const Mat& a, double psd_tol = 1e-9);

Mat mat_mul(const Mat& a, const Mat& b);
double trace(const Mat& a);

}  // namespace bfm
