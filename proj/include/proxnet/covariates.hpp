#pragma once

#include <cstddef>
#include <vector>

namespace proxnet {

// Dense row-major real matrix; just enough for covariate designs.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
  double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const {
    return a[static_cast<std::size_t>(r) * cols + c];
  }
};

// Per-edge covariates in upper-triangle linear order:
//   x1_absdiff = |X1_i - X1_j|, x2_xor = 1{X2_i + X2_j = 1}.
// Both are symmetric in (i,j) by construction.
struct EdgeCovariates {
  std::vector<double> x1_absdiff;
  std::vector<double> x2_xor;
};

// X needs >= 2 columns; column 0 real, column 1 binary. Extra columns are
// allowed and ignored here (unit-level covariates for the outcome model).
EdgeCovariates edge_covariates(const Matrix& X);

}  // namespace proxnet
