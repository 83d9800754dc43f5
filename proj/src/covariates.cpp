#include "proxnet/covariates.hpp"

#include <cmath>
#include <stdexcept>

#include "proxnet/network.hpp"

namespace proxnet {

EdgeCovariates edge_covariates(const Matrix& X) {
  if (X.cols < 2)
    throw std::invalid_argument("edge_covariates: need >= 2 covariate columns");
  const int n = X.rows;
  for (int i = 0; i < n; ++i) {
    double v = X(i, 1);
    if (v != 0.0 && v != 1.0)
      throw std::invalid_argument("edge_covariates: column 1 must be binary");
  }
  EdgeCovariates ec;
  ec.x1_absdiff.resize(num_edge_slots(n));
  ec.x2_xor.resize(num_edge_slots(n));
  std::size_t e = 0;
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j, ++e) {
      ec.x1_absdiff[e] = std::abs(X(i, 0) - X(j, 0));
      ec.x2_xor[e] = (X(i, 1) + X(j, 1) == 1.0) ? 1.0 : 0.0;
    }
  return ec;
}

}  // namespace proxnet
