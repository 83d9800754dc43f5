#pragma once

// Shared helpers for the test binaries: small random instances, state
// enumeration over all networks of n <= 5 nodes, and distribution distances.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "proxnet/models.hpp"
#include "proxnet/network.hpp"

namespace testsup {

using namespace proxnet;

inline SymmetricBinaryNetwork state_of(int n, std::size_t mask) {
  SymmetricBinaryNetwork A(n);
  for (std::size_t e = 0; e < A.edge_slots(); ++e) A.set_bit(e, (mask >> e) & 1);
  return A;
}

inline std::size_t mask_of(const SymmetricBinaryNetwork& A) {
  std::size_t m = 0;
  for (std::size_t e = 0; e < A.edge_slots(); ++e)
    if (A.bit(e)) m |= std::size_t{1} << e;
  return m;
}

inline SymmetricBinaryNetwork random_network(int n, double p, Rng& rng) {
  SymmetricBinaryNetwork A(n);
  std::bernoulli_distribution coin(p);
  for (std::size_t e = 0; e < A.edge_slots(); ++e) A.set_bit(e, coin(rng));
  return A;
}

inline Dataset random_dataset(int n, Rng& rng, double treat_p = 0.5) {
  Dataset D;
  D.n = n;
  D.X = Matrix(n, 2);
  std::normal_distribution<double> gauss(0, 1);
  std::bernoulli_distribution bx(0.3), bz(treat_p);
  for (int i = 0; i < n; ++i) {
    D.X(i, 0) = gauss(rng);
    D.X(i, 1) = bx(rng) ? 1.0 : 0.0;
  }
  D.xe = edge_covariates(D.X);
  D.Z.resize(n);
  D.Y.resize(n);
  for (int i = 0; i < n; ++i) {
    D.Z[i] = bz(rng);
    D.Y[i] = gauss(rng) * 2.0;
  }
  return D;
}

// Normalized probabilities of every network state under the conditional.
inline std::vector<double> enumerate_posterior(const ModelContext& ctx) {
  const int n = ctx.data->n;
  const std::size_t S = std::size_t{1} << num_edge_slots(n);
  std::vector<double> lp(S);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t mask = 0; mask < S; ++mask) {
    lp[mask] = conditional_logpost_A(state_of(n, mask), ctx);
    mx = std::max(mx, lp[mask]);
  }
  std::vector<double> p(S);
  double z = 0.0;
  for (std::size_t mask = 0; mask < S; ++mask) z += (p[mask] = std::exp(lp[mask] - mx));
  for (auto& v : p) v /= z;
  return p;
}

inline double tv_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace testsup
