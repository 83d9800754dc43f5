#pragma once

#include <utility>
#include <vector>

#include "proxnet/models.hpp"
#include "proxnet/network.hpp"

namespace proxnet {

enum class LipMode { Gradient, Exact };

// One locally informed proposal: flip K entries drawn from the softmax of
// half the per-edge deltas (balancing function g(a) = sqrt(a)), then
// Metropolis-Hastings correct with the exact delta.
struct LipConfig {
  int K = 1;  // entries per proposal, 1 <= K <= n(n-1)/2
  LipMode mode = LipMode::Gradient;
};

struct LipStepRecord {
  std::vector<EdgeIndex> flips;  // proposed set, selection order
  double log_q_fwd = 0.0;
  double log_q_back = 0.0;
  double delta = 0.0;  // exact log-posterior difference of the move
  bool accepted = false;
};

// Delta-tilde for every edge in one pass (gradient estimate).
std::vector<double> delta_approx_all(const SymmetricBinaryNetwork& A,
                                     const ModelContext& ctx);

// Exact flip difference of the conditional for a single entry.
double delta_exact(const SymmetricBinaryNetwork& A, EdgeIndex e, const ModelContext& ctx);

// Exact flip difference for every edge (small-n exact proposal mode).
std::vector<double> delta_exact_all(const SymmetricBinaryNetwork& A,
                                    const ModelContext& ctx);

// Indices of the K largest (log_weight + Gumbel noise): distributed as
// sequential sampling without replacement from the softmax. -inf weights
// carry zero mass; K must not exceed the candidate count.
std::vector<std::size_t> gumbel_topk(const std::vector<double>& log_weights, int K,
                                     Rng& rng);

std::pair<SymmetricBinaryNetwork, LipStepRecord> lip_update(
    const SymmetricBinaryNetwork& A, const ModelContext& ctx, const LipConfig& cfg,
    Rng& rng);

// Dense K=1 kernel over all 2^{n(n-1)/2} states, n <= 4: proposal mass times
// acceptance off the diagonal, remainder on it.
std::vector<std::vector<double>> build_transition_matrix(const ModelContext& ctx,
                                                         const LipConfig& cfg);

}  // namespace proxnet
