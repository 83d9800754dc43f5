#include "proxnet/lip.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "proxnet/dists.hpp"

namespace proxnet {

namespace {

// log softmax of dt/2, max-subtracted; -inf logits keep zero mass
std::vector<double> log_proposal(const std::vector<double>& dt) {
  std::vector<double> lq(dt.size());
  double mx = kNegInf;
  for (double v : dt) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw std::domain_error("proposal: deltas must be < +inf");
    mx = std::max(mx, 0.5 * v);
  }
  if (!std::isfinite(mx)) throw std::domain_error("proposal: no finite delta");
  double sum = 0.0;
  for (std::size_t e = 0; e < dt.size(); ++e) {
    lq[e] = 0.5 * dt[e] - mx;
    sum += std::exp(lq[e]);
  }
  double lse = std::log(sum);
  for (auto& v : lq) v -= lse;
  return lq;
}

std::vector<double> deltas(const SymmetricBinaryNetwork& A, const ModelContext& ctx,
                           LipMode mode) {
  return mode == LipMode::Exact ? delta_exact_all(A, ctx) : delta_approx_all(A, ctx);
}

}  // namespace

std::vector<double> delta_approx_all(const SymmetricBinaryNetwork& A,
                                     const ModelContext& ctx) {
  return grad_conditional_logpost_A(A, ctx);
}

double delta_exact(const SymmetricBinaryNetwork& A, EdgeIndex e,
                   const ModelContext& ctx) {
  return conditional_delta_exact(A, {e}, ctx);
}

std::vector<double> delta_exact_all(const SymmetricBinaryNetwork& A,
                                    const ModelContext& ctx) {
  const int n = A.n();
  std::vector<double> dt(A.edge_slots());
  std::size_t e = 0;
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j, ++e)
      dt[e] = conditional_delta_exact(A, {EdgeIndex{i, j}}, ctx);
  return dt;
}

std::vector<std::size_t> gumbel_topk(const std::vector<double>& log_weights, int K,
                                     Rng& rng) {
  if (K < 1) throw std::invalid_argument("gumbel_topk: K must be >= 1");
  if (static_cast<std::size_t>(K) > log_weights.size())
    throw std::invalid_argument("gumbel_topk: K exceeds candidate count");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> key(log_weights.size());
  for (std::size_t e = 0; e < key.size(); ++e) {
    double w = log_weights[e];
    if (std::isnan(w) || w == std::numeric_limits<double>::infinity())
      throw std::invalid_argument("gumbel_topk: log-weights must be < +inf");
    double u;
    do {
      u = unif(rng);
    } while (u <= 0.0);
    key[e] = w - std::log(-std::log(u));
  }
  std::vector<std::size_t> idx(key.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + K, idx.end(),
                    [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  idx.resize(K);
  return idx;
}

std::pair<SymmetricBinaryNetwork, LipStepRecord> lip_update(
    const SymmetricBinaryNetwork& A, const ModelContext& ctx, const LipConfig& cfg,
    Rng& rng) {
  const std::size_t m = A.edge_slots();
  if (cfg.K < 1 || static_cast<std::size_t>(cfg.K) > m)
    throw std::invalid_argument("lip_update: K out of range");

  auto lq = log_proposal(deltas(A, ctx, cfg.mode));
  auto picks = gumbel_topk(lq, cfg.K, rng);

  LipStepRecord rec;
  rec.flips.reserve(picks.size());
  for (std::size_t s : picks) {
    rec.log_q_fwd += lq[s];
    rec.flips.push_back(edge_at(A.n(), s));
  }

  auto proposed = flip_entries(A, rec.flips);
  auto lq_back = log_proposal(deltas(proposed, ctx, cfg.mode));
  for (std::size_t s : picks) rec.log_q_back += lq_back[s];

  rec.delta = conditional_delta_exact(A, rec.flips, ctx);
  double log_alpha = rec.delta + rec.log_q_back - rec.log_q_fwd;
  if (log_alpha >= 0.0) {
    rec.accepted = true;
  } else {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = std::max(unif(rng), std::numeric_limits<double>::min());
    rec.accepted = std::log(u) < log_alpha;
  }
  if (rec.accepted) return {std::move(proposed), std::move(rec)};
  return {A, std::move(rec)};
}

std::vector<std::vector<double>> build_transition_matrix(const ModelContext& ctx,
                                                         const LipConfig& cfg) {
  const int n = ctx.data->n;
  if (n > 4) throw std::invalid_argument("transition matrix: n must be <= 4");
  if (cfg.K != 1) throw std::invalid_argument("transition matrix: K must be 1");
  const std::size_t m = num_edge_slots(n);
  const std::size_t S = std::size_t{1} << m;

  std::vector<SymmetricBinaryNetwork> nets;
  nets.reserve(S);
  std::vector<std::vector<double>> lqs(S);
  std::vector<char> valid(S, 1);
  for (std::size_t x = 0; x < S; ++x) {
    SymmetricBinaryNetwork N(n);
    for (std::size_t e = 0; e < m; ++e) N.set_bit(e, (x >> e) & 1);
    // Identity rows where the kernel cannot act: zero-probability states (a
    // chain never occupies one) and valid states whose every neighbor is
    // impossible (no proposal support, the chain stays put).
    if (std::isinf(conditional_logpost_A(N, ctx))) {
      valid[x] = 0;
    } else {
      auto dt = deltas(N, ctx, cfg.mode);
      if (std::all_of(dt.begin(), dt.end(), [](double v) { return std::isinf(v); }))
        valid[x] = 0;
      else
        lqs[x] = log_proposal(dt);
    }
    nets.push_back(std::move(N));
  }

  std::vector<std::vector<double>> P(S, std::vector<double>(S, 0.0));
  for (std::size_t x = 0; x < S; ++x) {
    if (!valid[x]) {
      P[x][x] = 1.0;
      continue;
    }
    double leave = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
      std::size_t y = x ^ (std::size_t{1} << e);
      double q = std::exp(lqs[x][e]);
      if (q == 0.0) continue;
      double delta = conditional_delta_exact(nets[x], {edge_at(n, e)}, ctx);
      double log_alpha = delta + lqs[y][e] - lqs[x][e];
      double alpha = log_alpha >= 0.0 ? 1.0 : std::exp(log_alpha);
      P[x][y] = q * alpha;
      leave += P[x][y];
    }
    P[x][x] = 1.0 - leave;
  }
  return P;
}

}  // namespace proxnet
