#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "proxnet/gibbs.hpp"
#include "proxnet/lip.hpp"
#include "proxnet/models.hpp"
#include "proxnet/network.hpp"

namespace proxnet {

// Four-stage starting-point construction: (1) fit the network module with the
// latent network summed out, (2) draw candidate networks edge-wise from the
// fitted edge probabilities and keep the highest-probability one, (3) fit the
// outcome module against plug-in exposures averaged over the candidates,
// (4) refine the selected network with informed flip proposals at the fitted
// parameters. Stages 2-3 double as the fixed-network baseline estimators, so
// the experiment drivers consume them from here rather than refitting.

struct CutConfig {
  int iters = 2500;   // module-chain length (both fits)
  int warmup = 500;   // step-adaptation window, dropped from summaries
  double init_step = 0.5;
  bool sample_v = false;  // latent positions move in the network module
  int pilot_iters = 400;  // rate-labeling pilot per basin, 0 disables
  int M = 64;             // candidate networks drawn in stage 2
  int refine_steps = 20000;
  int refine_k = 5;  // flips per refinement proposal
  LipMode refine_mode = LipMode::Gradient;
  // Names pinned at their input values: a proposal block ("prior",
  // "proxy<b>", "treat", "out", "V[<i>]", "hyper"), a single scalar
  // ("proxy0.gamma1"), or "V" for every latent position.
  std::vector<std::string> frozen;
};

struct ScalarSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;  // central 95% credible interval
  double q975 = 0.0;
};

// Stage-1 output: module posterior means and the per-edge latent-edge
// probability. With latent positions in the fit the edge probabilities are
// averaged over retained draws (invariant to rotations of V, which posterior
// means of the positions are not); otherwise they are evaluated once at the
// returned means.
struct CutNetworkFit {
  ParamBlock params;  // network-module scalars at posterior means
  std::vector<double> edge_prob;
  std::vector<ScalarSummary> summary;
  std::vector<std::string> block_names;
  std::vector<double> block_accept;
};

struct CandidateSet {
  std::vector<SymmetricBinaryNetwork> nets;
  std::vector<double> logprob;  // edge-wise log-probability of each candidate
  int argmax = -1;
};

// Stage-3 output. Retained draws back the fixed-network baselines: every
// row holds the fitted scalars in scalar_names order.
struct OutcomeFit {
  ParamBlock params;  // outcome (and treatment) scalars at posterior means
  std::vector<ScalarSummary> summary;
  std::vector<std::string> scalar_names;
  std::vector<std::vector<double>> draws;
  std::vector<std::string> block_names;
  std::vector<double> block_accept;
  bool rank_deficient = false;  // plug-in design lost full column rank
};

struct RefineResult {
  SymmetricBinaryNetwork a;
  // Conditional log-posterior before any step and after each step; built from
  // accepted move deltas, so trace.front() + accepted deltas = trace.back().
  std::vector<double> trace;
  double accept_rate = 0.0;

  RefineResult() : a(2) {}
};

struct InitState {
  SymmetricBinaryNetwork a0_cut;  // stage-2 selection (pre-refinement baseline)
  SymmetricBinaryNetwork a0;      // stage-4 refinement of a0_cut
  ParamBlock theta0;              // stage-1 and stage-3 means merged
  CutNetworkFit network_fit;
  CandidateSet candidates;
  OutcomeFit outcome_fit;
  RefineResult refine;
  std::vector<std::string> provenance;  // one line per stage decision

  InitState() : a0_cut(2), a0(2) {}
};

// Log-likelihood of the observed proxies with the latent network summed out:
// every edge contributes log sum_{k in {0,1}} Pr(obs_e | A*_e = k) Pr(A*_e = k),
// accumulated with log-sum-exp. Requires every proxy to factorize per edge;
// censoring couples edges through degrees and is rejected.
double marginal_edge_loglik(const Dataset& D, const ParamBlock& p);

// Per-edge Pr(A*_e = 1 | proxies, X) under the same mixture, clamped to (0,1).
std::vector<double> cut_edge_probs(const Dataset& D, const ParamBlock& p);

// Stage 1. Causal scenarios target prior(scalars) x marginal_edge_loglik; the
// non-causal scenarios fit the proxy layers over shared latent positions and
// read the edge probabilities off the latent-network model itself. The chain
// starts at the values in `start`; censoring proxies fall back to exact
// enumeration of the latent network (n <= 6 only).
CutNetworkFit fit_network_module(const Dataset& D, Scenario sc, const PriorSpec& prior,
                                 const CutConfig& cfg, const ParamBlock& start,
                                 Rng& rng);

// Stage 2: M edge-wise Bernoulli draws from fit.edge_prob; argmax by summed
// edge log-probability, first winner on ties.
CandidateSet sample_latent_candidates(const CutNetworkFit& fit, int M, Rng& rng);

// Exposures averaged over candidate networks (the stage-3 plug-in covariate).
std::vector<double> plugin_exposures(const std::vector<SymmetricBinaryNetwork>& nets,
                                     const std::vector<std::uint8_t>& Z,
                                     ExposureKind kind);

// Stage 3: outcome scalars against the plug-in-exposure regression, plus the
// treatment scalars against A0 when treatment is assigned on the latent
// network. Flags (but tolerates) a rank-deficient plug-in design.
OutcomeFit fit_outcome_plugin(const Dataset& D, Scenario sc, const PriorSpec& prior,
                              const CutConfig& cfg, const ParamBlock& start,
                              const std::vector<double>& phi_hat,
                              const SymmetricBinaryNetwork& A0, Rng& rng);

// Stage 4: `steps` informed flip updates of the network conditional at fixed
// parameters. steps = 0 returns the input unchanged with a one-point trace.
RefineResult lip_refine(const SymmetricBinaryNetwork& A0, const ModelContext& ctx,
                        int steps, int K, LipMode mode, Rng& rng);

// Composes the four stages. `start` fixes the model structure and the chain
// starting values; outcome exposure kind is read from it.
InitState initialize(const Dataset& D, Scenario sc, const PriorSpec& prior,
                     const CutConfig& cfg, const ParamBlock& start, Rng& rng);

// One chain-log-style line holding (a0_cut, a0, theta0, provenance); latent
// positions are included whenever the block carries them. Reading requires a
// structurally matching parameter block and restores exactly those fields.
void write_init_state(std::ostream& os, const InitState& st);
InitState read_init_state(std::istream& is, const ParamBlock& shape);

}  // namespace proxnet
