#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "proxnet/lip.hpp"
#include "proxnet/models.hpp"
#include "proxnet/network.hpp"

namespace proxnet {

// ----- the continuous block -----
// Every sampled scalar is random-walked on an unconstrained scale: log for
// positive scales, logit for probabilities, identity for coefficients and
// latent positions. Priors: Normal(0, coef_sd^2) on the unconstrained value
// of coefficient-type parameters, HalfNormal(sigma_scale) on scales (with
// the log-transform Jacobian folded into the target), standard normal on
// latent positions, and Normal(mu_j, sigma_j^2) across layers for
// hierarchical proxy coefficients (j = 0 intercepts, j = 1 log-scales).

enum class ParamTransform { Identity, Log, Logit };
enum class ParamPrior { Coef, Scale, UnitNormal, HierGamma };
enum class ParamGroup { NetPrior, Proxy, Treatment, Outcome, LatentPosition, Hyper };

struct ThetaScalar {
  std::string name;
  std::string block;  // scalars sharing a block name are proposed jointly
  ParamGroup group = ParamGroup::Outcome;
  int group_index = -1;  // proxy index or node index where applicable
  ParamTransform tf = ParamTransform::Identity;
  ParamPrior prior = ParamPrior::Coef;
  int hier_coef = -1;  // 0 intercepts, 1 log-scales; -1 otherwise
  double* ptr = nullptr;
};

// Sampled scalars in a fixed deterministic order: network prior, proxies,
// treatment, outcome, latent positions (if sample_v), hyperparameters (if
// present). Unused parameters (e.g. a logistic term with its covariate
// switched off, a censoring cutoff, rho) are not sampled.
std::vector<ThetaScalar> collect_theta(ParamBlock& p, bool sample_v);

// Name/value pairs in collect_theta order.
std::vector<std::pair<std::string, double>> flatten_theta(const ParamBlock& p,
                                                          bool sample_v);

// Constrained <-> unconstrained scale for one scalar.
double transform_forward(ParamTransform tf, double x);
double transform_inverse(ParamTransform tf, double u);

// Log prior density of one sampled scalar (on the scale the sampler moves in,
// Jacobians included).
double scalar_prior_logp(const ThetaScalar& s, const ParamBlock& p,
                         const PriorSpec& prior);

// log p(theta | A, D) up to a constant: scenario-gated likelihood terms plus
// parameter priors. Proxy terms are always included (they carry the proxy
// parameters and latent positions even when the network conditional drops
// them). Treatment enters only under latent-network treatment scenarios.
double logpost_theta(const ParamBlock& p, const SymmetricBinaryNetwork& A,
                     const Dataset& D, Scenario sc, const PriorSpec& prior,
                     bool sample_v);

// Draws every sampled scalar from its prior in place (hyperparameters first,
// then layer coefficients given them).
void sample_params_from_prior(ParamBlock& p, const PriorSpec& prior, bool sample_v,
                              Rng& rng);

// Sum of the target terms the block [lo, hi) can change: the likelihood terms
// it touches plus the prior terms of its own scalars. Differences of this
// quantity equal differences of logpost_theta when only the block moves.
double block_logpost(const ParamBlock& p, const SymmetricBinaryNetwork& A,
                     const Dataset& D, Scenario sc, const PriorSpec& prior,
                     const std::vector<ThetaScalar>& scalars, int lo, int hi);

struct GibbsConfig {
  int T = 4000;        // total iterations per chain
  int warmup = 1000;   // discarded from returned draws, adaptation window
  int L = 1;           // network updates per iteration (0 = fixed network)
  int K = 1;           // flips proposed per network update
  LipMode mode = LipMode::Gradient;
  int chains = 4;
  std::uint64_t seed = 1;
  double init_step = 0.5;
  bool adapt = true;   // step-size adaptation during warmup
  bool sample_v = false;
  int astar_log_every = 0;  // persist the network bits every k-th retained draw
  std::vector<std::string> frozen;  // block names pinned at their initial values
                                    // ("V" pins every latent-position block)
};

class ContinuousKernel {
 public:
  ContinuousKernel(const Dataset& D, Scenario sc, const PriorSpec& prior,
                   const ParamBlock& shape, const GibbsConfig& cfg);

  // One sweep of per-block random-walk Metropolis. Non-finite proposal
  // log-posteriors auto-reject. Robbins-Monro step adaptation toward 0.44
  // acceptance runs only when adapt_now is set.
  void update(ParamBlock& theta, const SymmetricBinaryNetwork& A, Rng& rng,
              bool adapt_now);

  const std::vector<std::string>& block_names() const { return names_; }
  std::vector<double> step_log() const { return step_log_; }
  std::vector<double> acceptance_rates() const;  // realized, since last reset
  void reset_stats();

 private:
  const Dataset* data_;
  Scenario sc_;
  PriorSpec prior_;
  bool sample_v_;
  double target_;
  double gain_;
  std::vector<std::string> names_;
  std::vector<std::pair<int, int>> span_;  // scalar index range per block
  std::vector<char> frozen_;
  std::vector<double> step_log_;
  std::vector<long> adapt_n_;
  std::vector<long> acc_, att_;
  std::size_t n_scalars_;
};

struct PosteriorDraw {
  SymmetricBinaryNetwork a_star;
  ParamBlock theta;
};

// Per-draw monitored quantities appended to logs and diagnostics.
using DrawMonitor =
    std::function<std::vector<std::pair<std::string, double>>(const PosteriorDraw&)>;

struct ChainResult {
  std::vector<PosteriorDraw> draws;  // post-warmup only
  std::vector<std::string> scalar_names;  // flatten order plus "edge_count"
  std::vector<std::string> monitor_names;
  std::vector<std::vector<double>> monitor_values;  // per retained draw
  std::vector<std::string> block_names;
  std::vector<double> block_accept;  // realized post-warmup rates
  double lip_accept = 0.0;           // post-warmup
  double seconds_per_iteration = 0.0;
};

// One block-Gibbs chain: per iteration, L network updates then one continuous
// sweep. Warmup draws are discarded from the result but written to the log.
// The initial state must have positive posterior probability when L > 0.
// Aborts with an error once the continuous state goes non-finite.
ChainResult run_chain(const Dataset& D, Scenario sc, const PriorSpec& prior,
                      const GibbsConfig& cfg, const SymmetricBinaryNetwork& A0,
                      const ParamBlock& theta0, Rng& rng, std::ostream* log = nullptr,
                      int chain_id = 0, const DrawMonitor& monitor = nullptr);

// One Gibbs iteration on externally held state; used by run_chain and by
// calibration tests that interleave their own data redraws.
void gibbs_sweep(SymmetricBinaryNetwork& A, ModelContext& work,
                 ContinuousKernel& kernel, const GibbsConfig& cfg, Rng& rng,
                 bool adapt_now, int* lip_accepts = nullptr);

struct ScalarDiagnostic {
  std::string name;
  std::optional<double> rhat;  // unset for flagged scalars or single chains
  std::optional<double> ess;
  bool constant = false;
};

struct Diagnostics {
  std::vector<ScalarDiagnostic> scalars;
  double lip_accept = 0.0;
  std::vector<std::string> block_names;
  std::vector<double> block_accept;
  double seconds_per_iteration = 0.0;
};

struct MultiChainResult {
  std::vector<ChainResult> chains;
  Diagnostics diag;
};

// Runs cfg.chains chains seeded seed, seed+1, ... and pools diagnostics over
// the flattened parameters, edge count, and any monitored quantities.
MultiChainResult run_chains(const Dataset& D, Scenario sc, const PriorSpec& prior,
                            const GibbsConfig& cfg, const SymmetricBinaryNetwork& A0,
                            const ParamBlock& theta0, std::ostream* log = nullptr,
                            const DrawMonitor& monitor = nullptr);

// Rank-normalized split R-hat and autocorrelation ESS per scalar.
// draws[chain][iteration][scalar]; needs >= 8 draws per chain, equal lengths.
// Constant scalars are flagged instead of propagating NaNs; R-hat needs >= 2
// chains and is left unset otherwise.
Diagnostics compute_diagnostics(const std::vector<std::vector<std::vector<double>>>& draws,
                                const std::vector<std::string>& names);

// Lower-triangular hex encoding of the network bits (slot 8k+b in byte k bit b).
std::string network_to_hex(const SymmetricBinaryNetwork& A);
SymmetricBinaryNetwork network_from_hex(int n, const std::string& hex);

}  // namespace proxnet
