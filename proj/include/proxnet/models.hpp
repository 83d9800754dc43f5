#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "proxnet/covariates.hpp"
#include "proxnet/network.hpp"

namespace proxnet {

using Rng = std::mt19937_64;

// Observed data, immutable input to all inference.
struct Dataset {
  int n = 0;
  std::vector<double> Y;
  std::vector<std::uint8_t> Z;
  Matrix X;                  // n x q unit covariates (q may be 0)
  EdgeCovariates xe;         // |X1_i-X1_j|, xor(X2) per edge; zeros when q < 2
  std::vector<SymmetricBinaryNetwork> proxies;
  std::vector<int> clusters;  // cross-cluster proxy only

  bool has_edge_covariates() const { return !xe.x1_absdiff.empty(); }
};

// Which terms enter the conditional posterior of A* (the four DAG settings:
// proxies causal or not x treatment assigned on the latent network or not).
enum class Scenario {
  CausalLatentZ,    // outcome + treatment + proxies + prior
  CausalProxyZ,     // outcome + proxies + prior
  NoncausalLatentZ, // outcome + treatment + prior(.|V)
  NoncausalProxyZ,  // outcome + prior(.|V)
};

// ----- network prior -----

struct ErdosRenyiPrior {
  double theta;  // edge probability, must lie in (0,1)
};
struct LogisticEdgePrior {
  double t0, t1, t2;    // logit coefficients on (1, x1_absdiff, x2_xor)
  bool use_x1 = true;   // false drops the x1 term (misspecified-model runs)
};
struct LatentSpacePrior {
  double intercept;  // edge logit = intercept - exp(log_scale)*||V_i - V_j||
  double log_scale;
};
using NetworkPriorModel =
    std::variant<ErdosRenyiPrior, LogisticEdgePrior, LatentSpacePrior>;

// ----- proxy measurement -----

struct RandomNoiseProxy {
  double gamma0;  // false-positive rate
  double gamma1;  // true-positive rate
};
// Each unit reports at most C of its true edges; an edge is observed if
// either endpoint reports it; no false positives.
struct CensoringProxy {
  int C;
};
// Within-cluster rates gamma0/gamma1; nothing observed across clusters.
struct CrossClusterProxy {
  double gamma0;
  double gamma1;
};
// Pr(A_ij=1 | A*_ij) = s(A*_ij g0 + (1-A*_ij)(g1 + g2 x1 + g3 x2))
struct DifferentialLogitProxy {
  double g0, g1, g2, g3;
  bool use_x1 = true;
};
// Layer generated from shared latent positions, not from A*.
struct LsmLayerProxy {
  double intercept;
  double log_scale;
};
using ProxyModel = std::variant<RandomNoiseProxy, CensoringProxy, CrossClusterProxy,
                                DifferentialLogitProxy, LsmLayerProxy>;

// ----- treatment assignment -----

struct IidBernoulliTreatment {
  double p_z;
};
// Pr(Z_i=1) = clamp(p_z d_i / (N-1)); with density_norm set, the
// theta-normalized variant clamp(p_z d_i / ((N-1) theta)) used by the
// identification analysis.
struct DegreeProportionalTreatment {
  double p_z;
  std::optional<double> density_norm;
};
// Z depends on observed proxies only; constant in (A*, Theta), the term
// marginalizes out of every conditional.
struct ProxyBasedTreatment {};
using TreatmentModel =
    std::variant<IidBernoulliTreatment, DegreeProportionalTreatment, ProxyBasedTreatment>;

inline constexpr double kTreatProbClamp = 1e-6;

// ----- outcome -----

enum class ExposureKind {
  WeightedDegree,  // phi_i = sum_j (d_j/(N-1)) Z_j A_ij
  UnweightedSum,   // phi_i = sum_j Z_j A_ij
  Fraction,        // phi_i = d_i^{-1} sum_j Z_j A_ij
};

struct OutcomeModel {
  double eta0 = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;
  std::vector<double> eta_x;  // coefficient on X column k, k < eta_x.size()
  double sigma = 1.0;
  std::optional<double> rho;  // neighbor error covariance (identification only)
  ExposureKind exposure = ExposureKind::WeightedDegree;
};

// Independent priors: Normal(0, coef_sd^2) on unconstrained coefficients and
// logits, HalfNormal(sigma_scale) on scale parameters; hierarchical
// Normal(mu_j, sigma_j^2) across layers for LSM intercept/log-scale pairs.
struct PriorSpec {
  double coef_sd = 3.0;
  double sigma_scale = 3.0;
  bool hierarchical_gamma = false;
};

// Hyperparameters of the hierarchical layer prior: index 0 = intercepts,
// index 1 = log-scales.
struct Hierarchy {
  double mu0 = 0.0, sigma0 = 1.0;
  double mu1 = 0.0, sigma1 = 1.0;
};

// The continuous Gibbs block: every sampled quantity except A*.
struct ParamBlock {
  NetworkPriorModel prior = ErdosRenyiPrior{0.5};
  std::vector<ProxyModel> proxies;
  TreatmentModel treatment = IidBernoulliTreatment{0.5};
  OutcomeModel outcome;
  std::vector<double> V;  // n x 2 row-major latent positions (LSM scenarios)
  std::optional<Hierarchy> hyper;
};

struct ModelContext {
  const Dataset* data = nullptr;
  Scenario scenario = Scenario::CausalLatentZ;
  ParamBlock p;
};

// ----- likelihoods and per-edge scores -----
// Scores are gradients of the binary log-likelihood formulas extended to
// real-valued entries; per-edge-factorized terms (prior, per-edge proxies,
// iid treatment) are linear there, so their scores equal exact flip
// differences.

std::vector<double> exposures(const SymmetricBinaryNetwork& A,
                              const std::vector<std::uint8_t>& Z, ExposureKind kind);
std::vector<double> outcome_means(const Dataset& D, const SymmetricBinaryNetwork& A,
                                  const OutcomeModel& m);

// Outcome terms at an externally supplied exposure vector (plug-in fits);
// iid errors only, correlated errors need the network itself.
std::vector<double> outcome_means_given_exposure(const Dataset& D,
                                                 const std::vector<double>& phi,
                                                 const OutcomeModel& m);
double loglik_outcome_given_exposure(const Dataset& D, const std::vector<double>& phi,
                                     const OutcomeModel& m);

double loglik_outcome(const Dataset& D, const SymmetricBinaryNetwork& A,
                      const OutcomeModel& m);
std::vector<double> edge_score_outcome(const Dataset& D, const SymmetricBinaryNetwork& A,
                                       const OutcomeModel& m);

double loglik_treatment(const Dataset& D, const SymmetricBinaryNetwork& A,
                        const TreatmentModel& m);
std::vector<double> edge_score_treatment(const Dataset& D,
                                         const SymmetricBinaryNetwork& A,
                                         const TreatmentModel& m);

double loglik_proxy(const SymmetricBinaryNetwork& A_obs, const SymmetricBinaryNetwork& A,
                    const Dataset& D, const ProxyModel& m,
                    const std::vector<double>* V = nullptr);
std::vector<double> edge_score_proxy(const SymmetricBinaryNetwork& A_obs,
                                     const SymmetricBinaryNetwork& A, const Dataset& D,
                                     const ProxyModel& m,
                                     const std::vector<double>* V = nullptr);

double logprior_network(const SymmetricBinaryNetwork& A, const Dataset& D,
                        const NetworkPriorModel& m,
                        const std::vector<double>* V = nullptr);
std::vector<double> edge_score_prior(const SymmetricBinaryNetwork& A, const Dataset& D,
                                     const NetworkPriorModel& m,
                                     const std::vector<double>* V = nullptr);

// Scenario-gated sum of module terms; shares one additive constant across all
// A so exact differences are meaningful.
double conditional_logpost_A(const SymmetricBinaryNetwork& A, const ModelContext& ctx);

// Delta-tilde: entry e = (1 - 2 A_e) * (sum of component scores at e), the
// first-order estimate of the flip difference at e.
std::vector<double> grad_conditional_logpost_A(const SymmetricBinaryNetwork& A,
                                               const ModelContext& ctx);

// Exact conditional_logpost_A(flip(A, I)) - conditional_logpost_A(A) via
// incremental residual updates: O(|I| n) likelihood work instead of a full
// re-evaluation. Falls back to two dense evaluations under correlated errors.
// Requires a valid current state: terms not incident to the flip set must be
// finite (a chain never occupies a zero-probability state).
double conditional_delta_exact(const SymmetricBinaryNetwork& A,
                               const std::vector<EdgeIndex>& flips,
                               const ModelContext& ctx);

// Per-edge logits of the latent-network model.
std::vector<double> prior_edge_logits(const Dataset& D, const NetworkPriorModel& m,
                                      const std::vector<double>* V = nullptr);
double prior_edge_logit(const Dataset& D, const NetworkPriorModel& m,
                        const std::vector<double>* V, int i, int j);
double lsm_edge_logit(const LsmLayerProxy& m, const std::vector<double>& V, int i,
                      int j);

// Redraws (A*, proxies, Z, Y) in place from the generative model at fixed
// parameters; X and cluster ids stay fixed, and redraw_network = false keeps
// the current A* (conditional redraw of the data alone). Proxy-based
// treatments leave Z untouched (exogenous given the observed proxies).
// Correlated errors are not supported here.
void redraw_data_given_params(Dataset& D, SymmetricBinaryNetwork& a_star,
                              const ParamBlock& p, Rng& rng,
                              bool redraw_network = true);

// ----- forward simulation (the fully-synthetic DGP) -----

struct ScmConfig {
  int n = 100;
  int B = 1;            // number of proxies
  double gamma2 = 3.0;  // proxy noise knob; gamma0/gamma1 derived from it
  double gamma3 = 1.0;
  double p_z = 2.0;  // degree-proportional treatment scale
  double eta0 = -1.0, eta1 = 3.0, eta2 = 2.0, eta_x1 = -0.5, sigma = 1.0;
  double t0 = -2.0, t1 = 0.0, t2 = 1.0;  // latent-network logit coefficients
  Scenario scenario = Scenario::CausalLatentZ;
};

struct SimulatedData {
  Dataset data;
  SymmetricBinaryNetwork a_star;
  ParamBlock truth;

  SimulatedData() : a_star(2) {}
};

SimulatedData simulate_scm(Rng& rng, const ScmConfig& cfg);

}  // namespace proxnet
