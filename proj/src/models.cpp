#include "proxnet/models.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "proxnet/dists.hpp"

namespace proxnet {

namespace {

double clamp_prob(double p) {
  if (p < kTreatProbClamp) return kTreatProbClamp;
  if (p > 1.0 - kTreatProbClamp) return 1.0 - kTreatProbClamp;
  return p;
}

// Linear predictor of the latent-network edge probability.
double prior_linpred(const NetworkPriorModel& m, const Dataset& D, std::size_t e,
                     const std::vector<double>* V, int i, int j) {
  if (const auto* er = std::get_if<ErdosRenyiPrior>(&m)) {
    if (er->theta <= 0.0 || er->theta >= 1.0)
      throw std::invalid_argument("network prior: edge probability must be in (0,1)");
    return logit(er->theta);
  }
  if (const auto* le = std::get_if<LogisticEdgePrior>(&m)) {
    if (!D.has_edge_covariates())
      throw std::invalid_argument("logistic edge prior needs edge covariates");
    double t = le->t0 + le->t2 * D.xe.x2_xor[e];
    if (le->use_x1) t += le->t1 * D.xe.x1_absdiff[e];
    return t;
  }
  const auto& ls = std::get<LatentSpacePrior>(m);
  if (V == nullptr || V->size() != static_cast<std::size_t>(2 * D.n))
    throw std::invalid_argument("latent-space prior needs n x 2 positions");
  double dx = (*V)[2 * i] - (*V)[2 * j];
  double dy = (*V)[2 * i + 1] - (*V)[2 * j + 1];
  return ls.intercept - std::exp(ls.log_scale) * std::sqrt(dx * dx + dy * dy);
}

double lsm_linpred(double intercept, double log_scale, const std::vector<double>& V,
                   int i, int j) {
  double dx = V[2 * i] - V[2 * j];
  double dy = V[2 * i + 1] - V[2 * j + 1];
  return intercept - std::exp(log_scale) * std::sqrt(dx * dx + dy * dy);
}

// Censoring reporting probability for a true edge with endpoint degrees di, dj.
double censor_report_prob(int C, int di, int dj) {
  double qi = 1.0 - std::min(1.0, static_cast<double>(C) / di);
  double qj = 1.0 - std::min(1.0, static_cast<double>(C) / dj);
  return 1.0 - qi * qj;
}

double censor_pair_ll(int a_star, int a_obs, int C, int di, int dj) {
  if (a_star == 0) return a_obs ? kNegInf : 0.0;
  return bernoulli_loglik(a_obs, censor_report_prob(C, di, dj));
}

}  // namespace

std::vector<double> exposures(const SymmetricBinaryNetwork& A,
                              const std::vector<std::uint8_t>& Z, ExposureKind kind) {
  switch (kind) {
    case ExposureKind::WeightedDegree: {
      auto d = degrees(A);
      std::vector<double> w(A.n());
      for (int i = 0; i < A.n(); ++i) w[i] = static_cast<double>(d[i]) / (A.n() - 1);
      return exposure_weighted(A, Z, w);
    }
    case ExposureKind::UnweightedSum: {
      std::vector<double> ones(A.n(), 1.0);
      return exposure_weighted(A, Z, ones);
    }
    case ExposureKind::Fraction:
      return exposure_fraction(A, Z);
  }
  throw std::logic_error("unreachable");
}

std::vector<double> outcome_means(const Dataset& D, const SymmetricBinaryNetwork& A,
                                  const OutcomeModel& m) {
  return outcome_means_given_exposure(D, exposures(A, D.Z, m.exposure), m);
}

std::vector<double> outcome_means_given_exposure(const Dataset& D,
                                                 const std::vector<double>& phi,
                                                 const OutcomeModel& m) {
  if (static_cast<int>(m.eta_x.size()) > D.X.cols)
    throw std::invalid_argument("outcome: more covariate coefficients than columns");
  if (static_cast<int>(phi.size()) != D.n)
    throw std::invalid_argument("outcome: exposure vector size mismatch");
  std::vector<double> mu(D.n);
  for (int i = 0; i < D.n; ++i) {
    double v = m.eta0 + m.eta1 * D.Z[i] + m.eta2 * phi[i];
    for (std::size_t k = 0; k < m.eta_x.size(); ++k) v += m.eta_x[k] * D.X(i, k);
    mu[i] = v;
  }
  return mu;
}

double loglik_outcome_given_exposure(const Dataset& D, const std::vector<double>& phi,
                                     const OutcomeModel& m) {
  if (m.sigma <= 0) throw std::invalid_argument("outcome: sigma must be positive");
  if (m.rho) throw std::invalid_argument("outcome: correlated errors need the network");
  auto mu = outcome_means_given_exposure(D, phi, m);
  double ll = 0.0;
  for (int i = 0; i < D.n; ++i) ll += log_normal_pdf(D.Y[i], mu[i], m.sigma);
  return ll;
}

double loglik_outcome(const Dataset& D, const SymmetricBinaryNetwork& A,
                      const OutcomeModel& m) {
  if (m.sigma <= 0) throw std::invalid_argument("outcome: sigma must be positive");
  auto mu = outcome_means(D, A, m);
  if (!m.rho) {
    double ll = 0.0;
    for (int i = 0; i < D.n; ++i) ll += log_normal_pdf(D.Y[i], mu[i], m.sigma);
    return ll;
  }
  // Correlated errors: Sigma = sigma^2 I + rho A.
  const int n = D.n;
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(n, n) * (m.sigma * m.sigma);
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j)
      if (A.get(i, j)) S(i, j) = S(j, i) = *m.rho;
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("outcome: sigma^2 I + rho A is not positive definite");
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) r(i) = D.Y[i] - mu[i];
  double quad = r.dot(llt.solve(r));
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (n * std::log(2.0 * M_PI) + logdet + quad);
}

std::vector<double> edge_score_outcome(const Dataset& D, const SymmetricBinaryNetwork& A,
                                       const OutcomeModel& m) {
  if (m.rho)
    throw std::invalid_argument("edge_score_outcome: unsupported in correlated mode");
  const int n = D.n;
  auto mu = outcome_means(D, A, m);
  std::vector<double> r(n);
  for (int i = 0; i < n; ++i) r[i] = D.Y[i] - mu[i];

  // Per-edge weight of Z_j in dphi_i/dA_ij; degree-based weights are treated
  // as locally constant (the MH correction absorbs the approximation).
  std::vector<double> w(n, 1.0);
  if (m.exposure == ExposureKind::WeightedDegree) {
    auto d = degrees(A);
    for (int i = 0; i < n; ++i) w[i] = static_cast<double>(d[i]) / (n - 1);
  }
  std::vector<double> recv(n, 1.0);  // receiver-side scaling (fraction exposure)
  if (m.exposure == ExposureKind::Fraction) {
    auto d = degrees(A);
    for (int i = 0; i < n; ++i) recv[i] = d[i] > 0 ? 1.0 / d[i] : 0.0;
  }

  const double c = m.eta2 / (m.sigma * m.sigma);
  std::vector<double> score(A.edge_slots());
  std::size_t e = 0;
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j, ++e) {
      double si = r[i] * recv[i] * (m.exposure == ExposureKind::Fraction ? 1.0 : w[j]) *
                  D.Z[j];
      double sj = r[j] * recv[j] * (m.exposure == ExposureKind::Fraction ? 1.0 : w[i]) *
                  D.Z[i];
      score[e] = c * (si + sj);
    }
  return score;
}

double loglik_treatment(const Dataset& D, const SymmetricBinaryNetwork& A,
                        const TreatmentModel& m) {
  if (const auto* iid = std::get_if<IidBernoulliTreatment>(&m)) {
    double ll = 0.0;
    for (int i = 0; i < D.n; ++i) ll += bernoulli_loglik(D.Z[i], clamp_prob(iid->p_z));
    return ll;
  }
  if (std::get_if<ProxyBasedTreatment>(&m)) return 0.0;
  const auto& dp = std::get<DegreeProportionalTreatment>(m);
  auto d = degrees(A);
  double scale = dp.p_z / (D.n - 1);
  if (dp.density_norm) scale /= *dp.density_norm;
  double ll = 0.0;
  for (int i = 0; i < D.n; ++i)
    ll += bernoulli_loglik(D.Z[i], clamp_prob(scale * d[i]));
  return ll;
}

std::vector<double> edge_score_treatment(const Dataset& D,
                                         const SymmetricBinaryNetwork& A,
                                         const TreatmentModel& m) {
  std::vector<double> score(A.edge_slots(), 0.0);
  const auto* dp = std::get_if<DegreeProportionalTreatment>(&m);
  if (dp == nullptr) return score;  // no A-dependence in the other variants

  auto d = degrees(A);
  double scale = dp->p_z / (D.n - 1);
  if (dp->density_norm) scale /= *dp->density_norm;
  // dp_i/dA_ij = scale on both endpoints, zero where the probability clamps.
  std::vector<double> g(D.n, 0.0);
  for (int i = 0; i < D.n; ++i) {
    double p = scale * d[i];
    if (p <= kTreatProbClamp || p >= 1.0 - kTreatProbClamp) continue;
    g[i] = (D.Z[i] ? 1.0 / p : -1.0 / (1.0 - p)) * scale;
  }
  std::size_t e = 0;
  for (int i = 0; i < D.n - 1; ++i)
    for (int j = i + 1; j < D.n; ++j, ++e) score[e] = g[i] + g[j];
  return score;
}

double loglik_proxy(const SymmetricBinaryNetwork& A_obs, const SymmetricBinaryNetwork& A,
                    const Dataset& D, const ProxyModel& m,
                    const std::vector<double>* V) {
  if (A_obs.n() != A.n()) throw std::invalid_argument("proxy: size mismatch");
  const int n = A.n();
  double ll = 0.0;

  if (const auto* rn = std::get_if<RandomNoiseProxy>(&m)) {
    for (std::size_t e = 0; e < A.edge_slots(); ++e)
      ll += bernoulli_loglik(A_obs.bit(e), A.bit(e) ? rn->gamma1 : rn->gamma0);
    return ll;
  }
  if (const auto* cc = std::get_if<CrossClusterProxy>(&m)) {
    if (static_cast<int>(D.clusters.size()) != n)
      throw std::invalid_argument("cross-cluster proxy needs cluster ids");
    std::size_t e = 0;
    for (int i = 0; i < n - 1; ++i)
      for (int j = i + 1; j < n; ++j, ++e) {
        if (D.clusters[i] == D.clusters[j])
          ll += bernoulli_loglik(A_obs.bit(e), A.bit(e) ? cc->gamma1 : cc->gamma0);
        else if (A_obs.bit(e))
          return kNegInf;  // cross-cluster edges are never observed
      }
    return ll;
  }
  if (const auto* dl = std::get_if<DifferentialLogitProxy>(&m)) {
    if (!D.has_edge_covariates())
      throw std::invalid_argument("differential-logit proxy needs edge covariates");
    for (std::size_t e = 0; e < A.edge_slots(); ++e) {
      double t;
      if (A.bit(e)) {
        t = dl->g0;
      } else {
        t = dl->g1 + dl->g3 * D.xe.x2_xor[e];
        if (dl->use_x1) t += dl->g2 * D.xe.x1_absdiff[e];
      }
      ll += bernoulli_loglik_logit(A_obs.bit(e), t);
    }
    return ll;
  }
  if (const auto* lsm = std::get_if<LsmLayerProxy>(&m)) {
    if (V == nullptr || V->size() != static_cast<std::size_t>(2 * n))
      throw std::invalid_argument("LSM proxy needs n x 2 positions");
    std::size_t e = 0;
    for (int i = 0; i < n - 1; ++i)
      for (int j = i + 1; j < n; ++j, ++e)
        ll += bernoulli_loglik_logit(A_obs.bit(e),
                                     lsm_linpred(lsm->intercept, lsm->log_scale, *V, i, j));
    return ll;
  }
  const auto& cen = std::get<CensoringProxy>(m);
  if (cen.C < 1) throw std::invalid_argument("censoring proxy needs C >= 1");
  auto d = degrees(A);
  std::size_t e = 0;
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j, ++e) {
      double term = censor_pair_ll(A.bit(e), A_obs.bit(e), cen.C, d[i], d[j]);
      if (std::isinf(term)) return kNegInf;
      ll += term;
    }
  return ll;
}

std::vector<double> edge_score_proxy(const SymmetricBinaryNetwork& A_obs,
                                     const SymmetricBinaryNetwork& A, const Dataset& D,
                                     const ProxyModel& m, const std::vector<double>* V) {
  const int n = A.n();
  std::vector<double> score(A.edge_slots(), 0.0);

  if (std::get_if<LsmLayerProxy>(&m)) return score;  // no A*-dependence

  if (const auto* cen = std::get_if<CensoringProxy>(&m)) {
    // Flip differences are exact here: d*_i enters min(.) nondifferentiably,
    // and flipping (i,j) shifts the reporting probability of every edge
    // incident to i or j. Encoded so (1-2A_e) * score_e = exact delta.
    auto d = degrees(A);
    std::size_t e = 0;
    for (int i = 0; i < n - 1; ++i)
      for (int j = i + 1; j < n; ++j, ++e) {
        int ai = A.bit(e);
        int di2 = d[i] + (ai ? -1 : 1);
        int dj2 = d[j] + (ai ? -1 : 1);
        double delta = censor_pair_ll(1 - ai, A_obs.bit(e), cen->C, di2, dj2) -
                       censor_pair_ll(ai, A_obs.bit(e), cen->C, d[i], d[j]);
        for (int k = 0; k < n; ++k) {
          if (k == i || k == j) continue;
          if (A.get(i, k)) {
            int o = A_obs.get(std::min(i, k), std::max(i, k));
            delta += censor_pair_ll(1, o, cen->C, di2, d[k]) -
                     censor_pair_ll(1, o, cen->C, d[i], d[k]);
          }
          if (A.get(j, k)) {
            int o = A_obs.get(std::min(j, k), std::max(j, k));
            delta += censor_pair_ll(1, o, cen->C, dj2, d[k]) -
                     censor_pair_ll(1, o, cen->C, d[j], d[k]);
          }
        }
        score[e] = (1 - 2 * ai) * delta;
      }
    return score;
  }

  // Per-edge factorized variants: the log-likelihood is linear in A_e, so the
  // score is the exact flip difference ll(1) - ll(0).
  std::size_t e = 0;
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j, ++e) {
      double ll1, ll0;
      if (const auto* rn = std::get_if<RandomNoiseProxy>(&m)) {
        ll1 = bernoulli_loglik(A_obs.bit(e), rn->gamma1);
        ll0 = bernoulli_loglik(A_obs.bit(e), rn->gamma0);
      } else if (const auto* cc = std::get_if<CrossClusterProxy>(&m)) {
        if (static_cast<int>(D.clusters.size()) != n)
          throw std::invalid_argument("cross-cluster proxy needs cluster ids");
        if (D.clusters[i] != D.clusters[j]) continue;  // no information
        ll1 = bernoulli_loglik(A_obs.bit(e), cc->gamma1);
        ll0 = bernoulli_loglik(A_obs.bit(e), cc->gamma0);
      } else {
        const auto& dl = std::get<DifferentialLogitProxy>(m);
        if (!D.has_edge_covariates())
          throw std::invalid_argument("differential-logit proxy needs edge covariates");
        double t0 = dl.g1 + dl.g3 * D.xe.x2_xor[e];
        if (dl.use_x1) t0 += dl.g2 * D.xe.x1_absdiff[e];
        ll1 = bernoulli_loglik_logit(A_obs.bit(e), dl.g0);
        ll0 = bernoulli_loglik_logit(A_obs.bit(e), t0);
      }
      score[e] = ll_diff(ll1, ll0);
    }
  (void)V;
  return score;
}

double logprior_network(const SymmetricBinaryNetwork& A, const Dataset& D,
                        const NetworkPriorModel& m, const std::vector<double>* V) {
  const int n = A.n();
  double ll = 0.0;
  std::size_t e = 0;
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j, ++e) {
      double t = prior_linpred(m, D, e, V, i, j);
      if (!std::isfinite(t))
        throw std::invalid_argument("network prior: edge probability hit {0,1}");
      ll += bernoulli_loglik_logit(A.bit(e), t);
    }
  return ll;
}

std::vector<double> edge_score_prior(const SymmetricBinaryNetwork& A, const Dataset& D,
                                     const NetworkPriorModel& m,
                                     const std::vector<double>* V) {
  const int n = A.n();
  std::vector<double> score(A.edge_slots());
  std::size_t e = 0;
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j, ++e) {
      double t = prior_linpred(m, D, e, V, i, j);
      if (!std::isfinite(t))
        throw std::invalid_argument("network prior: edge probability hit {0,1}");
      score[e] = t;  // log(p/(1-p)), exact flip difference by linearity
    }
  return score;
}

double conditional_logpost_A(const SymmetricBinaryNetwork& A, const ModelContext& ctx) {
  const Dataset& D = *ctx.data;
  const ParamBlock& p = ctx.p;
  bool causal = ctx.scenario == Scenario::CausalLatentZ ||
                ctx.scenario == Scenario::CausalProxyZ;
  bool latent_z = ctx.scenario == Scenario::CausalLatentZ ||
                  ctx.scenario == Scenario::NoncausalLatentZ;

  double ll = loglik_outcome(D, A, p.outcome);
  if (latent_z) ll += loglik_treatment(D, A, p.treatment);
  if (causal) {
    if (p.proxies.size() != D.proxies.size())
      throw std::invalid_argument("one proxy model per observed proxy required");
    for (std::size_t b = 0; b < D.proxies.size(); ++b)
      ll += loglik_proxy(D.proxies[b], A, D, p.proxies[b], &p.V);
  }
  ll += logprior_network(A, D, p.prior, &p.V);
  return ll;
}

std::vector<double> grad_conditional_logpost_A(const SymmetricBinaryNetwork& A,
                                               const ModelContext& ctx) {
  const Dataset& D = *ctx.data;
  const ParamBlock& p = ctx.p;
  bool causal = ctx.scenario == Scenario::CausalLatentZ ||
                ctx.scenario == Scenario::CausalProxyZ;
  bool latent_z = ctx.scenario == Scenario::CausalLatentZ ||
                  ctx.scenario == Scenario::NoncausalLatentZ;

  std::vector<double> total = edge_score_outcome(D, A, p.outcome);
  if (latent_z) {
    auto s = edge_score_treatment(D, A, p.treatment);
    for (std::size_t e = 0; e < total.size(); ++e) total[e] += s[e];
  }
  if (causal) {
    for (std::size_t b = 0; b < D.proxies.size(); ++b) {
      auto s = edge_score_proxy(D.proxies[b], A, D, p.proxies[b], &p.V);
      for (std::size_t e = 0; e < total.size(); ++e) total[e] += s[e];
    }
  }
  auto s = edge_score_prior(A, D, p.prior, &p.V);
  for (std::size_t e = 0; e < total.size(); ++e) total[e] += s[e];

  for (std::size_t e = 0; e < total.size(); ++e)
    total[e] *= (1 - 2 * static_cast<int>(A.bit(e)));
  return total;
}

double conditional_delta_exact(const SymmetricBinaryNetwork& A,
                               const std::vector<EdgeIndex>& flips,
                               const ModelContext& ctx) {
  const Dataset& D = *ctx.data;
  const int n = D.n;
  if (A.n() != n) throw std::invalid_argument("delta: network size mismatch");
  const ParamBlock& p = ctx.p;
  if (flips.empty()) return 0.0;

  std::vector<std::size_t> slots(flips.size());
  for (std::size_t k = 0; k < flips.size(); ++k) {
    const auto& f = flips[k];
    if (f.i < 0 || f.i >= f.j || f.j >= n)
      throw std::invalid_argument("delta: edge index out of range");
    slots[k] = edge_offset(n, f.i, f.j);
  }
  {
    auto s = slots;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end())
      throw std::invalid_argument("delta: duplicate edge in flip set");
  }

  if (p.outcome.rho)
    return ll_diff(conditional_logpost_A(flip_entries(A, flips), ctx),
                   conditional_logpost_A(A, ctx));

  const bool causal = ctx.scenario == Scenario::CausalLatentZ ||
                      ctx.scenario == Scenario::CausalProxyZ;
  const bool latent_z = ctx.scenario == Scenario::CausalLatentZ ||
                        ctx.scenario == Scenario::NoncausalLatentZ;

  auto d0 = degrees(A);
  std::vector<int> d1 = d0;
  for (std::size_t k = 0; k < flips.size(); ++k) {
    int sgn = A.bit(slots[k]) ? -1 : 1;
    d1[flips[k].i] += sgn;
    d1[flips[k].j] += sgn;
  }
  std::vector<int> endpoints;
  endpoints.reserve(2 * flips.size());
  for (const auto& f : flips) {
    endpoints.push_back(f.i);
    endpoints.push_back(f.j);
  }
  std::sort(endpoints.begin(), endpoints.end());
  endpoints.erase(std::unique(endpoints.begin(), endpoints.end()), endpoints.end());

  double delta = 0.0;

  for (std::size_t k = 0; k < flips.size(); ++k) {
    double t = prior_linpred(p.prior, D, slots[k], &p.V, flips[k].i, flips[k].j);
    if (!std::isfinite(t))
      throw std::invalid_argument("network prior: edge probability hit {0,1}");
    delta += A.bit(slots[k]) ? -t : t;
  }

  if (latent_z) {
    if (const auto* dp = std::get_if<DegreeProportionalTreatment>(&p.treatment)) {
      double scale = dp->p_z / (n - 1);
      if (dp->density_norm) scale /= *dp->density_norm;
      for (int u : endpoints)
        if (d1[u] != d0[u])
          delta += bernoulli_loglik(D.Z[u], clamp_prob(scale * d1[u])) -
                   bernoulli_loglik(D.Z[u], clamp_prob(scale * d0[u]));
    }
  }

  if (causal) {
    if (p.proxies.size() != D.proxies.size())
      throw std::invalid_argument("one proxy model per observed proxy required");
    for (std::size_t b = 0; b < p.proxies.size(); ++b) {
      const ProxyModel& pm = p.proxies[b];
      const SymmetricBinaryNetwork& Aob = D.proxies[b];
      if (std::get_if<LsmLayerProxy>(&pm)) continue;

      if (const auto* cen = std::get_if<CensoringProxy>(&pm)) {
        if (cen->C < 1) throw std::invalid_argument("censoring proxy needs C >= 1");
        // every term incident to a flip endpoint can move (degree effect)
        std::vector<char> touched(n, 0);
        for (const auto& f : flips) touched[f.i] = touched[f.j] = 1;
        double before = 0.0, after = 0.0;
        bool before_inf = false, after_inf = false;
        for (int u = 0; u < n; ++u) {
          if (!touched[u]) continue;
          for (int v = 0; v < n; ++v) {
            if (v == u || (touched[v] && v < u)) continue;
            int i = std::min(u, v), j = std::max(u, v);
            std::size_t s = edge_offset(n, i, j);
            int a0 = A.bit(s);
            int a1 = a0;
            for (std::size_t sl : slots)
              if (sl == s) {
                a1 = 1 - a0;
                break;
              }
            int o = Aob.bit(s);
            double t0 = censor_pair_ll(a0, o, cen->C, d0[i], d0[j]);
            double t1 = censor_pair_ll(a1, o, cen->C, d1[i], d1[j]);
            if (std::isinf(t0)) before_inf = true; else before += t0;
            if (std::isinf(t1)) after_inf = true; else after += t1;
          }
        }
        if (before_inf && after_inf) continue;  // both sides impossible
        if (after_inf) return kNegInf;
        if (before_inf) return -kNegInf;
        delta += after - before;
        continue;
      }

      // per-edge factorized variants: only flipped entries' terms change
      for (std::size_t k = 0; k < flips.size(); ++k) {
        std::size_t s = slots[k];
        int o = Aob.bit(s);
        double ll1, ll0;
        if (const auto* rn = std::get_if<RandomNoiseProxy>(&pm)) {
          ll1 = bernoulli_loglik(o, rn->gamma1);
          ll0 = bernoulli_loglik(o, rn->gamma0);
        } else if (const auto* cc = std::get_if<CrossClusterProxy>(&pm)) {
          if (static_cast<int>(D.clusters.size()) != n)
            throw std::invalid_argument("cross-cluster proxy needs cluster ids");
          if (D.clusters[flips[k].i] != D.clusters[flips[k].j]) continue;
          ll1 = bernoulli_loglik(o, cc->gamma1);
          ll0 = bernoulli_loglik(o, cc->gamma0);
        } else {
          const auto& dl = std::get<DifferentialLogitProxy>(pm);
          if (!D.has_edge_covariates())
            throw std::invalid_argument("differential-logit proxy needs edge covariates");
          double t0 = dl.g1 + dl.g3 * D.xe.x2_xor[s];
          if (dl.use_x1) t0 += dl.g2 * D.xe.x1_absdiff[s];
          ll1 = bernoulli_loglik_logit(o, dl.g0);
          ll0 = bernoulli_loglik_logit(o, t0);
        }
        double dir = A.bit(s) ? ll_diff(ll0, ll1) : ll_diff(ll1, ll0);
        if (std::isinf(dir)) return dir;
        delta += dir;
      }
    }
  }

  if (p.outcome.eta2 != 0.0) {
    const OutcomeModel& om = p.outcome;
    if (om.sigma <= 0) throw std::invalid_argument("outcome: sigma must be positive");
    if (static_cast<int>(om.eta_x.size()) > D.X.cols)
      throw std::invalid_argument("outcome: more covariate coefficients than columns");
    std::vector<double> phi0 = exposures(A, D.Z, om.exposure);
    std::vector<double> phi = phi0;
    std::vector<double> raw;  // fraction exposure: unnormalized neighbor sums
    if (om.exposure == ExposureKind::Fraction) {
      raw.resize(n);
      for (int i = 0; i < n; ++i) raw[i] = phi0[i] * d0[i];
    }
    SymmetricBinaryNetwork W = A;
    std::vector<int> dd = d0;
    for (std::size_t k = 0; k < flips.size(); ++k) {
      const int i = flips[k].i, j = flips[k].j;
      const std::size_t s = slots[k];
      const int a_old = W.bit(s);
      const int sgn = a_old ? -1 : 1;
      switch (om.exposure) {
        case ExposureKind::UnweightedSum:
          phi[i] += sgn * static_cast<double>(D.Z[j]);
          phi[j] += sgn * static_cast<double>(D.Z[i]);
          break;
        case ExposureKind::Fraction:
          raw[i] += sgn * static_cast<double>(D.Z[j]);
          raw[j] += sgn * static_cast<double>(D.Z[i]);
          break;
        case ExposureKind::WeightedDegree: {
          const double den = n - 1.0;
          double wi_old = dd[i] / den, wj_old = dd[j] / den;
          double wi_new = (dd[i] + sgn) / den, wj_new = (dd[j] + sgn) / den;
          for (int k2 = 0; k2 < n; ++k2) {
            if (k2 == i)
              phi[i] += (wj_new * (1 - a_old) - wj_old * a_old) * D.Z[j];
            else if (k2 == j)
              phi[j] += (wi_new * (1 - a_old) - wi_old * a_old) * D.Z[i];
            else
              phi[k2] += (wi_new - wi_old) * (W.get(i, k2) ? D.Z[i] : 0.0) +
                         (wj_new - wj_old) * (W.get(j, k2) ? D.Z[j] : 0.0);
          }
          break;
        }
      }
      dd[i] += sgn;
      dd[j] += sgn;
      W.set_bit(s, !a_old);
    }
    if (om.exposure == ExposureKind::Fraction)
      for (int u : endpoints) phi[u] = dd[u] > 0 ? raw[u] / dd[u] : 0.0;

    const double inv2s2 = 1.0 / (2.0 * om.sigma * om.sigma);
    auto add_unit = [&](int u) {
      if (phi[u] == phi0[u]) return;
      double mu0 = om.eta0 + om.eta1 * D.Z[u] + om.eta2 * phi0[u];
      for (std::size_t c = 0; c < om.eta_x.size(); ++c) mu0 += om.eta_x[c] * D.X(u, c);
      double r0 = D.Y[u] - mu0;
      double r1 = r0 - om.eta2 * (phi[u] - phi0[u]);
      delta += (r0 * r0 - r1 * r1) * inv2s2;
    };
    if (om.exposure == ExposureKind::WeightedDegree)
      for (int u = 0; u < n; ++u) add_unit(u);
    else
      for (int u : endpoints) add_unit(u);
  }

  return delta;
}

std::vector<double> prior_edge_logits(const Dataset& D, const NetworkPriorModel& m,
                                      const std::vector<double>* V) {
  std::vector<double> out(num_edge_slots(D.n));
  std::size_t e = 0;
  for (int i = 0; i < D.n - 1; ++i)
    for (int j = i + 1; j < D.n; ++j, ++e) out[e] = prior_linpred(m, D, e, V, i, j);
  return out;
}

double prior_edge_logit(const Dataset& D, const NetworkPriorModel& m,
                        const std::vector<double>* V, int i, int j) {
  if (i > j) std::swap(i, j);
  return prior_linpred(m, D, edge_offset(D.n, i, j), V, i, j);
}

double lsm_edge_logit(const LsmLayerProxy& m, const std::vector<double>& V, int i,
                      int j) {
  return lsm_linpred(m.intercept, m.log_scale, V, i, j);
}

void redraw_data_given_params(Dataset& D, SymmetricBinaryNetwork& a_star,
                              const ParamBlock& p, Rng& rng, bool redraw_network) {
  const int n = D.n;
  if (a_star.n() != n) throw std::invalid_argument("redraw: network size mismatch");
  if (p.outcome.rho) throw std::invalid_argument("redraw: correlated errors unsupported");
  if (p.proxies.size() != D.proxies.size())
    throw std::invalid_argument("redraw: proxy model count mismatch");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  if (redraw_network) {
    auto logits = prior_edge_logits(D, p.prior, &p.V);
    for (std::size_t e = 0; e < a_star.edge_slots(); ++e)
      a_star.set_bit(e, unif(rng) < sigmoid(logits[e]));
  }
  auto d = degrees(a_star);

  for (std::size_t b = 0; b < p.proxies.size(); ++b) {
    const ProxyModel& m = p.proxies[b];
    SymmetricBinaryNetwork& obs = D.proxies[b];
    std::size_t e = 0;
    for (int i = 0; i < n - 1; ++i)
      for (int j = i + 1; j < n; ++j, ++e) {
        int a = a_star.bit(e);
        double pr;
        if (const auto* rn = std::get_if<RandomNoiseProxy>(&m)) {
          pr = a ? rn->gamma1 : rn->gamma0;
        } else if (const auto* cc = std::get_if<CrossClusterProxy>(&m)) {
          pr = D.clusters[i] == D.clusters[j] ? (a ? cc->gamma1 : cc->gamma0) : 0.0;
        } else if (const auto* dl = std::get_if<DifferentialLogitProxy>(&m)) {
          double t = a ? dl->g0 : dl->g1 + dl->g3 * D.xe.x2_xor[e];
          if (!a && dl->use_x1) t += dl->g2 * D.xe.x1_absdiff[e];
          pr = sigmoid(t);
        } else if (const auto* lsm = std::get_if<LsmLayerProxy>(&m)) {
          if (p.V.size() != static_cast<std::size_t>(2 * n))
            throw std::invalid_argument("redraw: LSM proxy needs n x 2 positions");
          pr = sigmoid(lsm_linpred(lsm->intercept, lsm->log_scale, p.V, i, j));
        } else {
          const auto& cen = std::get<CensoringProxy>(m);
          pr = a ? censor_report_prob(cen.C, d[i], d[j]) : 0.0;
        }
        obs.set_bit(e, unif(rng) < pr);
      }
  }

  if (const auto* iid = std::get_if<IidBernoulliTreatment>(&p.treatment)) {
    for (int i = 0; i < n; ++i) D.Z[i] = unif(rng) < clamp_prob(iid->p_z) ? 1 : 0;
  } else if (const auto* dp = std::get_if<DegreeProportionalTreatment>(&p.treatment)) {
    double scale = dp->p_z / (n - 1);
    if (dp->density_norm) scale /= *dp->density_norm;
    for (int i = 0; i < n; ++i) D.Z[i] = unif(rng) < clamp_prob(scale * d[i]) ? 1 : 0;
  }

  auto mu = outcome_means(D, a_star, p.outcome);
  for (int i = 0; i < n; ++i) D.Y[i] = mu[i] + p.outcome.sigma * gauss(rng);
}

SimulatedData simulate_scm(Rng& rng, const ScmConfig& cfg) {
  SimulatedData out;
  const int n = cfg.n;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution ber_x2(0.1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Dataset D;
  D.n = n;
  D.X = Matrix(n, 2);
  for (int i = 0; i < n; ++i) {
    D.X(i, 0) = gauss(rng);
    D.X(i, 1) = ber_x2(rng) ? 1.0 : 0.0;
  }
  D.xe = edge_covariates(D.X);

  LogisticEdgePrior prior{cfg.t0, cfg.t1, cfg.t2, true};
  SymmetricBinaryNetwork a_star(n);
  {
    std::size_t e = 0;
    for (int i = 0; i < n - 1; ++i)
      for (int j = i + 1; j < n; ++j, ++e) {
        double t = cfg.t0 + cfg.t1 * D.xe.x1_absdiff[e] + cfg.t2 * D.xe.x2_xor[e];
        a_star.set_bit(e, unif(rng) < sigmoid(t));
      }
  }

  double g0 = logit(0.95) - cfg.gamma2 / 2.0;
  double g1 = logit(0.05) + cfg.gamma2 / 2.0;
  DifferentialLogitProxy proxy{g0, g1, cfg.gamma2, cfg.gamma3, true};
  for (int b = 0; b < cfg.B; ++b) {
    SymmetricBinaryNetwork A(n);
    std::size_t e = 0;
    for (int i = 0; i < n - 1; ++i)
      for (int j = i + 1; j < n; ++j, ++e) {
        double t = a_star.bit(e)
                       ? proxy.g0
                       : proxy.g1 + proxy.g2 * D.xe.x1_absdiff[e] +
                             proxy.g3 * D.xe.x2_xor[e];
        A.set_bit(e, unif(rng) < sigmoid(t));
      }
    D.proxies.push_back(std::move(A));
  }

  auto d = degrees(a_star);
  D.Z.resize(n);
  for (int i = 0; i < n; ++i) {
    double pz = clamp_prob(cfg.p_z * d[i] / (n - 1));
    D.Z[i] = unif(rng) < pz ? 1 : 0;
  }

  OutcomeModel outcome;
  outcome.eta0 = cfg.eta0;
  outcome.eta1 = cfg.eta1;
  outcome.eta2 = cfg.eta2;
  outcome.eta_x = {cfg.eta_x1};
  outcome.sigma = cfg.sigma;
  outcome.exposure = ExposureKind::WeightedDegree;

  D.Y.resize(n);
  auto mu = [&] {
    Dataset tmp = D;  // outcome_means reads Z, X from the dataset
    tmp.Y.assign(n, 0.0);
    return outcome_means(tmp, a_star, outcome);
  }();
  for (int i = 0; i < n; ++i) D.Y[i] = mu[i] + cfg.sigma * gauss(rng);

  out.data = std::move(D);
  out.a_star = a_star;
  out.truth.prior = prior;
  out.truth.proxies.assign(cfg.B, proxy);
  out.truth.treatment = DegreeProportionalTreatment{cfg.p_z, std::nullopt};
  out.truth.outcome = outcome;
  return out;
}

}  // namespace proxnet
