#include "proxnet/init.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "proxnet/dists.hpp"

namespace proxnet {

namespace {

bool latent_treatment(Scenario sc) {
  return sc == Scenario::CausalLatentZ || sc == Scenario::NoncausalLatentZ;
}

bool causal_proxies(Scenario sc) {
  return sc == Scenario::CausalLatentZ || sc == Scenario::CausalProxyZ;
}

double clamp_unit(double x) {
  return std::min(std::max(x, 1e-12), 1.0 - 1e-12);
}

// log(exp(a) + exp(b)) with -inf standing for zero mass.
double lse2(double a, double b) {
  if (a < b) std::swap(a, b);
  if (std::isinf(a) && a < 0.0) return kNegInf;
  return a + log1pexp(b - a);
}

void validate_factorized(const Dataset& D, const ParamBlock& p) {
  if (p.proxies.size() != D.proxies.size())
    throw std::invalid_argument("one proxy model per observed proxy required");
  for (const auto& m : p.proxies) {
    if (std::holds_alternative<CensoringProxy>(m))
      throw std::invalid_argument("non-factorized model requested");
    if (std::holds_alternative<CrossClusterProxy>(m) &&
        static_cast<int>(D.clusters.size()) != D.n)
      throw std::invalid_argument("cross-cluster proxy needs cluster ids");
    if (std::holds_alternative<DifferentialLogitProxy>(m) && !D.has_edge_covariates())
      throw std::invalid_argument("differential-logit proxy needs edge covariates");
    if (std::holds_alternative<LsmLayerProxy>(m) &&
        p.V.size() != static_cast<std::size_t>(2 * D.n))
      throw std::invalid_argument("LSM proxy needs n x 2 positions");
  }
}

// Per-edge log mass of the two latent states: prior term plus every proxy's
// observation term, accumulated separately for A*_e = 0 and 1.
struct EdgeMixture {
  std::vector<double> w0, w1;
};

EdgeMixture edge_mixture(const Dataset& D, const ParamBlock& p) {
  validate_factorized(D, p);
  const int n = D.n;
  const std::size_t slots = num_edge_slots(n);
  EdgeMixture mix;
  mix.w0.resize(slots);
  mix.w1.resize(slots);
  auto logits = prior_edge_logits(D, p.prior, &p.V);
  for (std::size_t e = 0; e < slots; ++e) {
    mix.w0[e] = bernoulli_loglik_logit(0, logits[e]);
    mix.w1[e] = bernoulli_loglik_logit(1, logits[e]);
  }
  for (std::size_t b = 0; b < p.proxies.size(); ++b) {
    const SymmetricBinaryNetwork& obs = D.proxies[b];
    if (obs.n() != n) throw std::invalid_argument("proxy: size mismatch");
    const ProxyModel& m = p.proxies[b];
    if (const auto* rn = std::get_if<RandomNoiseProxy>(&m)) {
      for (std::size_t e = 0; e < slots; ++e) {
        int o = obs.bit(e);
        mix.w0[e] += bernoulli_loglik(o, rn->gamma0);
        mix.w1[e] += bernoulli_loglik(o, rn->gamma1);
      }
    } else if (const auto* cc = std::get_if<CrossClusterProxy>(&m)) {
      std::size_t e = 0;
      for (int i = 0; i < n - 1; ++i)
        for (int j = i + 1; j < n; ++j, ++e) {
          int o = obs.bit(e);
          if (D.clusters[i] == D.clusters[j]) {
            mix.w0[e] += bernoulli_loglik(o, cc->gamma0);
            mix.w1[e] += bernoulli_loglik(o, cc->gamma1);
          } else if (o) {
            mix.w0[e] = mix.w1[e] = kNegInf;
          }
        }
    } else if (const auto* dl = std::get_if<DifferentialLogitProxy>(&m)) {
      for (std::size_t e = 0; e < slots; ++e) {
        int o = obs.bit(e);
        double t = dl->g1 + dl->g3 * D.xe.x2_xor[e];
        if (dl->use_x1) t += dl->g2 * D.xe.x1_absdiff[e];
        mix.w0[e] += bernoulli_loglik_logit(o, t);
        mix.w1[e] += bernoulli_loglik_logit(o, dl->g0);
      }
    } else if (const auto* lsm = std::get_if<LsmLayerProxy>(&m)) {
      // Layer independent of the latent network: equal mass on both states.
      std::size_t e = 0;
      for (int i = 0; i < n - 1; ++i)
        for (int j = i + 1; j < n; ++j, ++e) {
          double term =
              bernoulli_loglik_logit(obs.bit(e), lsm_edge_logit(*lsm, p.V, i, j));
          mix.w0[e] += term;
          mix.w1[e] += term;
        }
    } else {
      throw std::invalid_argument("non-factorized model requested");
    }
  }
  return mix;
}

// Exact latent-network sum for models whose proxy terms couple edges: the
// degree-censored case. Feasible only while 2^slots stays enumerable.
double enumerate_latent(const Dataset& D, const ParamBlock& p,
                        std::vector<double>* probs) {
  const std::size_t slots = num_edge_slots(D.n);
  if (slots > 15) throw std::invalid_argument("non-factorized model requested");
  if (p.proxies.size() != D.proxies.size())
    throw std::invalid_argument("one proxy model per observed proxy required");
  SymmetricBinaryNetwork A(D.n);
  double total = kNegInf;
  std::vector<double> on(probs != nullptr ? slots : 0, kNegInf);
  for (std::uint32_t mask = 0; mask < (1u << slots); ++mask) {
    for (std::size_t e = 0; e < slots; ++e) A.set_bit(e, (mask >> e) & 1u);
    double lp = logprior_network(A, D, p.prior, &p.V);
    for (std::size_t b = 0; b < p.proxies.size() && std::isfinite(lp); ++b)
      lp += loglik_proxy(D.proxies[b], A, D, p.proxies[b], &p.V);
    if (!std::isfinite(lp)) continue;
    total = lse2(total, lp);
    if (probs != nullptr)
      for (std::size_t e = 0; e < slots; ++e)
        if ((mask >> e) & 1u) on[e] = lse2(on[e], lp);
  }
  if (probs != nullptr) {
    if (!std::isfinite(total))
      throw std::invalid_argument(
          "edge probabilities: observation impossible under every latent state");
    probs->resize(slots);
    for (std::size_t e = 0; e < slots; ++e)
      (*probs)[e] = clamp_unit(std::exp(on[e] - total));
  }
  return total;
}

std::vector<double> edge_probs_at(const Dataset& D, const ParamBlock& p, bool causal,
                                  bool enumerated) {
  if (!causal) {
    auto logits = prior_edge_logits(D, p.prior, &p.V);
    std::vector<double> out(logits.size());
    for (std::size_t e = 0; e < logits.size(); ++e)
      out[e] = clamp_unit(sigmoid(logits[e]));
    return out;
  }
  if (enumerated) {
    std::vector<double> out;
    enumerate_latent(D, p, &out);
    return out;
  }
  return cut_edge_probs(D, p);
}

std::vector<ThetaScalar> filter_groups(const std::vector<ThetaScalar>& all,
                                       std::initializer_list<ParamGroup> groups) {
  std::vector<ThetaScalar> out;
  for (const auto& s : all)
    for (ParamGroup g : groups)
      if (s.group == g) {
        out.push_back(s);
        break;
      }
  return out;
}

std::string block_key(const ThetaScalar& s);

// Frozen names must exist somewhere in the model so typos fail loudly; a name
// outside the stage's own scalars is legal (that stage never moves it).
void validate_frozen(ParamBlock& p, const CutConfig& cfg) {
  if (cfg.frozen.empty()) return;
  auto all = collect_theta(p, cfg.sample_v);
  for (const auto& f : cfg.frozen) {
    bool hit = false;
    for (const auto& s : all)
      if (f == s.name || f == block_key(s) ||
          (f == "V" && s.group == ParamGroup::LatentPosition)) {
        hit = true;
        break;
      }
    if (!hit) throw std::invalid_argument("unknown frozen block " + f);
  }
}

double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.size() == 1) return v[0];
  double pos = q * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

// Proposal blocks are whole model components (every prior coefficient moves
// together, each proxy's rates together, ...), coarser than the main kernel's
// per-scalar blocks: the module targets are re-evaluated globally per
// proposal, so fewer proposals per sweep is what keeps the fits affordable.
std::string block_key(const ThetaScalar& s) {
  switch (s.group) {
    case ParamGroup::NetPrior: return "prior";
    case ParamGroup::Proxy: return "proxy" + std::to_string(s.group_index);
    case ParamGroup::Treatment: return "treat";
    case ParamGroup::Outcome: return "out";
    case ParamGroup::LatentPosition:
      return "V[" + std::to_string(s.group_index) + "]";
    case ParamGroup::Hyper: return "hyper";
  }
  throw std::logic_error("unreachable");
}

// Blocked random-walk Metropolis state over a scalar subset against
// prior(scalars) x loglik, with the main kernel's proposal and adaptation
// scheme. The prior sum spans every scalar so hyperparameter moves see the
// terms of the coefficients they govern. Frozen names may address a block or
// a single scalar.
struct RwChain {
  ParamBlock* p;
  const std::vector<ThetaScalar>* scal;
  const PriorSpec* prior;
  const std::function<double(const ParamBlock&)>* loglik;
  std::vector<std::pair<int, int>> span;
  std::vector<std::string> block_names;
  std::vector<char> scalar_frozen;
  std::vector<char> block_frozen;
  std::vector<double> step_log;
  std::vector<long> adapt_n, acc, att;
  double cur_ll = 0.0, cur_prior = 0.0;

  RwChain(ParamBlock& p_, const std::vector<ThetaScalar>& scal_,
          const PriorSpec& prior_, const CutConfig& cfg,
          const std::function<double(const ParamBlock&)>& loglik_,
          const std::string& what)
      : p(&p_), scal(&scal_), prior(&prior_), loglik(&loglik_) {
    if (cfg.warmup < 0 || cfg.warmup >= cfg.iters)
      throw std::invalid_argument(what + ": warmup must be in [0, iters)");
    if (!(cfg.init_step > 0.0))
      throw std::invalid_argument(what + ": step must be positive");
    if (scal_.empty()) throw std::invalid_argument(what + ": nothing to fit");

    int lo = 0;
    for (int k = 1; k <= static_cast<int>(scal_.size()); ++k)
      if (k == static_cast<int>(scal_.size()) ||
          block_key(scal_[k]) != block_key(scal_[lo])) {
        block_names.push_back(block_key(scal_[lo]));
        span.emplace_back(lo, k);
        lo = k;
      }
    scalar_frozen.assign(scal_.size(), 0);
    for (const auto& f : cfg.frozen)
      for (std::size_t k = 0; k < scal_.size(); ++k)
        if (f == scal_[k].name || f == block_key(scal_[k]) ||
            (f == "V" && scal_[k].group == ParamGroup::LatentPosition))
          scalar_frozen[k] = 1;
    block_frozen.assign(span.size(), 1);
    for (std::size_t b = 0; b < span.size(); ++b)
      for (int k = span[b].first; k < span[b].second; ++k)
        if (!scalar_frozen[k]) block_frozen[b] = 0;

    step_log.assign(span.size(), std::log(cfg.init_step));
    adapt_n.assign(span.size(), 0);
    acc.assign(span.size(), 0);
    att.assign(span.size(), 0);

    cur_ll = (*loglik)(*p);
    cur_prior = prior_sum();
    if (!std::isfinite(cur_ll + cur_prior))
      throw std::runtime_error(what + ": starting state has non-finite target");
  }

  double prior_sum() const {
    double s = 0.0;
    for (const auto& sc : *scal) s += scalar_prior_logp(sc, *p, *prior);
    return s;
  }

  double target() const { return cur_ll + cur_prior; }

  void sweep(Rng& rng, bool adapt_now, bool count_now) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> old;
    for (std::size_t b = 0; b < span.size(); ++b) {
      if (block_frozen[b]) continue;
      auto [lo, hi] = span[b];
      double step = std::exp(step_log[b]);
      old.clear();
      for (int k = lo; k < hi; ++k) {
        old.push_back(*(*scal)[k].ptr);
        if (scalar_frozen[k]) continue;
        double u =
            transform_forward((*scal)[k].tf, *(*scal)[k].ptr) + step * gauss(rng);
        *(*scal)[k].ptr = transform_inverse((*scal)[k].tf, u);
      }
      double prop_ll = (*loglik)(*p);
      double prop_prior = prior_sum();
      double la = (prop_ll + prop_prior) - (cur_ll + cur_prior);
      double alpha = std::isnan(la) ? 0.0 : (la >= 0.0 ? 1.0 : std::exp(la));
      if (count_now) ++att[b];
      if (unif(rng) < alpha) {
        cur_ll = prop_ll;
        cur_prior = prop_prior;
        if (count_now) ++acc[b];
      } else {
        for (int k = lo; k < hi; ++k) *(*scal)[k].ptr = old[k - lo];
      }
      if (adapt_now) {
        double g = 1.0 / std::pow(static_cast<double>(++adapt_n[b]), 0.6);
        step_log[b] = std::clamp(step_log[b] + g * (alpha - 0.44), -12.0, 4.0);
      }
    }
  }
};

struct FitDraws {
  std::vector<std::string> scalar_names;
  std::vector<ScalarSummary> summary;
  std::vector<std::vector<double>> draws;
  std::vector<std::string> block_names;
  std::vector<double> block_accept;
};

// Full module chain: warmup with adaptation, then retained draws; posterior
// means are written back into p.
FitDraws rw_fit(ParamBlock& p, const std::vector<ThetaScalar>& scal,
                const PriorSpec& prior, const CutConfig& cfg,
                const std::function<double(const ParamBlock&)>& loglik,
                const std::function<void(const ParamBlock&)>& on_draw,
                const std::string& what, Rng& rng) {
  RwChain chain(p, scal, prior, cfg, loglik, what);

  FitDraws out;
  out.scalar_names.reserve(scal.size());
  for (const auto& s : scal) out.scalar_names.push_back(s.name);
  out.block_names = chain.block_names;

  const int retained = cfg.iters - cfg.warmup;
  out.draws.reserve(retained);
  for (int t = 0; t < cfg.iters; ++t) {
    const bool warm = t < cfg.warmup;
    chain.sweep(rng, warm, !warm);
    if (!warm) {
      std::vector<double> row(scal.size());
      for (std::size_t k = 0; k < scal.size(); ++k) row[k] = *scal[k].ptr;
      out.draws.push_back(std::move(row));
      if (on_draw) on_draw(p);
    }
  }

  out.block_accept.assign(chain.span.size(), 0.0);
  for (std::size_t b = 0; b < chain.span.size(); ++b)
    if (chain.att[b] > 0)
      out.block_accept[b] = static_cast<double>(chain.acc[b]) / chain.att[b];

  out.summary.resize(scal.size());
  std::vector<double> col(retained);
  for (std::size_t k = 0; k < scal.size(); ++k) {
    for (int t = 0; t < retained; ++t) col[t] = out.draws[t][k];
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= retained;
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    auto& s = out.summary[k];
    s.name = scal[k].name;
    s.mean = mean;
    s.sd = retained > 1 ? std::sqrt(var / (retained - 1)) : 0.0;
    std::sort(col.begin(), col.end());
    s.q025 = quantile_sorted(col, 0.025);
    s.q975 = quantile_sorted(col, 0.975);
    // Frozen scalars keep their exact input values (the averaged constant
    // draws would differ in the last bit).
    if (!chain.scalar_frozen[k]) *scal[k].ptr = mean;
  }
  return out;
}

// Swaps each unfrozen proxy's edge/non-edge observation rates in place;
// returns whether anything moved.
bool swap_rate_labels(ParamBlock& p, const CutConfig& cfg) {
  bool swapped = false;
  for (std::size_t b = 0; b < p.proxies.size(); ++b) {
    std::string blk = "proxy" + std::to_string(b);
    bool pinned = false;
    for (const auto& f : cfg.frozen)
      if (f == blk || f.rfind(blk + ".", 0) == 0) pinned = true;
    if (pinned) continue;
    if (auto* rn = std::get_if<RandomNoiseProxy>(&p.proxies[b])) {
      std::swap(rn->gamma0, rn->gamma1);
      swapped = true;
    } else if (auto* cc = std::get_if<CrossClusterProxy>(&p.proxies[b])) {
      std::swap(cc->gamma0, cc->gamma1);
      swapped = true;
    } else if (auto* dl = std::get_if<DifferentialLogitProxy>(&p.proxies[b])) {
      std::swap(dl->g0, dl->g1);
      swapped = true;
    }
  }
  return swapped;
}

bool design_rank_deficient(const Dataset& D, const std::vector<double>& phi,
                           const OutcomeModel& m) {
  const int cols = 3 + static_cast<int>(m.eta_x.size());
  Eigen::MatrixXd X(D.n, cols);
  for (int i = 0; i < D.n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = D.Z[i];
    X(i, 2) = phi[i];
    for (std::size_t k = 0; k < m.eta_x.size(); ++k) X(i, 3 + k) = D.X(i, k);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  return qr.rank() < cols;
}

}  // namespace

double marginal_edge_loglik(const Dataset& D, const ParamBlock& p) {
  auto mix = edge_mixture(D, p);
  double ll = 0.0;
  for (std::size_t e = 0; e < mix.w0.size(); ++e) ll += lse2(mix.w0[e], mix.w1[e]);
  return ll;
}

std::vector<double> cut_edge_probs(const Dataset& D, const ParamBlock& p) {
  auto mix = edge_mixture(D, p);
  std::vector<double> out(mix.w0.size());
  for (std::size_t e = 0; e < mix.w0.size(); ++e) {
    double z = lse2(mix.w0[e], mix.w1[e]);
    if (!std::isfinite(z))
      throw std::invalid_argument(
          "edge probabilities: observation impossible under every latent state");
    out[e] = clamp_unit(std::exp(mix.w1[e] - z));
  }
  return out;
}

CutNetworkFit fit_network_module(const Dataset& D, Scenario sc, const PriorSpec& prior,
                                 const CutConfig& cfg, const ParamBlock& start,
                                 Rng& rng) {
  CutNetworkFit out;
  out.params = start;
  ParamBlock& p = out.params;
  if (D.proxies.empty() || p.proxies.size() != D.proxies.size())
    throw std::invalid_argument("network module: one model per observed proxy required");

  const bool causal = causal_proxies(sc);
  bool enumerated = false;
  SymmetricBinaryNetwork blank(D.n);
  std::function<double(const ParamBlock&)> ll;
  if (causal) {
    for (const auto& m : p.proxies)
      if (std::holds_alternative<CensoringProxy>(m)) enumerated = true;
    if (enumerated) {
      if (num_edge_slots(D.n) > 15)
        throw std::invalid_argument("non-factorized model requested");
      ll = [&D](const ParamBlock& q) { return enumerate_latent(D, q, nullptr); };
    } else {
      validate_factorized(D, p);
      ll = [&D](const ParamBlock& q) { return marginal_edge_loglik(D, q); };
    }
  } else {
    for (const auto& m : p.proxies)
      if (!std::holds_alternative<LsmLayerProxy>(m))
        throw std::invalid_argument(
            "network module: independent-layer proxies required when proxies are "
            "not caused by the latent network");
    if (p.V.size() != static_cast<std::size_t>(2 * D.n))
      throw std::invalid_argument("network module: latent positions required");
    ll = [&D, &blank](const ParamBlock& q) {
      double s = 0.0;
      for (std::size_t b = 0; b < q.proxies.size(); ++b)
        s += loglik_proxy(D.proxies[b], blank, D, q.proxies[b], &q.V);
      return s;
    };
  }

  validate_frozen(p, cfg);
  auto scal = filter_groups(collect_theta(p, cfg.sample_v),
                            {ParamGroup::NetPrior, ParamGroup::Proxy,
                             ParamGroup::LatentPosition, ParamGroup::Hyper});

  // Swapping which latent state a proxy's rates describe is a near-symmetry
  // of the edge mixture, so a chain can settle into the relabeled basin and
  // mirror the truth. A short pilot from the given start and from its
  // rate-swapped twin keeps whichever labeling the data favors.
  if (cfg.pilot_iters > 0) {
    ParamBlock alt = p;
    if (swap_rate_labels(alt, cfg)) {
      auto scal_a = filter_groups(collect_theta(alt, cfg.sample_v),
                                  {ParamGroup::NetPrior, ParamGroup::Proxy,
                                   ParamGroup::LatentPosition, ParamGroup::Hyper});
      RwChain main_pilot(p, scal, prior, cfg, ll, "network module");
      RwChain alt_pilot(alt, scal_a, prior, cfg, ll, "network module");
      // Point targets fluctuate by a few nats; compare tail averages.
      const int tail = std::max(1, cfg.pilot_iters / 4);
      double avg_main = 0.0, avg_alt = 0.0;
      for (int t = 0; t < cfg.pilot_iters; ++t) {
        main_pilot.sweep(rng, true, false);
        alt_pilot.sweep(rng, true, false);
        if (t >= cfg.pilot_iters - tail) {
          avg_main += main_pilot.target();
          avg_alt += alt_pilot.target();
        }
      }
      if (avg_alt > avg_main) p = alt;
    }
  }

  const std::size_t slots = num_edge_slots(D.n);
  std::vector<double> acc(slots, 0.0);
  long draws_seen = 0;
  std::function<void(const ParamBlock&)> on_draw;
  if (cfg.sample_v)
    on_draw = [&](const ParamBlock& q) {
      auto pe = edge_probs_at(D, q, causal, enumerated);
      for (std::size_t e = 0; e < slots; ++e) acc[e] += pe[e];
      ++draws_seen;
    };

  auto fit = rw_fit(p, scal, prior, cfg, ll, on_draw, "network module", rng);
  out.summary = std::move(fit.summary);
  out.block_names = std::move(fit.block_names);
  out.block_accept = std::move(fit.block_accept);

  if (cfg.sample_v) {
    out.edge_prob.resize(slots);
    for (std::size_t e = 0; e < slots; ++e)
      out.edge_prob[e] = clamp_unit(acc[e] / static_cast<double>(draws_seen));
  } else {
    out.edge_prob = edge_probs_at(D, p, causal, enumerated);
  }
  return out;
}

CandidateSet sample_latent_candidates(const CutNetworkFit& fit, int M, Rng& rng) {
  if (M < 1) throw std::invalid_argument("candidate sampling: M must be positive");
  const std::size_t slots = fit.edge_prob.size();
  int n = static_cast<int>(std::llround((1.0 + std::sqrt(1.0 + 8.0 * slots)) / 2.0));
  if (n < 2 || num_edge_slots(n) != slots)
    throw std::invalid_argument("candidate sampling: edge probabilities do not "
                                "match any node count");
  for (double pe : fit.edge_prob)
    if (!(pe > 0.0 && pe < 1.0))
      throw std::invalid_argument(
          "candidate sampling: edge probabilities must lie in (0,1)");

  CandidateSet out;
  out.nets.reserve(M);
  out.logprob.reserve(M);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int m = 0; m < M; ++m) {
    SymmetricBinaryNetwork A(n);
    double lp = 0.0;
    for (std::size_t e = 0; e < slots; ++e) {
      bool a = unif(rng) < fit.edge_prob[e];
      A.set_bit(e, a);
      lp += a ? std::log(fit.edge_prob[e]) : std::log1p(-fit.edge_prob[e]);
    }
    out.nets.push_back(std::move(A));
    out.logprob.push_back(lp);
    if (out.argmax < 0 || lp > out.logprob[out.argmax]) out.argmax = m;
  }
  return out;
}

std::vector<double> plugin_exposures(const std::vector<SymmetricBinaryNetwork>& nets,
                                     const std::vector<std::uint8_t>& Z,
                                     ExposureKind kind) {
  if (nets.empty())
    throw std::invalid_argument("plug-in exposures: no candidate networks");
  const int n = nets.front().n();
  if (static_cast<int>(Z.size()) != n)
    throw std::invalid_argument("plug-in exposures: treatment vector size mismatch");
  std::vector<double> acc(n, 0.0);
  for (const auto& net : nets) {
    if (net.n() != n)
      throw std::invalid_argument("plug-in exposures: candidate size mismatch");
    auto phi = exposures(net, Z, kind);
    for (int i = 0; i < n; ++i) acc[i] += phi[i];
  }
  for (int i = 0; i < n; ++i) acc[i] /= static_cast<double>(nets.size());
  return acc;
}

OutcomeFit fit_outcome_plugin(const Dataset& D, Scenario sc, const PriorSpec& prior,
                              const CutConfig& cfg, const ParamBlock& start,
                              const std::vector<double>& phi_hat,
                              const SymmetricBinaryNetwork& A0, Rng& rng) {
  OutcomeFit out;
  out.params = start;
  ParamBlock& p = out.params;
  if (static_cast<int>(phi_hat.size()) != D.n)
    throw std::invalid_argument("outcome module: exposure vector size mismatch");
  if (A0.n() != D.n)
    throw std::invalid_argument("outcome module: network size mismatch");

  validate_frozen(p, cfg);
  auto scal = filter_groups(collect_theta(p, /*sample_v=*/false),
                            {ParamGroup::Treatment, ParamGroup::Outcome});
  const bool latent_z = latent_treatment(sc);
  auto ll = [&D, &phi_hat, &A0, latent_z](const ParamBlock& q) {
    double s = loglik_outcome_given_exposure(D, phi_hat, q.outcome);
    if (latent_z) s += loglik_treatment(D, A0, q.treatment);
    return s;
  };
  out.rank_deficient = design_rank_deficient(D, phi_hat, p.outcome);

  auto fit = rw_fit(p, scal, prior, cfg, ll, nullptr, "outcome module", rng);
  out.summary = std::move(fit.summary);
  out.scalar_names = std::move(fit.scalar_names);
  out.draws = std::move(fit.draws);
  out.block_names = std::move(fit.block_names);
  out.block_accept = std::move(fit.block_accept);
  return out;
}

RefineResult lip_refine(const SymmetricBinaryNetwork& A0, const ModelContext& ctx,
                        int steps, int K, LipMode mode, Rng& rng) {
  if (steps < 0)
    throw std::invalid_argument("refinement: steps must be nonnegative");
  RefineResult out;
  out.a = A0;
  double lp = conditional_logpost_A(A0, ctx);
  if (!std::isfinite(lp))
    throw std::invalid_argument(
        "refinement: starting network has zero posterior probability");
  out.trace.reserve(steps + 1);
  out.trace.push_back(lp);
  if (steps == 0) return out;

  LipConfig lc;
  lc.K = K;
  lc.mode = mode;
  long accepted = 0;
  for (int t = 0; t < steps; ++t) {
    auto [next, rec] = lip_update(out.a, ctx, lc, rng);
    out.a = std::move(next);
    if (rec.accepted) {
      lp += rec.delta;
      ++accepted;
    }
    out.trace.push_back(lp);
  }
  out.accept_rate = static_cast<double>(accepted) / steps;
  return out;
}

InitState initialize(const Dataset& D, Scenario sc, const PriorSpec& prior,
                     const CutConfig& cfg, const ParamBlock& start, Rng& rng) {
  InitState st;
  st.network_fit = fit_network_module(D, sc, prior, cfg, start, rng);
  st.candidates = sample_latent_candidates(st.network_fit, cfg.M, rng);
  st.a0_cut = st.candidates.nets[st.candidates.argmax];

  auto phi = plugin_exposures(st.candidates.nets, D.Z, start.outcome.exposure);
  st.outcome_fit = fit_outcome_plugin(D, sc, prior, cfg, st.network_fit.params, phi,
                                      st.a0_cut, rng);
  st.theta0 = st.outcome_fit.params;

  ModelContext ctx;
  ctx.data = &D;
  ctx.scenario = sc;
  ctx.p = st.theta0;
  st.refine = lip_refine(st.a0_cut, ctx, cfg.refine_steps, cfg.refine_k,
                         cfg.refine_mode, rng);
  st.a0 = st.refine.a;

  auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  std::ostringstream line;
  line << "network module: " << st.network_fit.summary.size()
       << " scalars, mean block acceptance "
       << mean_of(st.network_fit.block_accept);
  st.provenance.push_back(line.str());
  line.str("");
  line << "candidates: selected " << st.candidates.argmax + 1 << " of " << cfg.M
       << ", log-probability " << st.candidates.logprob[st.candidates.argmax];
  st.provenance.push_back(line.str());
  line.str("");
  line << "outcome module: " << st.outcome_fit.summary.size()
       << " scalars, mean block acceptance "
       << mean_of(st.outcome_fit.block_accept)
       << (st.outcome_fit.rank_deficient ? ", rank-deficient design" : "");
  st.provenance.push_back(line.str());
  line.str("");
  line << "refinement: " << cfg.refine_steps << " steps, log-posterior "
       << st.refine.trace.front() << " -> " << st.refine.trace.back()
       << ", acceptance " << st.refine.accept_rate;
  st.provenance.push_back(line.str());
  return st;
}

void write_init_state(std::ostream& os, const InitState& st) {
  nlohmann::json j;
  j["init"] = true;
  j["n"] = st.a0.n();
  nlohmann::json th = nlohmann::json::object();
  for (const auto& [name, v] : flatten_theta(st.theta0, !st.theta0.V.empty()))
    th[name] = v;
  j["theta"] = std::move(th);
  j["astar"] = network_to_hex(st.a0);
  j["astar_cut"] = network_to_hex(st.a0_cut);
  j["provenance"] = st.provenance;
  os << j.dump() << '\n';
}

InitState read_init_state(std::istream& is, const ParamBlock& shape) {
  std::string line;
  if (!std::getline(is, line))
    throw std::invalid_argument("initialization record: empty stream");
  auto j = nlohmann::json::parse(line);
  for (const char* key : {"init", "n", "theta", "astar", "astar_cut"})
    if (!j.contains(key))
      throw std::invalid_argument(std::string("initialization record: missing ") + key);
  InitState st;
  st.theta0 = shape;
  const int n = j["n"].get<int>();
  st.a0 = network_from_hex(n, j["astar"].get<std::string>());
  st.a0_cut = network_from_hex(n, j["astar_cut"].get<std::string>());
  auto scal = collect_theta(st.theta0, !st.theta0.V.empty());
  const auto& th = j["theta"];
  if (th.size() != scal.size())
    throw std::invalid_argument(
        "initialization record: parameter set does not match the block");
  for (const auto& s : scal) {
    if (!th.contains(s.name))
      throw std::invalid_argument("initialization record: missing parameter " +
                                  s.name);
    *s.ptr = th[s.name].get<double>();
  }
  if (j.contains("provenance"))
    st.provenance = j["provenance"].get<std::vector<std::string>>();
  return st;
}

}  // namespace proxnet
