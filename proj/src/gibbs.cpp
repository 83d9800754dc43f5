#include "proxnet/gibbs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "proxnet/dists.hpp"

namespace proxnet {

double transform_forward(ParamTransform tf, double x) {
  switch (tf) {
    case ParamTransform::Identity: return x;
    case ParamTransform::Log: return std::log(x);
    case ParamTransform::Logit: return logit(x);
  }
  throw std::logic_error("unreachable");
}

double transform_inverse(ParamTransform tf, double u) {
  switch (tf) {
    case ParamTransform::Identity: return u;
    case ParamTransform::Log: return std::exp(u);
    case ParamTransform::Logit: return sigmoid(u);
  }
  throw std::logic_error("unreachable");
}

double scalar_prior_logp(const ThetaScalar& s, const ParamBlock& p,
                         const PriorSpec& ps) {
  double x = *s.ptr;
  switch (s.prior) {
    case ParamPrior::Coef:
      return log_normal_pdf(transform_forward(s.tf, x), 0.0, ps.coef_sd);
    case ParamPrior::Scale:
      // HalfNormal density on the scale plus the log-transform Jacobian.
      return log_half_normal_pdf(x, ps.sigma_scale) + std::log(x);
    case ParamPrior::UnitNormal:
      return log_normal_pdf(x, 0.0, 1.0);
    case ParamPrior::HierGamma: {
      if (!p.hyper)
        throw std::invalid_argument("hierarchical coefficient needs hyperparameters");
      double mu = s.hier_coef == 0 ? p.hyper->mu0 : p.hyper->mu1;
      double sd = s.hier_coef == 0 ? p.hyper->sigma0 : p.hyper->sigma1;
      return log_normal_pdf(x, mu, sd);
    }
  }
  throw std::logic_error("unreachable");
}

namespace {

bool uses_latent_treatment(Scenario sc) {
  return sc == Scenario::CausalLatentZ || sc == Scenario::NoncausalLatentZ;
}

}  // namespace

std::vector<ThetaScalar> collect_theta(ParamBlock& p, bool sample_v) {
  using T = ParamTransform;
  using P = ParamPrior;
  using G = ParamGroup;
  std::vector<ThetaScalar> out;
  auto one = [&](std::string name, G g, int gi, T tf, P pr, double* ptr,
                 int hier = -1) {
    out.push_back(ThetaScalar{name, name, g, gi, tf, pr, hier, ptr});
  };

  const bool hier = p.hyper.has_value();
  if (auto* er = std::get_if<ErdosRenyiPrior>(&p.prior)) {
    one("prior.theta", G::NetPrior, -1, T::Logit, P::Coef, &er->theta);
  } else if (auto* le = std::get_if<LogisticEdgePrior>(&p.prior)) {
    one("prior.t0", G::NetPrior, -1, T::Identity, P::Coef, &le->t0);
    if (le->use_x1) one("prior.t1", G::NetPrior, -1, T::Identity, P::Coef, &le->t1);
    one("prior.t2", G::NetPrior, -1, T::Identity, P::Coef, &le->t2);
  } else {
    // the latent layer shares the layer-coefficient hierarchy when one is set
    auto& ls = std::get<LatentSpacePrior>(p.prior);
    one("prior.intercept", G::NetPrior, -1, T::Identity,
        hier ? P::HierGamma : P::Coef, &ls.intercept, hier ? 0 : -1);
    one("prior.log_scale", G::NetPrior, -1, T::Identity,
        hier ? P::HierGamma : P::Coef, &ls.log_scale, hier ? 1 : -1);
  }
  for (std::size_t b = 0; b < p.proxies.size(); ++b) {
    std::string pre = "proxy" + std::to_string(b) + ".";
    int bi = static_cast<int>(b);
    if (auto* rn = std::get_if<RandomNoiseProxy>(&p.proxies[b])) {
      one(pre + "gamma0", G::Proxy, bi, T::Logit, P::Coef, &rn->gamma0);
      one(pre + "gamma1", G::Proxy, bi, T::Logit, P::Coef, &rn->gamma1);
    } else if (auto* cc = std::get_if<CrossClusterProxy>(&p.proxies[b])) {
      one(pre + "gamma0", G::Proxy, bi, T::Logit, P::Coef, &cc->gamma0);
      one(pre + "gamma1", G::Proxy, bi, T::Logit, P::Coef, &cc->gamma1);
    } else if (auto* dl = std::get_if<DifferentialLogitProxy>(&p.proxies[b])) {
      one(pre + "g0", G::Proxy, bi, T::Identity, P::Coef, &dl->g0);
      one(pre + "g1", G::Proxy, bi, T::Identity, P::Coef, &dl->g1);
      if (dl->use_x1) one(pre + "g2", G::Proxy, bi, T::Identity, P::Coef, &dl->g2);
      one(pre + "g3", G::Proxy, bi, T::Identity, P::Coef, &dl->g3);
    } else if (auto* lsm = std::get_if<LsmLayerProxy>(&p.proxies[b])) {
      one(pre + "intercept", G::Proxy, bi, T::Identity,
          hier ? P::HierGamma : P::Coef, &lsm->intercept, hier ? 0 : -1);
      one(pre + "log_scale", G::Proxy, bi, T::Identity,
          hier ? P::HierGamma : P::Coef, &lsm->log_scale, hier ? 1 : -1);
    }
    // censoring has a fixed integer cutoff, nothing to sample
  }

  if (auto* iid = std::get_if<IidBernoulliTreatment>(&p.treatment)) {
    one("treat.p_z", G::Treatment, -1, T::Logit, P::Coef, &iid->p_z);
  } else if (auto* dp = std::get_if<DegreeProportionalTreatment>(&p.treatment)) {
    one("treat.p_z", G::Treatment, -1, T::Log, P::Scale, &dp->p_z);
  }

  one("out.eta0", G::Outcome, -1, T::Identity, P::Coef, &p.outcome.eta0);
  one("out.eta1", G::Outcome, -1, T::Identity, P::Coef, &p.outcome.eta1);
  one("out.eta2", G::Outcome, -1, T::Identity, P::Coef, &p.outcome.eta2);
  for (std::size_t k = 0; k < p.outcome.eta_x.size(); ++k)
    one("out.eta_x" + std::to_string(k), G::Outcome, -1, T::Identity, P::Coef,
        &p.outcome.eta_x[k]);
  one("out.sigma", G::Outcome, -1, T::Log, P::Scale, &p.outcome.sigma);

  if (sample_v) {
    if (p.V.size() % 2 != 0)
      throw std::invalid_argument("latent positions must be n x 2");
    for (std::size_t i = 0; i * 2 < p.V.size(); ++i) {
      std::string blk = "V[" + std::to_string(i) + "]";
      int gi = static_cast<int>(i);
      out.push_back(ThetaScalar{blk + ".x", blk, G::LatentPosition, gi, T::Identity,
                                P::UnitNormal, -1, &p.V[2 * i]});
      out.push_back(ThetaScalar{blk + ".y", blk, G::LatentPosition, gi, T::Identity,
                                P::UnitNormal, -1, &p.V[2 * i + 1]});
    }
  }

  if (p.hyper) {
    one("hyper.mu0", G::Hyper, -1, T::Identity, P::Coef, &p.hyper->mu0);
    one("hyper.sigma0", G::Hyper, -1, T::Log, P::Scale, &p.hyper->sigma0);
    one("hyper.mu1", G::Hyper, -1, T::Identity, P::Coef, &p.hyper->mu1);
    one("hyper.sigma1", G::Hyper, -1, T::Log, P::Scale, &p.hyper->sigma1);
  }
  return out;
}

std::vector<std::pair<std::string, double>> flatten_theta(const ParamBlock& p,
                                                          bool sample_v) {
  auto scal = collect_theta(const_cast<ParamBlock&>(p), sample_v);
  std::vector<std::pair<std::string, double>> out;
  out.reserve(scal.size());
  for (const auto& s : scal) out.emplace_back(s.name, *s.ptr);
  return out;
}

double logpost_theta(const ParamBlock& p, const SymmetricBinaryNetwork& A,
                     const Dataset& D, Scenario sc, const PriorSpec& prior,
                     bool sample_v) {
  if (p.proxies.size() != D.proxies.size())
    throw std::invalid_argument("logpost: proxy model count mismatch");
  double lp = loglik_outcome(D, A, p.outcome);
  if (uses_latent_treatment(sc)) lp += loglik_treatment(D, A, p.treatment);
  for (std::size_t b = 0; b < p.proxies.size(); ++b)
    lp += loglik_proxy(D.proxies[b], A, D, p.proxies[b], &p.V);
  lp += logprior_network(A, D, p.prior, &p.V);
  if (std::isinf(lp)) return kNegInf;
  auto scal = collect_theta(const_cast<ParamBlock&>(p), sample_v);
  for (const auto& s : scal) lp += scalar_prior_logp(s, p, prior);
  return lp;
}

double block_logpost(const ParamBlock& p, const SymmetricBinaryNetwork& A,
                     const Dataset& D, Scenario sc, const PriorSpec& prior,
                     const std::vector<ThetaScalar>& scalars, int lo, int hi) {
  if (lo < 0 || hi <= lo || hi > static_cast<int>(scalars.size()))
    throw std::invalid_argument("block_logpost: bad span");
  const ThetaScalar& s0 = scalars[lo];
  double lp = 0.0;
  switch (s0.group) {
    case ParamGroup::NetPrior:
      lp += logprior_network(A, D, p.prior, &p.V);
      break;
    case ParamGroup::Proxy:
      lp += loglik_proxy(D.proxies[s0.group_index], A, D, p.proxies[s0.group_index],
                         &p.V);
      break;
    case ParamGroup::Treatment:
      if (uses_latent_treatment(sc)) lp += loglik_treatment(D, A, p.treatment);
      break;
    case ParamGroup::Outcome:
      lp += loglik_outcome(D, A, p.outcome);
      break;
    case ParamGroup::LatentPosition: {
      // only terms on edges incident to this node involve its position
      const int i = s0.group_index;
      const bool lat_prior = std::holds_alternative<LatentSpacePrior>(p.prior);
      for (int j = 0; j < D.n; ++j) {
        if (j == i) continue;
        if (lat_prior)
          lp += bernoulli_loglik_logit(A.get(i, j),
                                       prior_edge_logit(D, p.prior, &p.V, i, j));
        for (std::size_t b = 0; b < p.proxies.size(); ++b)
          if (const auto* lsm = std::get_if<LsmLayerProxy>(&p.proxies[b]))
            lp += bernoulli_loglik_logit(D.proxies[b].get(i, j),
                                         lsm_edge_logit(*lsm, p.V, i, j));
      }
      break;
    }
    case ParamGroup::Hyper:
      // moving a hyperparameter moves every layer coefficient's prior term
      for (const auto& s : scalars)
        if (s.prior == ParamPrior::HierGamma) lp += scalar_prior_logp(s, p, prior);
      break;
  }
  for (int k = lo; k < hi; ++k) lp += scalar_prior_logp(scalars[k], p, prior);
  return lp;
}

void sample_params_from_prior(ParamBlock& p, const PriorSpec& prior, bool sample_v,
                              Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (p.hyper) {
    p.hyper->mu0 = prior.coef_sd * gauss(rng);
    p.hyper->sigma0 = std::abs(prior.sigma_scale * gauss(rng));
    p.hyper->mu1 = prior.coef_sd * gauss(rng);
    p.hyper->sigma1 = std::abs(prior.sigma_scale * gauss(rng));
  }
  auto scal = collect_theta(p, sample_v);
  for (auto& s : scal) {
    if (s.group == ParamGroup::Hyper) continue;  // drawn above
    switch (s.prior) {
      case ParamPrior::Coef:
        *s.ptr = transform_inverse(s.tf, prior.coef_sd * gauss(rng));
        break;
      case ParamPrior::Scale:
        *s.ptr = std::abs(prior.sigma_scale * gauss(rng));
        break;
      case ParamPrior::UnitNormal:
        *s.ptr = gauss(rng);
        break;
      case ParamPrior::HierGamma: {
        double mu = s.hier_coef == 0 ? p.hyper->mu0 : p.hyper->mu1;
        double sd = s.hier_coef == 0 ? p.hyper->sigma0 : p.hyper->sigma1;
        *s.ptr = mu + sd * gauss(rng);
        break;
      }
    }
  }
}

// ----- continuous kernel -----

ContinuousKernel::ContinuousKernel(const Dataset& D, Scenario sc,
                                   const PriorSpec& prior, const ParamBlock& shape,
                                   const GibbsConfig& cfg)
    : data_(&D),
      sc_(sc),
      prior_(prior),
      sample_v_(cfg.sample_v),
      target_(0.44),
      gain_(1.0) {
  if (!(cfg.init_step > 0.0))
    throw std::invalid_argument("continuous kernel: step must be positive");
  ParamBlock scratch = shape;
  auto scal = collect_theta(scratch, sample_v_);
  if (scal.empty()) throw std::invalid_argument("continuous kernel: nothing to sample");
  n_scalars_ = scal.size();
  int lo = 0;
  for (int k = 1; k <= static_cast<int>(scal.size()); ++k) {
    if (k == static_cast<int>(scal.size()) || scal[k].block != scal[lo].block) {
      names_.push_back(scal[lo].block);
      span_.emplace_back(lo, k);
      lo = k;
    }
  }
  frozen_.assign(names_.size(), 0);
  for (const auto& f : cfg.frozen) {
    bool hit = false;
    for (std::size_t b = 0; b < names_.size(); ++b)
      if (f == names_[b] || (f == "V" && names_[b].rfind("V[", 0) == 0)) {
        frozen_[b] = 1;
        hit = true;
      }
    if (!hit)
      throw std::invalid_argument("continuous kernel: unknown frozen block " + f);
  }
  step_log_.assign(names_.size(), std::log(cfg.init_step));
  adapt_n_.assign(names_.size(), 0);
  acc_.assign(names_.size(), 0);
  att_.assign(names_.size(), 0);
}

void ContinuousKernel::update(ParamBlock& theta, const SymmetricBinaryNetwork& A,
                              Rng& rng, bool adapt_now) {
  auto scal = collect_theta(theta, sample_v_);
  if (scal.size() != n_scalars_)
    throw std::invalid_argument("continuous kernel: parameter structure changed");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> old;
  for (std::size_t b = 0; b < span_.size(); ++b) {
    if (frozen_[b]) continue;
    auto [lo, hi] = span_[b];
    double cur = block_logpost(theta, A, *data_, sc_, prior_, scal, lo, hi);
    double step = std::exp(step_log_[b]);
    old.clear();
    for (int k = lo; k < hi; ++k) {
      old.push_back(*scal[k].ptr);
      double u = transform_forward(scal[k].tf, *scal[k].ptr) + step * gauss(rng);
      *scal[k].ptr = transform_inverse(scal[k].tf, u);
    }
    double prop = block_logpost(theta, A, *data_, sc_, prior_, scal, lo, hi);
    double la = prop - cur;
    double alpha = std::isnan(la) ? 0.0 : (la >= 0.0 ? 1.0 : std::exp(la));
    ++att_[b];
    if (unif(rng) < alpha) {
      ++acc_[b];
    } else {
      for (int k = lo; k < hi; ++k) *scal[k].ptr = old[k - lo];
    }
    if (adapt_now) {
      double g = gain_ / std::pow(static_cast<double>(++adapt_n_[b]), 0.6);
      step_log_[b] = std::clamp(step_log_[b] + g * (alpha - target_), -12.0, 4.0);
    }
  }
}

std::vector<double> ContinuousKernel::acceptance_rates() const {
  std::vector<double> out(names_.size(), 0.0);
  for (std::size_t b = 0; b < names_.size(); ++b)
    if (att_[b] > 0) out[b] = static_cast<double>(acc_[b]) / att_[b];
  return out;
}

void ContinuousKernel::reset_stats() {
  std::fill(acc_.begin(), acc_.end(), 0);
  std::fill(att_.begin(), att_.end(), 0);
}

// ----- chain runner -----

namespace {

void validate_config(const GibbsConfig& cfg) {
  if (cfg.T < 1) throw std::invalid_argument("gibbs: T must be positive");
  if (cfg.warmup < 0 || cfg.warmup >= cfg.T)
    throw std::invalid_argument("gibbs: warmup must be in [0, T)");
  if (cfg.L < 0) throw std::invalid_argument("gibbs: L must be nonnegative");
  if (cfg.K < 1) throw std::invalid_argument("gibbs: K must be positive");
  if (cfg.chains < 1) throw std::invalid_argument("gibbs: need at least one chain");
  if (!(cfg.init_step > 0.0))
    throw std::invalid_argument("gibbs: step must be positive");
}

}  // namespace

void gibbs_sweep(SymmetricBinaryNetwork& A, ModelContext& work,
                 ContinuousKernel& kernel, const GibbsConfig& cfg, Rng& rng,
                 bool adapt_now, int* lip_accepts) {
  LipConfig lip;
  lip.K = cfg.K;
  lip.mode = cfg.mode;
  for (int l = 0; l < cfg.L; ++l) {
    auto [next, rec] = lip_update(A, work, lip, rng);
    if (rec.accepted && lip_accepts != nullptr) ++*lip_accepts;
    A = std::move(next);
  }
  kernel.update(work.p, A, rng, adapt_now);
}

ChainResult run_chain(const Dataset& D, Scenario sc, const PriorSpec& prior,
                      const GibbsConfig& cfg, const SymmetricBinaryNetwork& A0,
                      const ParamBlock& theta0, Rng& rng, std::ostream* log,
                      int chain_id, const DrawMonitor& monitor) {
  validate_config(cfg);
  if (A0.n() != D.n) throw std::invalid_argument("gibbs: network size mismatch");
  ModelContext work;
  work.data = &D;
  work.scenario = sc;
  work.p = theta0;

  for (const auto& [name, v] : flatten_theta(work.p, cfg.sample_v))
    if (!std::isfinite(v))
      throw std::invalid_argument("gibbs: non-finite initial parameter " + name);
  if (cfg.L > 0 && !std::isfinite(conditional_logpost_A(A0, work)))
    throw std::invalid_argument("gibbs: initial network has zero posterior probability");

  SymmetricBinaryNetwork A = A0;
  ContinuousKernel kernel(D, sc, prior, theta0, cfg);

  ChainResult out;
  for (const auto& [name, v] : flatten_theta(theta0, cfg.sample_v))
    out.scalar_names.push_back(name);
  out.scalar_names.push_back("edge_count");
  out.block_names = kernel.block_names();

  long lip_acc = 0, lip_att = 0;
  auto clock0 = std::chrono::steady_clock::now();
  for (int t = 0; t < cfg.T; ++t) {
    const bool warm = t < cfg.warmup;
    if (t == cfg.warmup) {
      kernel.reset_stats();
      lip_acc = lip_att = 0;
    }
    int acc_this = 0;
    gibbs_sweep(A, work, kernel, cfg, rng, cfg.adapt && warm, &acc_this);
    lip_acc += acc_this;
    lip_att += cfg.L;

    auto vals = flatten_theta(work.p, cfg.sample_v);
    for (const auto& [name, v] : vals)
      if (!std::isfinite(v)) {
        if (log != nullptr)
          *log << nlohmann::json{{"chain", chain_id},
                                 {"iter", t},
                                 {"error", "non-finite state: " + name}}
                      .dump()
               << '\n';
        throw std::runtime_error("gibbs: chain " + std::to_string(chain_id) +
                                 " hit a non-finite state at iteration " +
                                 std::to_string(t));
      }

    std::vector<std::pair<std::string, double>> mon;
    if (!warm) {
      out.draws.push_back(PosteriorDraw{A, work.p});
      if (monitor) {
        mon = monitor(out.draws.back());
        if (out.monitor_names.empty())
          for (const auto& [mn, mv] : mon) out.monitor_names.push_back(mn);
        std::vector<double> row;
        row.reserve(mon.size());
        for (const auto& [mn, mv] : mon) row.push_back(mv);
        out.monitor_values.push_back(std::move(row));
      }
    }

    if (log != nullptr) {
      nlohmann::json j;
      j["chain"] = chain_id;
      j["iter"] = t;
      j["phase"] = warm ? "warmup" : "sample";
      j["lip_accepts"] = acc_this;
      j["edges"] = A.edge_count();
      nlohmann::json th = nlohmann::json::object();
      for (const auto& [name, v] : vals) th[name] = v;
      j["theta"] = std::move(th);
      if (!mon.empty()) {
        nlohmann::json jm = nlohmann::json::object();
        for (const auto& [mn, mv] : mon) jm[mn] = mv;
        j["monitor"] = std::move(jm);
      }
      if (!warm && cfg.astar_log_every > 0 &&
          (t - cfg.warmup) % cfg.astar_log_every == 0)
        j["astar"] = network_to_hex(A);
      *log << j.dump() << '\n';
    }
  }
  auto clock1 = std::chrono::steady_clock::now();
  out.seconds_per_iteration =
      std::chrono::duration<double>(clock1 - clock0).count() / cfg.T;
  out.lip_accept = lip_att > 0 ? static_cast<double>(lip_acc) / lip_att : 0.0;
  out.block_accept = kernel.acceptance_rates();
  return out;
}

MultiChainResult run_chains(const Dataset& D, Scenario sc, const PriorSpec& prior,
                            const GibbsConfig& cfg, const SymmetricBinaryNetwork& A0,
                            const ParamBlock& theta0, std::ostream* log,
                            const DrawMonitor& monitor) {
  validate_config(cfg);
  MultiChainResult out;
  std::vector<std::string> failures;
  for (int c = 0; c < cfg.chains; ++c) {
    Rng rng(cfg.seed + static_cast<std::uint64_t>(c));
    try {
      out.chains.push_back(
          run_chain(D, sc, prior, cfg, A0, theta0, rng, log, c, monitor));
    } catch (const std::exception& ex) {
      failures.push_back("chain " + std::to_string(c) + ": " + ex.what());
    }
  }
  if (!failures.empty()) {
    std::string msg = "gibbs: chain failures:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw std::runtime_error(msg);
  }

  std::vector<std::string> names = out.chains.front().scalar_names;
  for (const auto& mn : out.chains.front().monitor_names)
    names.push_back("monitor." + mn);
  std::vector<std::vector<std::vector<double>>> cube(out.chains.size());
  for (std::size_t c = 0; c < out.chains.size(); ++c) {
    const auto& ch = out.chains[c];
    cube[c].reserve(ch.draws.size());
    for (std::size_t t = 0; t < ch.draws.size(); ++t) {
      std::vector<double> row;
      row.reserve(names.size());
      for (const auto& [name, v] : flatten_theta(ch.draws[t].theta, cfg.sample_v))
        row.push_back(v);
      row.push_back(static_cast<double>(ch.draws[t].a_star.edge_count()));
      if (!ch.monitor_values.empty())
        for (double v : ch.monitor_values[t]) row.push_back(v);
      cube[c].push_back(std::move(row));
    }
  }
  out.diag = compute_diagnostics(cube, names);

  out.diag.block_names = out.chains.front().block_names;
  out.diag.block_accept.assign(out.diag.block_names.size(), 0.0);
  for (const auto& ch : out.chains) {
    out.diag.lip_accept += ch.lip_accept / out.chains.size();
    out.diag.seconds_per_iteration += ch.seconds_per_iteration / out.chains.size();
    for (std::size_t b = 0; b < ch.block_accept.size(); ++b)
      out.diag.block_accept[b] += ch.block_accept[b] / out.chains.size();
  }
  return out;
}

// ----- diagnostics -----

namespace {

// average ranks with ties, mapped through the normal quantile
std::vector<double> rank_normalize(const std::vector<double>& x) {
  const std::size_t S = x.size();
  std::vector<std::size_t> idx(S);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> z(S);
  std::size_t a = 0;
  while (a < S) {
    std::size_t b = a + 1;
    while (b < S && x[idx[b]] == x[idx[a]]) ++b;
    double rank = 0.5 * static_cast<double>(a + b - 1) + 1.0;
    double q = normal_quantile((rank - 0.375) / (static_cast<double>(S) + 0.25));
    for (std::size_t k = a; k < b; ++k) z[idx[k]] = q;
    a = b;
  }
  return z;
}

}  // namespace

Diagnostics compute_diagnostics(
    const std::vector<std::vector<std::vector<double>>>& draws,
    const std::vector<std::string>& names) {
  if (draws.empty()) throw std::invalid_argument("diagnostics: no chains");
  const std::size_t M = draws.size();
  const std::size_t T = draws[0].size();
  for (const auto& ch : draws)
    if (ch.size() != T) throw std::invalid_argument("diagnostics: unequal chain lengths");
  if (T < 8) throw std::invalid_argument("diagnostics: need at least 8 draws per chain");
  const std::size_t S = names.size();
  for (const auto& ch : draws)
    for (const auto& row : ch)
      if (row.size() != S)
        throw std::invalid_argument("diagnostics: row width does not match names");

  const std::size_t T2 = T / 2;
  const std::size_t MS = 2 * M;  // split chains
  const double total = static_cast<double>(MS * T2);

  Diagnostics out;
  std::vector<double> pooled(MS * T2);
  for (std::size_t s = 0; s < S; ++s) {
    ScalarDiagnostic d;
    d.name = names[s];
    for (std::size_t c = 0; c < M; ++c)
      for (std::size_t half = 0; half < 2; ++half)
        for (std::size_t t = 0; t < T2; ++t)
          pooled[(2 * c + half) * T2 + t] = draws[c][half * T2 + t][s];

    auto [mn, mx] = std::minmax_element(pooled.begin(), pooled.end());
    bool all_flat = true;
    for (std::size_t k = 0; k < MS && all_flat; ++k)
      for (std::size_t t = 1; t < T2; ++t)
        if (pooled[k * T2 + t] != pooled[k * T2]) {
          all_flat = false;
          break;
        }
    if (*mn == *mx || all_flat) {
      // no within-split variation, W is zero up to rounding noise
      d.constant = true;
      out.scalars.push_back(std::move(d));
      continue;
    }
    auto z = rank_normalize(pooled);

    std::vector<double> mean(MS, 0.0), var(MS, 0.0);
    for (std::size_t k = 0; k < MS; ++k) {
      for (std::size_t t = 0; t < T2; ++t) mean[k] += z[k * T2 + t];
      mean[k] /= static_cast<double>(T2);
      for (std::size_t t = 0; t < T2; ++t) {
        double e = z[k * T2 + t] - mean[k];
        var[k] += e * e;
      }
      var[k] /= static_cast<double>(T2 - 1);
    }
    double W = std::accumulate(var.begin(), var.end(), 0.0) / MS;
    if (W <= 0.0) {
      d.constant = true;  // every split is flat
      out.scalars.push_back(std::move(d));
      continue;
    }
    double gm = std::accumulate(mean.begin(), mean.end(), 0.0) / MS;
    double B = 0.0;
    for (double m : mean) B += (m - gm) * (m - gm);
    B /= static_cast<double>(MS - 1);  // variance of split means
    double var_plus = W * static_cast<double>(T2 - 1) / T2 + B;
    if (M >= 2) d.rhat = std::sqrt(var_plus / W);

    // Geyer initial-monotone pairwise sums of split-averaged autocorrelations
    auto mean_acov = [&](std::size_t lag) {
      double sum = 0.0;
      for (std::size_t k = 0; k < MS; ++k)
        for (std::size_t t = 0; t + lag < T2; ++t)
          sum += (z[k * T2 + t] - mean[k]) * (z[k * T2 + t + lag] - mean[k]);
      return sum / (static_cast<double>(MS) * T2);
    };
    double tau_sum = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0;; ++k) {
      std::size_t l0 = 2 * k, l1 = 2 * k + 1;
      if (l1 + 4 >= T2) break;
      double r0 = k == 0 ? 1.0 : 1.0 - (W - mean_acov(l0)) / var_plus;
      double r1 = 1.0 - (W - mean_acov(l1)) / var_plus;
      double pair = r0 + r1;
      if (pair <= 0.0) break;
      pair = std::min(pair, prev);
      prev = pair;
      tau_sum += pair;
    }
    double tau = std::max(-1.0 + 2.0 * tau_sum, 1.0 / std::log10(total + 10.0));
    d.ess = std::clamp(total / tau, 1.0, total);
    out.scalars.push_back(std::move(d));
  }
  return out;
}

// ----- network hex encoding -----

std::string network_to_hex(const SymmetricBinaryNetwork& A) {
  static const char* digits = "0123456789abcdef";
  const std::size_t m = A.edge_slots();
  const std::size_t nbytes = (m + 7) / 8;
  std::string out(2 * nbytes, '0');
  for (std::size_t k = 0; k < nbytes; ++k) {
    int byte = 0;
    for (int b = 0; b < 8; ++b) {
      std::size_t slot = 8 * k + b;
      if (slot < m && A.bit(slot)) byte |= 1 << b;
    }
    out[2 * k] = digits[byte >> 4];
    out[2 * k + 1] = digits[byte & 15];
  }
  return out;
}

SymmetricBinaryNetwork network_from_hex(int n, const std::string& hex) {
  SymmetricBinaryNetwork A(n);
  const std::size_t m = A.edge_slots();
  if (hex.size() != 2 * ((m + 7) / 8))
    throw std::invalid_argument("network hex: wrong length");
  auto val = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("network hex: bad digit");
  };
  for (std::size_t k = 0; k < hex.size() / 2; ++k) {
    int byte = (val(hex[2 * k]) << 4) | val(hex[2 * k + 1]);
    for (int b = 0; b < 8; ++b) {
      std::size_t slot = 8 * k + b;
      bool bit = (byte >> b) & 1;
      if (slot < m)
        A.set_bit(slot, bit);
      else if (bit)
        throw std::invalid_argument("network hex: stray bits");
    }
  }
  return A;
}

}  // namespace proxnet
