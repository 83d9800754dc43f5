#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "proxnet/dists.hpp"
#include "proxnet/lip.hpp"
#include "test_support.hpp"

using namespace proxnet;
using namespace testsup;

namespace {

double brute_delta(const SymmetricBinaryNetwork& A, const std::vector<EdgeIndex>& I,
                   const ModelContext& ctx) {
  return ll_diff(conditional_logpost_A(flip_entries(A, I), ctx),
                 conditional_logpost_A(A, ctx));
}

struct Problem {
  Dataset D;
  Scenario scenario;
  ParamBlock p;
};

// A fully loaded small instance; variants select exposure/treatment/proxies.
Problem make_problem(int n, unsigned seed, ExposureKind exposure, bool degree_treat,
                     bool censoring, Scenario scenario = Scenario::CausalLatentZ) {
  Rng rng(seed);
  Problem pr;
  pr.D = random_dataset(n, rng);
  pr.scenario = scenario;

  auto A_hint = random_network(n, 0.5, rng);
  if (censoring) {
    SymmetricBinaryNetwork obs(n);
    std::bernoulli_distribution keep(0.7);
    for (std::size_t e = 0; e < A_hint.edge_slots(); ++e)
      if (A_hint.bit(e) && keep(rng)) obs.set_bit(e, true);
    pr.D.proxies.push_back(obs);
    pr.p.proxies = {ProxyModel{CensoringProxy{2}}};
  } else {
    pr.D.proxies.push_back(random_network(n, 0.4, rng));
    pr.D.proxies.push_back(random_network(n, 0.5, rng));
    pr.p.proxies = {ProxyModel{RandomNoiseProxy{0.15, 0.85}},
                    ProxyModel{DifferentialLogitProxy{1.8, -1.5, 0.7, 0.4, true}}};
  }

  if (scenario == Scenario::NoncausalLatentZ || scenario == Scenario::NoncausalProxyZ) {
    pr.p.prior = LatentSpacePrior{0.4, -0.1};
    pr.p.proxies.assign(pr.D.proxies.size(), ProxyModel{LsmLayerProxy{0.2, 0.0}});
  } else {
    pr.p.prior = LogisticEdgePrior{-1.0, 0.4, 0.9, true};
  }
  pr.p.V.resize(2 * n);
  std::normal_distribution<double> gauss(0, 1);
  for (auto& v : pr.p.V) v = gauss(rng);

  if (degree_treat)
    pr.p.treatment = DegreeProportionalTreatment{0.9, std::nullopt};
  else
    pr.p.treatment = IidBernoulliTreatment{0.45};

  pr.p.outcome.eta0 = -0.8;
  pr.p.outcome.eta1 = 2.5;
  pr.p.outcome.eta2 = 1.3;
  pr.p.outcome.eta_x = {-0.5};
  pr.p.outcome.sigma = 1.2;
  pr.p.outcome.exposure = exposure;
  return pr;
}

ModelContext ctx_of(const Problem& pr) {
  ModelContext ctx;
  ctx.data = &pr.D;
  ctx.scenario = pr.scenario;
  ctx.p = pr.p;
  return ctx;
}

}  // namespace

TEST_CASE("exact deltas match two-evaluation oracle across contexts") {
  const int n = 6;
  std::vector<Problem> problems;
  problems.push_back(make_problem(n, 101, ExposureKind::WeightedDegree, true, false));
  problems.push_back(make_problem(n, 102, ExposureKind::UnweightedSum, false, false));
  problems.push_back(make_problem(n, 103, ExposureKind::Fraction, true, false));
  problems.push_back(make_problem(n, 104, ExposureKind::UnweightedSum, true, true));
  problems.push_back(make_problem(n, 105, ExposureKind::WeightedDegree, true, false,
                                  Scenario::NoncausalLatentZ));
  problems.push_back(make_problem(n, 106, ExposureKind::WeightedDegree, false, false,
                                  Scenario::NoncausalProxyZ));
  problems.push_back(make_problem(n, 107, ExposureKind::Fraction, false, false,
                                  Scenario::CausalProxyZ));

  Rng rng(7);
  for (const auto& pr : problems) {
    auto ctx = ctx_of(pr);
    auto A = random_network(n, 0.45, rng);
    // keep a low-degree unit so the fraction convention and clamps see action
    for (int j = 1; j < n; ++j) A.set(0, j, false);
    // the censoring likelihood needs a consistent state: observed implies true
    if (std::get_if<CensoringProxy>(&pr.p.proxies[0]))
      for (std::size_t e = 0; e < A.edge_slots(); ++e)
        if (pr.D.proxies[0].bit(e)) A.set_bit(e, true);

    for (int i = 0; i < n - 1; ++i)
      for (int j = i + 1; j < n; ++j) {
        EdgeIndex e{i, j};
        double got = conditional_delta_exact(A, {e}, ctx);
        double want = brute_delta(A, {e}, ctx);
        if (std::isinf(want))
          CHECK(got == want);
        else
          CHECK(got == doctest::Approx(want).epsilon(1e-9));
      }

    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int rep = 0; rep < 25; ++rep) {
      std::vector<EdgeIndex> I;
      while (I.size() < 3) {
        int i = pick(rng), j = pick(rng);
        if (i == j) continue;
        EdgeIndex e{std::min(i, j), std::max(i, j)};
        if (std::find(I.begin(), I.end(), e) == I.end()) I.push_back(e);
      }
      double got = conditional_delta_exact(A, I, ctx);
      double want = brute_delta(A, I, ctx);
      if (std::isinf(want))
        CHECK(got == want);
      else
        CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }

    CHECK(conditional_delta_exact(A, {}, ctx) == 0.0);
    CHECK_THROWS(conditional_delta_exact(A, {{0, 1}, {0, 1}}, ctx));
  }
}

TEST_CASE("delta_exact: flat target and antisymmetry") {
  Rng rng(61);
  const int n = 5;
  auto D = random_dataset(n, rng);
  ModelContext ctx;
  ctx.data = &D;
  ctx.scenario = Scenario::CausalLatentZ;
  ctx.p.prior = ErdosRenyiPrior{0.5};
  ctx.p.treatment = IidBernoulliTreatment{0.4};
  ctx.p.outcome.eta1 = 0.0;
  ctx.p.outcome.eta2 = 0.0;

  auto A = random_network(n, 0.5, rng);
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j) CHECK(delta_exact(A, {i, j}, ctx) == 0.0);

  auto pr = make_problem(n, 62, ExposureKind::WeightedDegree, true, false);
  auto c2 = ctx_of(pr);
  auto B = random_network(n, 0.5, rng);
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j) {
      EdgeIndex e{i, j};
      double fwd = delta_exact(B, e, c2);
      double bwd = delta_exact(flip_entries(B, {e}), e, c2);
      CHECK(fwd == doctest::Approx(-bwd).epsilon(1e-9));
    }
}

TEST_CASE("gradient deltas are exact on linear contexts") {
  Rng rng(67);
  const int n = 6;
  auto pr = make_problem(n, 68, ExposureKind::UnweightedSum, false, false);
  pr.p.outcome.eta2 = 0.0;  // outcome constant in A; all remaining terms linear
  auto ctx = ctx_of(pr);
  auto A = random_network(n, 0.5, rng);
  auto approx = delta_approx_all(A, ctx);
  auto exact = delta_exact_all(A, ctx);
  for (std::size_t e = 0; e < approx.size(); ++e)
    CHECK(approx[e] == doctest::Approx(exact[e]).epsilon(1e-12));
}

TEST_CASE("gradient deviation on outcome-bearing contexts follows the quadratic term") {
  Rng rng(71);
  const int n = 7;
  auto pr = make_problem(n, 72, ExposureKind::UnweightedSum, false, false);
  auto ctx = ctx_of(pr);
  const auto& om = pr.p.outcome;
  auto A = random_network(n, 0.5, rng);
  auto approx = delta_approx_all(A, ctx);
  auto exact = delta_exact_all(A, ctx);
  std::size_t e = 0;
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j, ++e) {
      double want = -om.eta2 * om.eta2 * (pr.D.Z[i] + pr.D.Z[j]) /
                    (2.0 * om.sigma * om.sigma);
      CHECK(exact[e] - approx[e] == doctest::Approx(want).epsilon(1e-8));
    }
}

TEST_CASE("gradient proposal is near-calibrated on a synthetic instance (n=50)") {
  Rng rng(73);
  ScmConfig cfg;
  cfg.n = 50;
  cfg.gamma2 = 2.0;
  auto sim = simulate_scm(rng, cfg);
  ModelContext ctx;
  ctx.data = &sim.data;
  ctx.scenario = Scenario::CausalLatentZ;
  ctx.p = sim.truth;

  auto approx = delta_approx_all(sim.a_star, ctx);
  auto exact = delta_exact_all(sim.a_star, ctx);

  // slope of log-proposal agreement (both on the half-delta scale)
  double mx = 0, my = 0;
  for (std::size_t e = 0; e < exact.size(); ++e) {
    mx += 0.5 * exact[e];
    my += 0.5 * approx[e];
  }
  mx /= exact.size();
  my /= exact.size();
  double sxy = 0, sxx = 0;
  for (std::size_t e = 0; e < exact.size(); ++e) {
    sxy += (0.5 * exact[e] - mx) * (0.5 * approx[e] - my);
    sxx += (0.5 * exact[e] - mx) * (0.5 * exact[e] - mx);
  }
  double slope = sxy / sxx;
  CHECK(slope == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("gumbel_topk: support, softmax frequencies, sequential law") {
  Rng rng(79);

  std::vector<double> w4 = {0.1, -0.3, 0.7, 0.0};
  auto all = gumbel_topk(w4, 4, rng);
  CHECK(all.size() == 4);
  auto sorted = all;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3});

  CHECK_THROWS(gumbel_topk(w4, 5, rng));
  CHECK_THROWS(gumbel_topk(w4, 0, rng));
  CHECK_THROWS(gumbel_topk({0.0, std::nan("")}, 1, rng));

  {  // K=1 pick frequency for weights (0, log 3) is 3/4
    std::vector<double> w = {0.0, std::log(3.0)};
    int hits = 0;
    const int reps = 100000;
    for (int r = 0; r < reps; ++r) hits += gumbel_topk(w, 1, rng)[0] == 1;
    CHECK(static_cast<double>(hits) / reps == doctest::Approx(0.75).epsilon(0.01));
  }

  {  // chi-square goodness of fit against the softmax over three weights
    std::vector<double> w = {0.2, -0.5, 1.0};
    double z = std::exp(0.2) + std::exp(-0.5) + std::exp(1.0);
    std::vector<double> p = {std::exp(0.2) / z, std::exp(-0.5) / z, std::exp(1.0) / z};
    std::vector<int> c(3, 0);
    const int reps = 100000;
    for (int r = 0; r < reps; ++r) ++c[gumbel_topk(w, 1, rng)[0]];
    double chi2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      double exp_k = reps * p[k];
      chi2 += (c[k] - exp_k) * (c[k] - exp_k) / exp_k;
    }
    CHECK(chi2 < 16.0);  // df=2; 0.999 quantile is 13.8
  }

  {  // dominant weight always chosen first
    std::vector<double> w = {0.0, 50.0, -1.0};
    for (int r = 0; r < 1000; ++r) CHECK(gumbel_topk(w, 2, rng)[0] == 1);
  }

  {  // K=2 ordered pairs follow sequential sampling without replacement
    std::vector<double> logw = {std::log(1.0), std::log(2.0), std::log(3.0)};
    std::vector<double> p = {1.0 / 6, 2.0 / 6, 3.0 / 6};
    std::vector<std::vector<int>> c(3, std::vector<int>(3, 0));
    const int reps = 200000;
    for (int r = 0; r < reps; ++r) {
      auto s = gumbel_topk(logw, 2, rng);
      ++c[s[0]][s[1]];
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        if (a == b) {
          CHECK(c[a][b] == 0);
          continue;
        }
        double want = p[a] * p[b] / (1.0 - p[a]);
        double se = std::sqrt(want * (1 - want) / reps);
        CHECK(std::abs(static_cast<double>(c[a][b]) / reps - want) < 5 * se);
      }
  }
}

TEST_CASE("lip_update: flat target accepts everything; record consistency") {
  Rng rng(83);
  const int n = 5;
  auto D = random_dataset(n, rng);
  ModelContext ctx;
  ctx.data = &D;
  ctx.scenario = Scenario::CausalLatentZ;
  ctx.p.prior = ErdosRenyiPrior{0.5};
  ctx.p.treatment = IidBernoulliTreatment{0.4};
  ctx.p.outcome.eta1 = 0.0;
  ctx.p.outcome.eta2 = 0.0;

  for (int K : {1, 3}) {
    auto A = random_network(n, 0.5, rng);
    LipConfig cfg;
    cfg.K = K;
    for (int t = 0; t < 200; ++t) {
      auto [next, rec] = lip_update(A, ctx, cfg, rng);
      CHECK(rec.accepted);
      CHECK(rec.delta == 0.0);
      CHECK(static_cast<int>(rec.flips.size()) == K);
      CHECK(next == flip_entries(A, rec.flips));
      A = next;
    }
  }

  LipConfig bad;
  bad.K = static_cast<int>(num_edge_slots(n)) + 1;
  auto A = random_network(n, 0.5, rng);
  CHECK_THROWS(lip_update(A, ctx, bad, rng));
}

TEST_CASE("lip_update: rejected steps leave the state unchanged") {
  Rng rng(89);
  auto pr = make_problem(5, 90, ExposureKind::WeightedDegree, true, false);
  auto ctx = ctx_of(pr);
  auto A = random_network(5, 0.5, rng);
  LipConfig cfg;
  int rejected = 0;
  for (int t = 0; t < 500; ++t) {
    auto [next, rec] = lip_update(A, ctx, cfg, rng);
    if (!rec.accepted) {
      CHECK(next == A);
      ++rejected;
    } else {
      CHECK(next == flip_entries(A, rec.flips));
    }
    A = next;
  }
  CHECK(rejected > 0);  // informative target must reject sometimes
}

TEST_CASE("transition matrix: stochasticity, stationarity, detailed balance") {
  std::vector<Problem> problems;
  problems.push_back(make_problem(3, 201, ExposureKind::WeightedDegree, true, false));
  problems.push_back(make_problem(4, 202, ExposureKind::UnweightedSum, false, false));
  problems.push_back(make_problem(3, 203, ExposureKind::UnweightedSum, true, true));

  for (const auto& pr : problems) {
    auto ctx = ctx_of(pr);
    auto pi = enumerate_posterior(ctx);
    for (LipMode mode : {LipMode::Exact, LipMode::Gradient}) {
      LipConfig cfg;
      cfg.mode = mode;
      auto P = build_transition_matrix(ctx, cfg);
      const std::size_t S = P.size();

      for (std::size_t x = 0; x < S; ++x) {
        double row = std::accumulate(P[x].begin(), P[x].end(), 0.0);
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
      }

      for (std::size_t y = 0; y < S; ++y) {
        double v = 0.0;
        for (std::size_t x = 0; x < S; ++x) v += pi[x] * P[x][y];
        CHECK(std::abs(v - pi[y]) < 1e-10);
      }

      for (std::size_t x = 0; x < S; ++x)
        for (std::size_t y = 0; y < S; ++y)
          CHECK(std::abs(pi[x] * P[x][y] - pi[y] * P[y][x]) < 1e-10);
    }
  }

  auto big = make_problem(5, 204, ExposureKind::UnweightedSum, false, false);
  auto ctx = ctx_of(big);
  LipConfig cfg;
  CHECK_THROWS(build_transition_matrix(ctx, cfg));
  auto small = make_problem(3, 205, ExposureKind::UnweightedSum, false, false);
  auto c2 = ctx_of(small);
  cfg.K = 2;
  CHECK_THROWS(build_transition_matrix(c2, cfg));
}

TEST_CASE("empirical stationarity: n=3 exact mode, K=1") {
  auto pr = make_problem(3, 301, ExposureKind::UnweightedSum, true, false);
  auto ctx = ctx_of(pr);
  auto pi = enumerate_posterior(ctx);

  Rng rng(302);
  LipConfig cfg;
  cfg.mode = LipMode::Exact;
  auto A = state_of(3, 0);
  std::vector<double> visits(pi.size(), 0.0);
  const int steps = 1000000;
  for (int t = 0; t < steps; ++t) {
    auto [next, rec] = lip_update(A, ctx, cfg, rng);
    A = next;
    visits[mask_of(A)] += 1.0;
  }
  for (auto& v : visits) v /= steps;
  CHECK(tv_distance(visits, pi) < 0.01);
}

TEST_CASE("empirical stationarity: K=2 on a concentrated target (parity-locked)") {
  // Accepted K-flip moves change exactly K entries, so even K preserves
  // edge-count parity: the K=2 chain explores one parity class only. The
  // check uses a target concentrated on the start class; the leaked mass
  // plus within-class error stays under the loose bound.
  const int n = 4;
  Rng seed_rng(401);
  Dataset D = random_dataset(n, seed_rng);
  SymmetricBinaryNetwork obs(n);
  obs.set(0, 1, true);
  obs.set(2, 3, true);  // two edges: even parity
  D.proxies.push_back(obs);

  ModelContext ctx;
  ctx.data = &D;
  ctx.scenario = Scenario::CausalLatentZ;
  ctx.p.prior = ErdosRenyiPrior{0.5};
  ctx.p.proxies = {ProxyModel{RandomNoiseProxy{0.003, 0.997}}};
  ctx.p.treatment = IidBernoulliTreatment{0.4};
  ctx.p.outcome.eta1 = 0.5;
  ctx.p.outcome.eta2 = 0.2;
  ctx.p.outcome.sigma = 1.0;

  auto pi = enumerate_posterior(ctx);
  double off_class = 0.0;
  for (std::size_t mask = 0; mask < pi.size(); ++mask)
    if (__builtin_popcountll(mask) % 2 == 1) off_class += pi[mask];
  MESSAGE("posterior mass on the unreachable parity class: ", off_class);
  REQUIRE(off_class < 0.03);

  Rng rng(402);
  LipConfig cfg;
  cfg.K = 2;
  auto A = obs;  // start at the even-parity mode
  std::vector<double> visits(pi.size(), 0.0);
  const int steps = 400000;
  int parity = 0;
  for (int t = 0; t < steps; ++t) {
    auto [next, rec] = lip_update(A, ctx, cfg, rng);
    A = next;
    visits[mask_of(A)] += 1.0;
    parity |= A.edge_count() % 2;
  }
  CHECK(parity == 0);  // the parity invariant itself
  for (auto& v : visits) v /= steps;
  CHECK(tv_distance(visits, pi) < 0.05);
}

TEST_CASE("acceptance rate by K (logged, not asserted)") {
  auto pr = make_problem(6, 501, ExposureKind::WeightedDegree, true, false);
  auto ctx = ctx_of(pr);
  for (int K : {1, 2, 3}) {
    Rng rng(502);
    LipConfig cfg;
    cfg.K = K;
    auto A = random_network(6, 0.4, rng);
    int acc = 0;
    const int steps = 4000;
    for (int t = 0; t < steps; ++t) {
      auto [next, rec] = lip_update(A, ctx, cfg, rng);
      A = next;
      acc += rec.accepted;
    }
    MESSAGE("K=", K, " acceptance rate ", static_cast<double>(acc) / steps);
  }
}
