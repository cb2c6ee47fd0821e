// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: ubhess_acceptance [--only 1,4,9] [--strict]
// The exit code is 0 unless --strict is given and a criterion failed, or the
// harness itself crashes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stats.hpp"
#include "ubhess/coupling.hpp"
#include "ubhess/cpf.hpp"
#include "ubhess/discretization.hpp"
#include "ubhess/errors.hpp"
#include "ubhess/estimator.hpp"
#include "ubhess/functionals.hpp"
#include "ubhess/optimize.hpp"
#include "ubhess/oracle.hpp"

namespace ubhess::acceptance {
namespace {

using Clock = std::chrono::steady_clock;

// Pinned tolerances.
constexpr double kChiSquareAlpha = 1e-3;
constexpr double kMeetingSe = 3.0;
constexpr double kFdRelTol = 1e-4;
constexpr double kUnbiasedSe = 3.0;
constexpr double kBiasSlopeLo = 0.7, kBiasSlopeHi = 1.1;
constexpr double kVarSlopeLo = 0.9, kVarSlopeHi = 1.4;
constexpr double kInvarianceSe = 3.0;
constexpr double kScoreSe = 3.0;
constexpr double kOracleNewtonTol = 1e-8;
constexpr std::size_t kOracleNewtonMaxIter = 20;
constexpr double kEstimatedNewtonDistance = 0.1;
constexpr std::size_t kEstimatedNewtonMaxIter = 15;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream ss;
  ss.precision(prec);
  ss << v;
  return ss.str();
}

void info(const std::string& msg) { std::cout << "  info: " << msg << std::endl; }

struct OuSetup {
  std::unique_ptr<Model> model = make_model("ou1d");
  ParameterVector theta{*model, {0.46, 0.38}};
  ObservationSequence obs = simulate_observations(*model, theta, 10, 10, 42).observations;
};

EstimatorConfig desk_config(int l_max, std::size_t replicates, std::uint64_t seed) {
  EstimatorConfig c;
  c.filter.num_particles = 32;
  c.m_star = 2;
  c.levels = LevelDistribution::truncated(l_max);
  c.replicates = replicates;
  c.seed = seed;
  return c;
}

// 1. Coupling marginals ------------------------------------------------------

Outcome coupling_marginals() {
  const std::size_t sizes[] = {2, 5, 32};
  const std::size_t draws = 100'000;
  std::mt19937_64 gen(20240601);
  double worst_p = 1.0, worst_z = 0.0;
  std::size_t tests = 0;
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = sizes[t % 3];
    const auto p1 = testing::random_simplex(n, 1.0, gen);
    const auto p2 = t % 2 == 0 ? testing::random_simplex(n, 1.0, gen) : testing::perturb_simplex(p1, 0.5, gen);
    const Pmf r1 = Pmf::from_weights(p1), r2 = Pmf::from_weights(p2);
    const MaximalCoupling mc(r1, r2, ResidualCoupling::kInversion);
    std::vector<std::size_t> c1(n), c2(n);
    std::size_t equal = 0;
    for (std::size_t d = 0; d < draws; ++d) {
      const auto [i, j] = mc.sample(rng);
      ++c1[i];
      ++c2[j];
      equal += i == j;
    }
    worst_p = std::min({worst_p, testing::chi_square_pvalue(c1, p1), testing::chi_square_pvalue(c2, p2)});
    double overlap = 0.0;
    for (std::size_t i = 0; i < n; ++i) overlap += std::min(p1[i], p2[i]);
    const double se = std::sqrt(overlap * (1.0 - overlap) / static_cast<double>(draws));
    const double gap = std::abs(static_cast<double>(equal) / static_cast<double>(draws) - overlap);
    worst_z = std::max(worst_z, se > 0.0 ? gap / se : (gap > 0.0 ? INFINITY : 0.0));
    tests += 3;

    // Quadruples alternate between unrelated PMFs and nearby ones, which
    // exercises the branches where one or both pairs largely agree.
    std::vector<std::vector<double>> q(4);
    q[0] = testing::random_simplex(n, 1.0, gen);
    if (t % 2 == 0) {
      for (int k = 1; k < 4; ++k) q[static_cast<std::size_t>(k)] = testing::random_simplex(n, 1.0, gen);
    } else {
      q[1] = testing::perturb_simplex(q[0], 0.3, gen);
      q[2] = testing::perturb_simplex(q[0], 0.3, gen);
      q[3] = testing::perturb_simplex(q[1], 0.3, gen);
    }
    const FourWayCoupling fw(Pmf::from_weights(q[0]), Pmf::from_weights(q[1]), Pmf::from_weights(q[2]),
                             Pmf::from_weights(q[3]));
    std::vector<std::vector<std::size_t>> counts(4, std::vector<std::size_t>(n));
    for (std::size_t d = 0; d < draws; ++d) {
      const auto idx = fw.sample(rng);
      for (std::size_t k = 0; k < 4; ++k) ++counts[k][idx[k]];
    }
    for (std::size_t k = 0; k < 4; ++k) worst_p = std::min(worst_p, testing::chi_square_pvalue(counts[k], q[k]));
    tests += 4;
  }
  Outcome o;
  o.pass = worst_p > kChiSquareAlpha && worst_z <= kMeetingSe;
  o.detail = std::to_string(tests) + " checks, min p=" + fmt(worst_p) + ", max meeting z=" + fmt(worst_z);
  return o;
}

// 2. Functional correctness --------------------------------------------------

Outcome functional_correctness() {
  double worst = 0.0;
  std::size_t checks = 0;
  std::string where;
  for (const std::string& name : model_names()) {
    const auto m = make_model(name);
    const std::vector<double> base = default_parameters(name);
    const ParameterVector theta(*m, base);
    const std::size_t p = base.size();
    Rng rng(derive_seed(77, {checks}));
    const std::size_t n = 5;
    for (int trial = 0; trial < 50; ++trial) {
      const int level = trial % 4;
      const GridPath path = draw_prior_path(*m, base, n, level, rng);
      std::vector<double> y;
      for (std::size_t t = 1; t <= n; ++t) {
        for (double v : path.at_time(t)) y.push_back(v + std::sqrt(base.back()) * rng.normal());
      }
      const ObservationSequence obs(m->obs_dim(), y);
      const FunctionalBundle f = bundle(*m, theta, path, obs);
      const double h = 1e-5;
      for (std::size_t i = 0; i < p; ++i) {
        std::vector<double> tp = base, tm = base;
        tp[i] += h;
        tm[i] -= h;
        const ParameterVector pp(*m, tp), pm(*m, tm);
        const double fd = (log_rho(*m, pp, path, obs) - log_rho(*m, pm, path, obs)) / (2 * h);
        const double e = std::abs(f.G[i] - fd) / std::max(1.0, std::abs(fd));
        if (e > worst) {
          worst = e;
          where = name + " G" + std::to_string(i + 1);
        }
        ++checks;
        const FunctionalBundle fp = bundle(*m, pp, path, obs), fm = bundle(*m, pm, path, obs);
        for (std::size_t j = 0; j < p; ++j) {
          const double fdh = (fp.G[j] - fm.G[j]) / (2 * h);
          const double eh = std::abs(f.H[pair_index(std::min(i, j), std::max(i, j), p)] - fdh) /
                            std::max(1.0, std::abs(fdh));
          if (eh > worst) {
            worst = eh;
            where = name + " H" + std::to_string(i + 1) + std::to_string(j + 1);
          }
          ++checks;
        }
      }
    }
  }
  Outcome o;
  o.pass = worst <= kFdRelTol;
  o.detail = std::to_string(checks) + " entries, max rel err=" + fmt(worst) + " (" + where + ")";
  return o;
}

// 3. Exact coupling invariants ------------------------------------------------

Outcome coupling_invariants() {
  std::size_t failures = 0;
  std::size_t trials = 0;
  for (const std::string& name : {std::string("ou1d"), std::string("mou2d"), std::string("fhn")}) {
    const auto m = make_model(name);
    const ParameterVector theta(*m, default_parameters(name));
    Rng rng(derive_seed(3, {trials}));
    for (int t = 0; t < 1000; ++t) {
      const int level = 1 + t % 4;
      const GridPath start = draw_prior_path(*m, theta.values(), 1, level, rng);
      const auto x = start.at_time(1);
      const std::vector<double> xv(x.begin(), x.end());
      const auto [a, b] = coupled_pair_step(*m, theta, xv, xv, level, rng);
      failures += a.values != b.values;
      const auto s = coupled_level_step(*m, theta, xv, xv, xv, xv, level, rng);
      failures += s.fine.values != s.fine_bar.values || s.coarse.values != s.coarse_bar.values;
    }
    trials += 2000;
  }
  for (const std::string& name : {std::string("ou1d"), std::string("mou2d")}) {
    const auto m = make_model(name);
    const ParameterVector theta(*m, default_parameters(name));
    const ObservationSequence obs = simulate_observations(*m, theta, 10, 5, 11).observations;
    FilterOptions opt;
    opt.num_particles = 16;
    ParticleFilter pf(*m, theta.values(), obs, opt);
    Rng rng(derive_seed(4, {trials}));
    for (int t = 0; t < 1000; ++t) {
      CoupledPair pair;
      pair.x = draw_prior_path(*m, theta.values(), 5, t % 3, rng);
      pair.x_bar = pair.x;
      pf.ccpf(pair, rng);
      failures += !pair.met || !bit_identical(pair.x, pair.x_bar);
      CoupledLevels lv;
      std::tie(lv.fine.x, lv.coarse.x) = draw_coupled_prior_paths(*m, theta.values(), 5, 1 + t % 3, rng);
      lv.fine.x_bar = lv.fine.x;
      lv.coarse.x_bar = lv.coarse.x;
      pf.cccpf(lv, rng);
      failures += !bit_identical(lv.fine.x, lv.fine.x_bar) || !bit_identical(lv.coarse.x, lv.coarse.x_bar);
    }
    trials += 2000;
  }
  Outcome o;
  o.pass = failures == 0;
  o.detail = std::to_string(trials) + " trials over p-check, q-check, CCPF, C-CCPF; " + std::to_string(failures) +
             " mismatches";
  return o;
}

// 4. Unbiasedness -------------------------------------------------------------

Outcome unbiasedness() {
  const OuSetup s;
  const int l_max = 5;
  const HessianEstimate est = estimate_hessian(*s.model, s.theta, s.obs, desk_config(l_max, 20'000, 4));
  const OracleDerivatives exact = oracle_derivatives(*s.model, s.theta.values(), s.obs);
  const OracleDerivatives trunc = oracle_derivatives(*s.model, s.theta.values(), s.obs, l_max);
  Outcome o{true, ""};
  for (std::size_t k = 0; k < 4; ++k) {
    const double envelope = std::abs(trunc.hessian[k] - exact.hessian[k]);
    const double gap = std::abs(est.mean[k] - exact.hessian[k]);
    const bool ok = gap <= kUnbiasedSe * est.std_error[k] + envelope;
    o.pass = o.pass && ok;
    o.detail += "h" + std::to_string(k / 2 + 1) + std::to_string(k % 2 + 1) + "=" + fmt(est.mean[k]) + "±" +
                fmt(est.std_error[k], 3) + " vs " + fmt(exact.hessian[k]) + (ok ? "; " : " (out); ");
  }
  o.detail += "cost=" + std::to_string(est.cost.total());
  return o;
}

// 5. Bias decay ---------------------------------------------------------------
//
// The Monte Carlo standard error of the estimator is orders of magnitude above
// the bias at these levels, so the rate is split in two checks: (a) for each
// L the estimator is consistent with the exact level-L Euler target, and
// (b) the entrywise bias of that target against the exact value decays with
// slope in the pinned range.

Outcome bias_decay() {
  const OuSetup s;
  const OracleDerivatives exact = oracle_derivatives(*s.model, s.theta.values(), s.obs);
  std::vector<double> lx;
  std::vector<std::vector<double>> ly(3);
  bool consistent = true;
  std::string detail;
  const std::size_t entries[] = {0, 1, 3};
  for (int L = 2; L <= 6; ++L) {
    const OracleDerivatives target = oracle_derivatives(*s.model, s.theta.values(), s.obs, L);
    const HessianEstimate est =
        estimate_hessian(*s.model, s.theta, s.obs, desk_config(L, 5000, derive_seed(5, {static_cast<std::uint64_t>(L)})));
    double worst = 0.0;
    for (std::size_t k : entries) {
      worst = std::max(worst, std::abs(est.mean[k] - target.hessian[k]) / est.std_error[k]);
    }
    consistent = consistent && worst <= kUnbiasedSe;
    info("L=" + std::to_string(L) + " max |estimate - level-L target| / SE = " + fmt(worst, 3));
    lx.push_back(std::log(std::ldexp(1.0, -L)));
    for (std::size_t e = 0; e < 3; ++e) {
      ly[e].push_back(std::log(std::abs(target.hessian[entries[e]] - exact.hessian[entries[e]])));
    }
  }
  bool slopes_ok = true;
  const char* names[] = {"h11", "h12", "h22"};
  for (std::size_t e = 0; e < 3; ++e) {
    const double slope = testing::ols_slope(lx, ly[e]);
    slopes_ok = slopes_ok && slope >= kBiasSlopeLo && slope <= kBiasSlopeHi;
    detail += std::string(names[e]) + " slope=" + fmt(slope, 3) + "; ";
  }
  Outcome o;
  o.pass = consistent && slopes_ok;
  o.detail = detail + (consistent ? "estimator consistent with level targets" : "estimator inconsistent at some L");
  return o;
}

// 6. Increment variance -------------------------------------------------------

double summed_variance(const IncrementSample& sample) {
  const std::size_t w = sample.xi.front().flatten().size();
  std::vector<double> mean(w, 0.0), sq(w, 0.0);
  for (const auto& xi : sample.xi) {
    const auto v = xi.flatten();
    for (std::size_t c = 0; c < w; ++c) mean[c] += v[c];
  }
  const double m = static_cast<double>(sample.xi.size());
  for (double& v : mean) v /= m;
  for (const auto& xi : sample.xi) {
    const auto v = xi.flatten();
    for (std::size_t c = 0; c < w; ++c) sq[c] += (v[c] - mean[c]) * (v[c] - mean[c]);
  }
  double total = 0.0;
  for (double v : sq) total += v / (m - 1.0);
  return total;
}

std::pair<bool, std::string> variance_slope(const std::string& name, int lo, int hi) {
  const auto m = make_model(name);
  const ParameterVector theta(*m, default_parameters(name));
  const ObservationSequence obs = simulate_observations(*m, theta, 10, 10, 42).observations;
  std::vector<double> lx, ly;
  std::string detail;
  for (int l = lo; l <= hi; ++l) {
    const IncrementSample sample =
        sample_increments(*m, theta, obs, l, desk_config(l, 1000, derive_seed(6, {static_cast<std::uint64_t>(l)})));
    const double v = summed_variance(sample);
    lx.push_back(std::log(std::ldexp(1.0, -l)));
    ly.push_back(std::log(v));
    detail += "l" + std::to_string(l) + "=" + fmt(v, 3) + " ";
  }
  const double slope = testing::ols_slope(lx, ly);
  return {slope >= kVarSlopeLo && slope <= kVarSlopeHi, name + " slope=" + fmt(slope, 3) + " [" + detail + "]"};
}

Outcome variance_decay() {
  Outcome o{true, ""};
  for (const std::string name : {"ou1d", "fhn"}) {
    try {
      const auto [ok, d] = variance_slope(name, 1, 5);
      o.pass = o.pass && ok;
      o.detail += d + "; ";
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail += name + " failed: " + e.what() + "; ";
      if (name == "fhn") {
        try {
          info("fhn over l=3..6 instead: " + variance_slope(name, 3, 6).second);
        } catch (const std::exception& e2) {
          info(std::string("fhn over l=3..6 also failed: ") + e2.what());
        }
      }
    }
  }
  return o;
}

// 7. CPF invariance -----------------------------------------------------------

Outcome cpf_invariance() {
  const auto m = make_model("ou1d");
  const ParameterVector theta(*m, {0.46, 0.38});
  const ObservationSequence obs = simulate_observations(*m, theta, 10, 3, 42).observations;
  const TargetMoments oracle = target_moments_quadrature(*m, theta.values(), obs);
  FilterOptions opt;
  opt.num_particles = 8;
  ParticleFilter pf(*m, theta.values(), obs, opt);
  Rng rng(7);
  GridPath path = draw_prior_path(*m, theta.values(), 3, 0, rng);
  for (int i = 0; i < 10'000; ++i) pf.cpf(path, rng);
  const std::size_t iterations = 1'000'000;
  std::vector<double> g1, g2;
  g1.reserve(iterations);
  g2.reserve(iterations);
  FunctionalBundle f(2);
  for (std::size_t i = 0; i < iterations; ++i) {
    pf.cpf(path, rng);
    evaluate_functionals(*m, theta.values(), path, obs, false, f);
    g1.push_back(f.G[0]);
    g2.push_back(f.G[1]);
  }
  const auto a = testing::batch_means(g1, 100), b = testing::batch_means(g2, 100);
  const double za = std::abs(a.mean - oracle.mean.G[0]) / a.std_error;
  const double zb = std::abs(b.mean - oracle.mean.G[1]) / b.std_error;
  Outcome o;
  o.pass = za <= kInvarianceSe && zb <= kInvarianceSe;
  o.detail = "G1 " + fmt(a.mean, 6) + " vs " + fmt(oracle.mean.G[0], 6) + " (z=" + fmt(za, 3) + "), G2 " +
             fmt(b.mean, 6) + " vs " + fmt(oracle.mean.G[1], 6) + " (z=" + fmt(zb, 3) + ")";
  return o;
}

// 8. Score estimator ----------------------------------------------------------

std::vector<double> oracle_mle(const Model& model, const ObservationSequence& obs, std::vector<double> start) {
  FitConfig cfg;
  cfg.initial = std::move(start);
  cfg.tolerance = 1e-9;
  cfg.max_iterations = 100;
  const FitTrace t = newton_fit(oracle_source(model, obs), cfg);
  if (!t.converged()) throw NumericalDivergence("oracle Newton did not converge: " + to_string(t.status));
  return t.final_theta();
}

Outcome score_estimator() {
  const OuSetup s;
  const std::vector<double> mle = oracle_mle(*s.model, s.obs, {0.46, 0.38});
  info("oracle MLE = (" + fmt(mle[0], 8) + ", " + fmt(mle[1], 8) + ")");
  Outcome o{true, ""};
  const int l_max = 5;
  struct Point {
    std::string label;
    std::vector<double> theta;
  };
  for (const Point& p : {Point{"MLE", mle}, Point{"theta0", {0.46, 0.38}}}) {
    const ParameterVector th(*s.model, p.theta);
    const ScoreEstimate est = estimate_score(*s.model, th, s.obs, desk_config(l_max, 20'000, 8));
    const OracleDerivatives exact = oracle_derivatives(*s.model, p.theta, s.obs);
    const OracleDerivatives trunc = oracle_derivatives(*s.model, p.theta, s.obs, l_max);
    o.detail += p.label + ":";
    for (std::size_t i = 0; i < 2; ++i) {
      const double envelope = std::abs(trunc.score[i] - exact.score[i]);
      const double gap = std::abs(est.mean[i] - exact.score[i]);
      const bool ok = gap <= kScoreSe * est.std_error[i] + envelope;
      o.pass = o.pass && ok;
      o.detail += " s" + std::to_string(i + 1) + "=" + fmt(est.mean[i]) + "±" + fmt(est.std_error[i], 3) + " vs " +
                  fmt(exact.score[i]) + (ok ? "" : " (out)");
    }
    o.detail += "; ";
  }
  return o;
}

// 9. Optimizer ----------------------------------------------------------------

Outcome optimizer() {
  Outcome o{true, ""};
  {
    const OuSetup s;
    const std::vector<double> reference = oracle_mle(*s.model, s.obs, {0.46, 0.38});
    FitConfig cfg;
    cfg.initial = {0.1, 0.1};
    cfg.tolerance = 1e-9;
    cfg.max_iterations = kOracleNewtonMaxIter;
    const FitTrace t = newton_fit(oracle_source(*s.model, s.obs), cfg);
    const double dist = std::hypot(t.final_theta()[0] - reference[0], t.final_theta()[1] - reference[1]);
    const bool ok = t.converged() && dist <= kOracleNewtonTol;
    o.pass = ok;
    o.detail = "oracle Newton: " + to_string(t.status) + " in " + std::to_string(t.steps()) +
               " steps, |theta - mle|=" + fmt(dist, 3) + "; ";
  }
  const auto m = make_model("mou2d");
  const std::vector<double> truth = default_parameters("mou2d");
  const ObservationSequence obs = simulate_observations(*m, ParameterVector(*m, truth), 10, 50, 42).observations;
  EstimatorConfig est = desk_config(4, 500, 9);
  est.deadline = Clock::now() + std::chrono::minutes(15);
  FitConfig fc;
  fc.initial = {0.1, 0.1, 0.1, 0.1};
  fc.reference = truth;
  fc.tolerance = kEstimatedNewtonDistance;
  fc.max_iterations = kEstimatedNewtonMaxIter;
  fc.newton.ridge = 1e-4;
  try {
    const FitTrace newton = newton_fit(*m, obs, est, fc);
    const bool newton_ok = newton.converged();
    o.detail += "estimated Newton: " + to_string(newton.status) + " in " + std::to_string(newton.steps()) +
                " steps (distance " + fmt(newton.iterations.back().distance, 3) + "); ";
    bool sgd_slower = false;
    if (newton_ok) {
      FitConfig sc = fc;
      sc.learning_rate = 0.005;
      sc.max_iterations = newton.steps();
      est.deadline = Clock::now() + std::chrono::minutes(15);
      const FitTrace sgd = sgd_fit(*m, obs, est, sc);
      sgd_slower = !sgd.converged();
      o.detail += "SGD after " + std::to_string(sgd.steps()) + " steps: " + to_string(sgd.status);
    }
    o.pass = o.pass && newton_ok && sgd_slower;
  } catch (const DeadlineExceeded&) {
    o.pass = false;
    o.detail += "estimated Newton (MOU, n=50, N=32, M=500, L_max=4) did not finish its first iteration "
                "within the 15 minute budget";
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail += std::string("estimated Newton failed: ") + e.what();
  }
  return o;
}

// 10. Determinism -------------------------------------------------------------

Outcome determinism() {
  bool same = true;
  std::size_t compared = 0;
  for (const std::string name : {"ou1d", "mou2d"}) {
    const auto m = make_model(name);
    const ParameterVector theta(*m, default_parameters(name));
    const ObservationSequence obs = simulate_observations(*m, theta, 10, 5, 10).observations;
    const ObservationSequence again = simulate_observations(*m, theta, 10, 5, 10).observations;
    same = same && obs.values() == again.values();
    EstimatorConfig c = desk_config(3, 40, 10);
    c.filter.num_particles = 16;
    std::vector<HessianEstimate> h;
    std::vector<ScoreEstimate> sc;
    std::vector<IncrementSample> inc;
    for (unsigned workers : {1u, 1u, 4u}) {
      c.workers = workers;
      h.push_back(estimate_hessian(*m, theta, obs, c));
      sc.push_back(estimate_score(*m, theta, obs, c));
      inc.push_back(sample_increments(*m, theta, obs, 2, c));
    }
    for (std::size_t r = 1; r < h.size(); ++r) {
      same = same && h[r].mean == h[0].mean && h[r].std_error == h[0].std_error && h[r].terms == h[0].terms &&
             h[r].level_draws == h[0].level_draws && h[r].cost.total() == h[0].cost.total();
      same = same && sc[r].mean == sc[0].mean && sc[r].terms == sc[0].terms;
      for (std::size_t k = 0; k < inc[0].xi.size(); ++k) same = same && inc[r].xi[k].flatten() == inc[0].xi[k].flatten();
      compared += 3;
    }
  }
  Outcome o;
  o.pass = same;
  o.detail = std::to_string(compared) + " estimate comparisons across runs and workers {1, 4}: " +
             (same ? "bit-identical" : "mismatch");
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace ubhess::acceptance

int main(int argc, char** argv) {
  using namespace ubhess::acceptance;
  std::set<int> only;
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--strict") {
      strict = true;
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: ubhess_acceptance [--only 1,2,...] [--strict]\n";
      return 2;
    }
  }
  const std::vector<Criterion> criteria = {
      {1, "coupling marginals", coupling_marginals},
      {2, "functional correctness", functional_correctness},
      {3, "exact coupling invariants", coupling_invariants},
      {4, "unbiasedness at desk scale", unbiasedness},
      {5, "bias-decay rate", bias_decay},
      {6, "increment-variance rate", variance_decay},
      {7, "CPF invariance", cpf_invariance},
      {8, "score estimator", score_estimator},
      {9, "optimizer behavior", optimizer},
      {10, "determinism and parallel invariance", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && only.count(c.id) == 0) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    failed += !o.pass;
    std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << " " << c.name << ": " << o.detail
              << " [" << fmt(secs, 3) << " s]" << std::endl;
  }
  return strict && failed > 0 ? 1 : 0;
}
