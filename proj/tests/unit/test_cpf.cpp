#include <gtest/gtest.h>

#include "stats.hpp"
#include "ubhess/cpf.hpp"
#include "ubhess/errors.hpp"
#include "ubhess/functionals.hpp"
#include "ubhess/oracle.hpp"

namespace ubhess {
namespace {

struct OuFixture : ::testing::Test {
  std::unique_ptr<Model> model = make_model("ou1d");
  ParameterVector theta{*model, {0.46, 0.38}};
  ObservationSequence obs = simulate_observations(*model, theta, 10, 5, 42).observations;
};

TEST_F(OuFixture, CpfReturnsAnEnsembleTrajectoryOfTheRightShape) {
  Rng rng(1);
  GridPath path = draw_prior_path(*model, theta.values(), 5, 2, rng);
  const GridPath out = cpf_kernel(*model, theta, obs, path, 16, rng);
  EXPECT_EQ(out.level, 2);
  EXPECT_EQ(out.num_points(), path.num_points());
  EXPECT_EQ(out.state(0)[0], model->x_star()[0]);
}

TEST_F(OuFixture, FrozenSlotHoldsTheInputPath) {
  Rng rng(2);
  const GridPath input = draw_prior_path(*model, theta.values(), 5, 1, rng);
  ParticleEnsemble e;
  e.reset(1, 1, 5, 4, model->x_star());
  for (std::size_t k = 1; k <= 5; ++k) {
    e.freeze(k, input);
    const auto seg = e.segment(k, e.frozen_slot());
    for (std::size_t s = 0; s < 2; ++s) EXPECT_EQ(seg[s], input.values[(k - 1) * 2 + s + 1]);
  }
  GridPath traced;
  e.trace(e.frozen_slot(), traced);
  EXPECT_TRUE(bit_identical(traced, input));
}

TEST_F(OuFixture, SingleParticleIsRejectedAndWrongLevelToo) {
  FilterOptions opt;
  opt.num_particles = 1;
  EXPECT_THROW(ParticleFilter(*model, theta.values(), obs, opt), ArgumentError);
  ParticleFilter pf(*model, theta.values(), obs);
  Rng rng(0);
  GridPath wrong = draw_prior_path(*model, theta.values(), 4, 0, rng);
  EXPECT_THROW(pf.cpf(wrong, rng), ArgumentError);
  EXPECT_THROW(pf.init_levels(0, rng), ArgumentError);
}

TEST_F(OuFixture, EqualInputsGiveEqualOutputs) {
  FilterOptions opt;
  opt.num_particles = 8;
  ParticleFilter pf(*model, theta.values(), obs, opt);
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    CoupledPair pair;
    pair.x = draw_prior_path(*model, theta.values(), 5, 1, rng);
    pair.x_bar = pair.x;
    pf.ccpf(pair, rng);
    ASSERT_TRUE(pair.met);
    CoupledLevels lv;
    std::tie(lv.fine.x, lv.coarse.x) = draw_coupled_prior_paths(*model, theta.values(), 5, 2, rng);
    lv.fine.x_bar = lv.fine.x;
    lv.coarse.x_bar = lv.coarse.x;
    pf.cccpf(lv, rng);
    ASSERT_TRUE(lv.fine.met);
    ASSERT_TRUE(lv.coarse.met);
  }
}

TEST_F(OuFixture, CcpfChainsMeet) {
  FilterOptions opt;
  opt.num_particles = 16;
  ParticleFilter pf(*model, theta.values(), obs, opt);
  for (int run = 0; run < 100; ++run) {
    Rng rng(100 + run);
    CoupledPair st = pf.init_pair(0, rng);
    int m = 0;
    while (!st.met && m < 1000) {
      pf.ccpf(st, rng);
      ++m;
    }
    ASSERT_TRUE(st.met) << "run " << run;
  }
}

TEST_F(OuFixture, CoupledLevelChainsMeet) {
  FilterOptions opt;
  opt.num_particles = 16;
  ParticleFilter pf(*model, theta.values(), obs, opt);
  for (int run = 0; run < 100; ++run) {
    Rng rng(500 + run);
    CoupledLevels st = pf.init_levels(2, rng);
    int m = 0;
    while (!st.both_met() && m < 2000) {
      pf.cccpf(st, rng);
      ++m;
    }
    ASSERT_TRUE(st.both_met()) << "run " << run;
  }
}

TEST_F(OuFixture, CrossLevelKernelKeepsLevels) {
  Rng rng(9);
  auto [fine, coarse] = draw_coupled_prior_paths(*model, theta.values(), 5, 3, rng);
  const auto out = coupled_cpf_levels(*model, theta, obs, fine, coarse, FilterOptions{}, rng);
  EXPECT_EQ(out.first.level, 3);
  EXPECT_EQ(out.second.level, 2);
}

TEST_F(OuFixture, KernelsAreDeterministicGivenTheSeed) {
  FilterOptions opt;
  opt.num_particles = 8;
  Rng a(77), b(77);
  const CoupledLevels sa = init_chainl(*model, theta, obs, 2, opt, a);
  const CoupledLevels sb = init_chainl(*model, theta, obs, 2, opt, b);
  const CoupledLevels na = cccpf_kernel(*model, theta, obs, sa, opt, a);
  const CoupledLevels nb = cccpf_kernel(*model, theta, obs, sb, opt, b);
  EXPECT_TRUE(bit_identical(na.fine.x, nb.fine.x));
  EXPECT_TRUE(bit_identical(na.coarse.x_bar, nb.coarse.x_bar));
}

// Long-run CPF average of G at level 0 against quadrature of the smoothing law.
TEST(CpfInvariance, TimeAverageMatchesQuadrature) {
  const auto model = make_model("ou1d");
  const ParameterVector theta(*model, {0.46, 0.38});
  const ObservationSequence obs = simulate_observations(*model, theta, 10, 3, 7).observations;
  const TargetMoments oracle = target_moments_quadrature(*model, theta.values(), obs);
  FilterOptions opt;
  opt.num_particles = 8;
  ParticleFilter pf(*model, theta.values(), obs, opt);
  Rng rng(13);
  GridPath path = draw_prior_path(*model, theta.values(), 3, 0, rng);
  for (int i = 0; i < 1000; ++i) pf.cpf(path, rng);
  std::vector<double> g0, g1;
  FunctionalBundle f(2);
  for (int i = 0; i < 40'000; ++i) {
    pf.cpf(path, rng);
    evaluate_functionals(*model, theta.values(), path, obs, false, f);
    g0.push_back(f.G[0]);
    g1.push_back(f.G[1]);
  }
  const auto a = testing::batch_means(g0, 40), b = testing::batch_means(g1, 40);
  EXPECT_NEAR(a.mean, oracle.mean.G[0], 3.5 * a.std_error);
  EXPECT_NEAR(b.mean, oracle.mean.G[1], 3.5 * b.std_error);
}

}  // namespace
}  // namespace ubhess
