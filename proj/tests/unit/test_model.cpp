#include <gtest/gtest.h>

#include <cmath>

#include "stats.hpp"
#include "ubhess/errors.hpp"
#include "ubhess/model.hpp"

namespace ubhess {
namespace {

std::vector<double> eval_drift(const Model& m, std::vector<double> theta, std::vector<double> x) {
  std::vector<double> out(static_cast<std::size_t>(m.state_dim()));
  m.drift(theta, x, out);
  return out;
}

std::vector<double> eval_b(const Model& m, std::vector<double> theta, std::vector<double> x) {
  std::vector<double> out(static_cast<std::size_t>(m.state_dim()));
  m.girsanov_drift(theta, x, out);
  return out;
}

TEST(Model, FactoryKnowsThreeModels) {
  EXPECT_EQ(model_names().size(), 3u);
  EXPECT_THROW(make_model("nope"), ArgumentError);
  EXPECT_EQ(make_model("ou1d")->param_dim(), 2);
  EXPECT_EQ(make_model("mou2d")->param_dim(), 4);
  EXPECT_EQ(make_model("fhn")->state_dim(), 2);
}

TEST(Model, OuDriftAndGirsanovDrift) {
  const auto m = make_model("ou1d");
  EXPECT_DOUBLE_EQ(eval_drift(*m, {0.46, 0.38}, {1.0})[0], -0.46);
  EXPECT_DOUBLE_EQ(eval_b(*m, {0.46, 0.38}, {1.0})[0], -0.46);
}

TEST(Model, MouGirsanovDriftDividesBySigma) {
  const auto m = make_model("mou2d");
  const auto a = eval_drift(*m, {0.48, 0.78, 0.37, 0.32}, {1.0, 1.0});
  const auto b = eval_b(*m, {0.48, 0.78, 0.37, 0.32}, {1.0, 1.0});
  EXPECT_NEAR(b[0], a[0] / 0.8, 1e-14);
  EXPECT_NEAR(b[1], a[1] / 0.6, 1e-14);
  const auto dense = girsanov_drift_dense(*m, std::vector<double>{0.48, 0.78, 0.37, 0.32}, std::vector<double>{1.0, 1.0});
  EXPECT_NEAR(dense[0], b[0], 1e-12);
  EXPECT_NEAR(dense[1], b[1], 1e-12);
}

TEST(Model, FhnDriftIsTheCubicForm) {
  const auto m = make_model("fhn");
  const auto a = eval_drift(*m, {0.89, 0.98, 0.5, 0.79}, {2.0, -1.0});
  EXPECT_DOUBLE_EQ(a[0], 0.89 * (2.0 - 8.0 + 1.0));
  EXPECT_DOUBLE_EQ(a[1], 0.98 * 2.0 + 1.0 + 0.5);
}

TEST(Model, OuGradientOfB) {
  const auto m = make_model("ou1d");
  std::vector<double> g(2);
  m->girsanov_drift_grad(std::vector<double>{0.46, 0.38}, std::vector<double>{2.0}, g);
  EXPECT_DOUBLE_EQ(g[0], -2.0);
  EXPECT_DOUBLE_EQ(g[1], 0.0);
}

// Central differences of b in theta, for every model.
TEST(Model, GirsanovDerivativesMatchFiniteDifferences) {
  for (const std::string name : model_names()) {
    const auto m = make_model(name);
    const std::size_t p = static_cast<std::size_t>(m->param_dim());
    const std::size_t d = static_cast<std::size_t>(m->state_dim());
    const std::vector<double> theta = default_parameters(name);
    const std::vector<double> x(d, 0.7);
    std::vector<double> grad(p * d), hess(p * p * d);
    m->girsanov_drift_grad(theta, x, grad);
    m->girsanov_drift_hess(theta, x, hess);
    const double h = 1e-5;
    for (std::size_t i = 0; i < p; ++i) {
      std::vector<double> tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      const auto bp = eval_b(*m, tp, x), bm = eval_b(*m, tm, x);
      std::vector<double> gp(p * d), gm(p * d);
      m->girsanov_drift_grad(tp, x, gp);
      m->girsanov_drift_grad(tm, x, gm);
      for (std::size_t c = 0; c < d; ++c) {
        EXPECT_NEAR(grad[i * d + c], (bp[c] - bm[c]) / (2 * h), 1e-7) << name;
        for (std::size_t j = 0; j < p; ++j) {
          EXPECT_NEAR(hess[(j * p + i) * d + c], (gp[j * d + c] - gm[j * d + c]) / (2 * h), 1e-7) << name;
        }
      }
    }
  }
}

TEST(Model, ObservationDensityDerivativesMatchFiniteDifferences) {
  for (const std::string name : model_names()) {
    const auto m = make_model(name);
    const std::size_t p = static_cast<std::size_t>(m->param_dim());
    const std::vector<double> theta = default_parameters(name);
    const std::vector<double> x(static_cast<std::size_t>(m->state_dim()), 0.3);
    const std::vector<double> y(static_cast<std::size_t>(m->obs_dim()), -0.4);
    std::vector<double> g(p), hs(p * p);
    m->obs_logdens_derivs(theta, x, y, g, hs);
    const double h = 1e-5;
    for (std::size_t i = 0; i < p; ++i) {
      std::vector<double> tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      EXPECT_NEAR(g[i], (m->obs_logdens(tp, x, y) - m->obs_logdens(tm, x, y)) / (2 * h), 1e-6) << name;
      std::vector<double> gp(p), gm(p), scratch(p * p);
      m->obs_logdens_derivs(tp, x, y, gp, scratch);
      m->obs_logdens_derivs(tm, x, y, gm, scratch);
      for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(hs[j * p + i], (gp[j] - gm[j]) / (2 * h), 1e-5) << name;
    }
  }
}

TEST(Model, GaussianObservationDensityValue) {
  const auto m = make_model("ou1d");
  const double v = m->obs_logdens(std::vector<double>{0.46, 1.0}, std::vector<double>{0.5}, std::vector<double>{0.5});
  EXPECT_NEAR(v, -0.5 * std::log(2 * M_PI), 1e-14);
}

TEST(Model, DomainChecks) {
  const auto ou = make_model("ou1d");
  EXPECT_THROW(ParameterVector(*ou, {0.46, -1.0}), DomainError);
  EXPECT_THROW(ParameterVector(*ou, {0.46, 0.0}), DomainError);
  EXPECT_THROW(ParameterVector(*ou, {0.46}), DomainError);
  EXPECT_THROW(ParameterVector(*ou, {std::nan(""), 1.0}), DomainError);
  EXPECT_NO_THROW(ParameterVector(*ou, {0.46, 0.38}));
  const auto fhn = make_model("fhn");
  EXPECT_THROW(ParameterVector(*fhn, {0.89, 0.98, 0.5, -0.1}), DomainError);
}

TEST(Model, CustomCoefficients) {
  ModelOptions opt;
  opt.sigma = std::vector<double>{2.0};
  opt.x_star = std::vector<double>{3.0};
  const auto m = make_model("ou1d", opt);
  EXPECT_DOUBLE_EQ(m->x_star()[0], 3.0);
  EXPECT_DOUBLE_EQ(eval_b(*m, {0.5, 1.0}, {1.0})[0], -0.25);
  opt.sigma = std::vector<double>{1.0, 2.0};
  EXPECT_THROW(make_model("ou1d", opt), ArgumentError);
}

TEST(Model, LinearStructureOnlyForLinearModels) {
  EXPECT_TRUE(make_model("ou1d")->linear_structure(std::vector<double>{0.46, 0.38}).has_value());
  EXPECT_TRUE(make_model("mou2d")->linear_structure(std::vector<double>{0.48, 0.78, 0.37, 0.32}).has_value());
  EXPECT_FALSE(make_model("fhn")->linear_structure(std::vector<double>{0.89, 0.98, 0.5, 0.79}).has_value());
}

TEST(Simulate, SameSeedSameData) {
  const auto m = make_model("mou2d");
  const ParameterVector theta(*m, default_parameters("mou2d"));
  const auto a = simulate_observations(*m, theta, 4, 20, 11);
  const auto b = simulate_observations(*m, theta, 4, 20, 11);
  const auto c = simulate_observations(*m, theta, 4, 20, 12);
  EXPECT_EQ(a.observations.values(), b.observations.values());
  EXPECT_TRUE(bit_identical(a.latent, b.latent));
  EXPECT_NE(a.observations.values(), c.observations.values());
  EXPECT_EQ(a.observations.size(), 20u);
}

TEST(Simulate, ZeroObservationsRejected) {
  const auto m = make_model("ou1d");
  const ParameterVector theta(*m, {0.46, 0.38});
  EXPECT_THROW(simulate_observations(*m, theta, 3, 0, 1), ArgumentError);
}

// Under the level-l Euler scheme E[X_1] = (1 - theta_1 D)^{1/D} x0, and
// Y_1 = X_1 + noise, so the sample mean of Y_1 must agree with that value.
TEST(Simulate, EulerMeanOfFirstObservation) {
  const auto m = make_model("ou1d");
  const ParameterVector theta(*m, {0.46, 0.38});
  const int level = 10;
  const double delta = std::ldexp(1.0, -level);
  const double expected = std::pow(1.0 - 0.46 * delta, 1.0 / delta);
  std::vector<double> y;
  for (std::uint64_t s = 0; s < 20'000; ++s) y.push_back(simulate_observations(*m, theta, level, 1, s).observations[0][0]);
  const auto me = testing::mean_and_error(y);
  EXPECT_NEAR(me.mean, expected, 3.0 * me.std_error);
}

}  // namespace
}  // namespace ubhess
