#include "ubhess/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <numbers>

#include "ubhess/errors.hpp"

namespace ubhess {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_size(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw ArgumentError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                        std::to_string(v.size()));
  }
}

}  // namespace

ParameterVector::ParameterVector(const Model& model, std::vector<double> values)
    : values_(std::move(values)) {
  model.validate(values_);
}

Model::Model(std::string name, int state_dim, int obs_dim, int param_dim, std::vector<double> x_star)
    : name_(std::move(name)),
      state_dim_(state_dim),
      obs_dim_(obs_dim),
      param_dim_(param_dim),
      x_star_(std::move(x_star)) {
  if (state_dim_ < 1 || obs_dim_ < 1 || param_dim_ < 1) {
    throw ArgumentError("model dimensions must be positive");
  }
  require_size(x_star_, static_cast<std::size_t>(state_dim_), "x_star");
}

void Model::validate(std::span<const double> theta) const {
  if (theta.size() != static_cast<std::size_t>(param_dim_)) {
    throw DomainError(name_ + ": expected " + std::to_string(param_dim_) + " parameters, got " +
                      std::to_string(theta.size()));
  }
  for (double v : theta) {
    if (!std::isfinite(v)) throw DomainError(name_ + ": non-finite parameter value");
  }
}

void Model::girsanov_drift(std::span<const double> theta, std::span<const double> x,
                           std::span<double> out) const {
  const auto b = girsanov_drift_dense(*this, theta, x);
  std::copy(b.begin(), b.end(), out.begin());
}

std::vector<double> girsanov_map(const Model& model, std::span<const double> x) {
  const int d = model.state_dim();
  RowMatrix sigma(d, d);
  model.diffusion(x, {sigma.data(), static_cast<std::size_t>(d * d)});
  const Eigen::MatrixXd cov = sigma * sigma.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0)) {
    throw EllipticityError(model.name() + ": Sigma(x) = sigma sigma^T is not positive definite");
  }
  const RowMatrix map = llt.solve(Eigen::MatrixXd(sigma.transpose()));
  return {map.data(), map.data() + d * d};
}

std::vector<double> girsanov_drift_dense(const Model& model, std::span<const double> theta,
                                         std::span<const double> x) {
  const int d = model.state_dim();
  const auto map = girsanov_map(model, x);
  std::vector<double> a(static_cast<std::size_t>(d));
  model.drift(theta, x, a);
  std::vector<double> b(static_cast<std::size_t>(d), 0.0);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) b[r] += map[r * d + c] * a[c];
  }
  return b;
}

DriftAndB eval_drift_and_b(const Model& model, const ParameterVector& theta,
                           std::span<const double> x) {
  const auto d = static_cast<std::size_t>(model.state_dim());
  require_size(x, d, "state");
  for (double v : x) {
    if (!std::isfinite(v)) throw ArgumentError("state must be finite");
  }
  // Ellipticity is checked for every model, including closed-form overrides.
  (void)girsanov_map(model, x);
  DriftAndB out{std::vector<double>(d), std::vector<double>(d)};
  model.drift(theta.values(), x, out.drift);
  model.girsanov_drift(theta.values(), x, out.b);
  return out;
}

BDerivatives eval_b_derivatives(const Model& model, const ParameterVector& theta,
                                std::span<const double> x) {
  const auto d = static_cast<std::size_t>(model.state_dim());
  const auto p = static_cast<std::size_t>(model.param_dim());
  require_size(x, d, "state");
  BDerivatives out{std::vector<double>(p * d), std::vector<double>(p * p * d)};
  model.girsanov_drift_grad(theta.values(), x, out.grad);
  model.girsanov_drift_hess(theta.values(), x, out.hess);
  return out;
}

ObsDensity obs_logdensity_and_derivs(const Model& model, const ParameterVector& theta,
                                     std::span<const double> x, std::span<const double> y) {
  const auto p = static_cast<std::size_t>(model.param_dim());
  require_size(x, static_cast<std::size_t>(model.state_dim()), "state");
  require_size(y, static_cast<std::size_t>(model.obs_dim()), "observation");
  ObsDensity out{0.0, std::vector<double>(p), std::vector<double>(p * p)};
  out.log_density = model.obs_logdens(theta.values(), x, y);
  model.obs_logdens_derivs(theta.values(), x, y, out.grad, out.hess);
  return out;
}

// ---------------------------------------------------------------------------

DiagonalGaussianModel::DiagonalGaussianModel(std::string name, int param_dim,
                                             std::vector<double> sigma, std::vector<double> x_star,
                                             int obs_variance_index)
    : Model(std::move(name), static_cast<int>(x_star.size()), static_cast<int>(x_star.size()),
            param_dim, x_star),
      sigma_(std::move(sigma)),
      obs_index_(obs_variance_index) {
  require_size(sigma_, static_cast<std::size_t>(state_dim()), "sigma");
  for (double s : sigma_) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ArgumentError("diffusion coefficients must be >= 0");
  }
}

void DiagonalGaussianModel::validate(std::span<const double> theta) const {
  Model::validate(theta);
  if (!(theta[obs_index_] > 0.0)) {
    throw DomainError(name() + ": observation variance theta[" + std::to_string(obs_index_ + 1) +
                      "] must be > 0, got " + std::to_string(theta[obs_index_]));
  }
}

void DiagonalGaussianModel::diffusion(std::span<const double> /*x*/, std::span<double> out) const {
  const std::size_t d = sigma_.size();
  std::fill(out.begin(), out.begin() + d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) out[i * d + i] = sigma_[i];
}

void DiagonalGaussianModel::girsanov_drift(std::span<const double> theta,
                                           std::span<const double> x,
                                           std::span<double> out) const {
  drift(theta, x, out);
  for (std::size_t i = 0; i < sigma_.size(); ++i) {
    if (sigma_[i] == 0.0) throw EllipticityError(name() + ": zero diffusion coefficient");
    out[i] /= sigma_[i];
  }
}

double DiagonalGaussianModel::obs_logdens(std::span<const double> theta, std::span<const double> x,
                                          std::span<const double> y) const {
  const double v = theta[obs_index_];
  if (!(v > 0.0)) throw DomainError(name() + ": observation variance must be > 0");
  double sq = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sq += (y[i] - x[i]) * (y[i] - x[i]);
  const double k = static_cast<double>(y.size());
  return -0.5 * k * std::log(2.0 * std::numbers::pi * v) - 0.5 * sq / v;
}

void DiagonalGaussianModel::obs_logdens_derivs(std::span<const double> theta,
                                               std::span<const double> x,
                                               std::span<const double> y, std::span<double> grad,
                                               std::span<double> hess) const {
  const double v = theta[obs_index_];
  if (!(v > 0.0)) throw DomainError(name() + ": observation variance must be > 0");
  double sq = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sq += (y[i] - x[i]) * (y[i] - x[i]);
  const double k = static_cast<double>(y.size());
  const auto p = static_cast<std::size_t>(param_dim());
  std::fill(grad.begin(), grad.begin() + p, 0.0);
  std::fill(hess.begin(), hess.begin() + p * p, 0.0);
  grad[obs_index_] = -0.5 * k / v + 0.5 * sq / (v * v);
  hess[obs_index_ * p + obs_index_] = 0.5 * k / (v * v) - sq / (v * v * v);
}

void DiagonalGaussianModel::sample_observation(std::span<const double> theta,
                                               std::span<const double> x, Rng& rng,
                                               std::span<double> out) const {
  const double sd = std::sqrt(theta[obs_index_]);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + sd * rng.normal();
}

// ---------------------------------------------------------------------------

OrnsteinUhlenbeck1D::OrnsteinUhlenbeck1D(double sigma, double x_star)
    : DiagonalGaussianModel("ou1d", 2, {sigma}, {x_star}, 1) {}

void OrnsteinUhlenbeck1D::drift(std::span<const double> theta, std::span<const double> x,
                                std::span<double> out) const {
  out[0] = -theta[0] * x[0];
}

void OrnsteinUhlenbeck1D::girsanov_drift_grad(std::span<const double> /*theta*/,
                                              std::span<const double> x,
                                              std::span<double> out) const {
  out[0] = -x[0] / sigma_[0];
  out[1] = 0.0;
}

void OrnsteinUhlenbeck1D::girsanov_drift_hess(std::span<const double> /*theta*/,
                                              std::span<const double> /*x*/,
                                              std::span<double> out) const {
  std::fill(out.begin(), out.begin() + 4, 0.0);
}

std::optional<LinearStructure> OrnsteinUhlenbeck1D::linear_structure(
    std::span<const double> theta) const {
  return LinearStructure{{-theta[0]}, {0.0}, theta[1]};
}

MultivariateOU2D::MultivariateOU2D(double sigma1, double sigma2, std::vector<double> x_star)
    : DiagonalGaussianModel("mou2d", 4, {sigma1, sigma2}, std::move(x_star), 3) {}

void MultivariateOU2D::drift(std::span<const double> theta, std::span<const double> x,
                             std::span<double> out) const {
  out[0] = theta[0] - theta[1] * x[0];
  out[1] = -theta[2] * x[1];
}

void MultivariateOU2D::girsanov_drift_grad(std::span<const double> /*theta*/,
                                           std::span<const double> x,
                                           std::span<double> out) const {
  std::fill(out.begin(), out.begin() + 8, 0.0);
  out[0 * 2 + 0] = 1.0 / sigma_[0];
  out[1 * 2 + 0] = -x[0] / sigma_[0];
  out[2 * 2 + 1] = -x[1] / sigma_[1];
}

void MultivariateOU2D::girsanov_drift_hess(std::span<const double> /*theta*/,
                                           std::span<const double> /*x*/,
                                           std::span<double> out) const {
  std::fill(out.begin(), out.begin() + 32, 0.0);
}

std::optional<LinearStructure> MultivariateOU2D::linear_structure(
    std::span<const double> theta) const {
  return LinearStructure{{-theta[1], 0.0, 0.0, -theta[2]}, {theta[0], 0.0}, theta[3]};
}

FitzHughNagumo::FitzHughNagumo(double sigma1, double sigma2, std::vector<double> x_star)
    : DiagonalGaussianModel("fhn", 4, {sigma1, sigma2}, std::move(x_star), 3) {}

void FitzHughNagumo::drift(std::span<const double> theta, std::span<const double> x,
                           std::span<double> out) const {
  out[0] = theta[0] * (x[0] - x[0] * x[0] * x[0] - x[1]);
  out[1] = theta[1] * x[0] - x[1] + theta[2];
}

void FitzHughNagumo::girsanov_drift_grad(std::span<const double> /*theta*/,
                                         std::span<const double> x, std::span<double> out) const {
  std::fill(out.begin(), out.begin() + 8, 0.0);
  out[0 * 2 + 0] = (x[0] - x[0] * x[0] * x[0] - x[1]) / sigma_[0];
  out[1 * 2 + 1] = x[0] / sigma_[1];
  out[2 * 2 + 1] = 1.0 / sigma_[1];
}

void FitzHughNagumo::girsanov_drift_hess(std::span<const double> /*theta*/,
                                         std::span<const double> /*x*/,
                                         std::span<double> out) const {
  std::fill(out.begin(), out.begin() + 32, 0.0);
}

// ---------------------------------------------------------------------------

std::vector<std::string> model_names() { return {"ou1d", "mou2d", "fhn"}; }

std::unique_ptr<Model> make_model(std::string_view name, const ModelOptions& options) {
  const auto sigma_or = [&](std::vector<double> fallback) {
    return options.sigma ? *options.sigma : fallback;
  };
  if (name == "ou1d") {
    const auto sigma = sigma_or({1.0});
    const auto x0 = options.x_star ? *options.x_star : std::vector<double>{1.0};
    if (sigma.size() != 1 || x0.size() != 1) throw ArgumentError("ou1d: sigma and x_star are scalars");
    return std::make_unique<OrnsteinUhlenbeck1D>(sigma[0], x0[0]);
  }
  if (name == "mou2d") {
    const auto sigma = sigma_or({0.8, 0.6});
    if (sigma.size() != 2) throw ArgumentError("mou2d: sigma must have 2 entries");
    return std::make_unique<MultivariateOU2D>(sigma[0], sigma[1],
                                              options.x_star.value_or(std::vector<double>{1.0, 1.0}));
  }
  if (name == "fhn") {
    const auto sigma = sigma_or({0.2, 0.4});
    if (sigma.size() != 2) throw ArgumentError("fhn: sigma must have 2 entries");
    return std::make_unique<FitzHughNagumo>(sigma[0], sigma[1],
                                            options.x_star.value_or(std::vector<double>{0.0, 0.0}));
  }
  throw ArgumentError("unknown model '" + std::string(name) + "' (expected ou1d, mou2d or fhn)");
}

std::vector<double> default_parameters(std::string_view name) {
  if (name == "ou1d") return {0.46, 0.38};
  if (name == "mou2d") return {0.48, 0.78, 0.37, 0.32};
  if (name == "fhn") return {0.89, 0.98, 0.5, 0.79};
  throw ArgumentError("unknown model '" + std::string(name) + "'");
}

}  // namespace ubhess
