#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ubhess/grid_path.hpp"
#include "ubhess/rng.hpp"

namespace ubhess {

class Model;

// theta in R^{d_theta}, checked against a model's admissible set on construction.
class ParameterVector {
 public:
  ParameterVector(const Model& model, std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

 private:
  std::vector<double> values_;
};

// Drift of the form A x + c plus Gaussian observations N(x, v I); exposed by
// models for which the linear-Gaussian oracle applies.
struct LinearStructure {
  std::vector<double> drift_matrix;  // d x d, row-major
  std::vector<double> drift_offset;  // d
  double obs_variance = 1.0;
};

// A partially observed diffusion
//   dX = a_theta(X) dt + sigma(X) dW,  X_0 = x_star,  Y_p | X_p ~ g_theta(. | X_p).
// Implementations are immutable after construction and may be shared across threads.
// All tensors are flat row-major buffers; callers provide the output storage.
class Model {
 public:
  Model(std::string name, int state_dim, int obs_dim, int param_dim, std::vector<double> x_star);
  virtual ~Model() = default;

  const std::string& name() const noexcept { return name_; }
  int state_dim() const noexcept { return state_dim_; }
  int obs_dim() const noexcept { return obs_dim_; }
  int param_dim() const noexcept { return param_dim_; }
  std::span<const double> x_star() const noexcept { return x_star_; }

  // Throws DomainError when theta is outside the admissible set.
  virtual void validate(std::span<const double> theta) const;

  virtual void drift(std::span<const double> theta, std::span<const double> x,
                     std::span<double> out) const = 0;
  // sigma(x), d x d row-major.
  virtual void diffusion(std::span<const double> x, std::span<double> out) const = 0;
  virtual bool constant_diffusion() const noexcept { return false; }

  // b_theta(x) = Sigma(x)^{-1} sigma(x)^T a_theta(x). The default performs a dense
  // factorization of Sigma(x); models with closed forms override it.
  virtual void girsanov_drift(std::span<const double> theta, std::span<const double> x,
                              std::span<double> out) const;
  // d_theta x d tensor: out[i*d + j] = d b^(j) / d theta^(i).
  virtual void girsanov_drift_grad(std::span<const double> theta, std::span<const double> x,
                                   std::span<double> out) const = 0;
  // d_theta x d_theta x d tensor: out[(i*d_theta + j)*d + c] = d^2 b^(c) / d theta^(i) d theta^(j).
  virtual void girsanov_drift_hess(std::span<const double> theta, std::span<const double> x,
                                   std::span<double> out) const = 0;

  virtual double obs_logdens(std::span<const double> theta, std::span<const double> x,
                             std::span<const double> y) const = 0;
  // grad: d_theta; hess: d_theta x d_theta row-major.
  virtual void obs_logdens_derivs(std::span<const double> theta, std::span<const double> x,
                                  std::span<const double> y, std::span<double> grad,
                                  std::span<double> hess) const = 0;
  virtual void sample_observation(std::span<const double> theta, std::span<const double> x,
                                  Rng& rng, std::span<double> out) const = 0;

  virtual std::optional<LinearStructure> linear_structure(std::span<const double> theta) const {
    (void)theta;
    return std::nullopt;
  }

 private:
  std::string name_;
  int state_dim_;
  int obs_dim_;
  int param_dim_;
  std::vector<double> x_star_;
};

// Sigma(x)^{-1} sigma(x)^T via a dense Cholesky solve (d x d, row-major).
// Throws EllipticityError if Sigma(x) is not positive definite.
std::vector<double> girsanov_map(const Model& model, std::span<const double> x);

// b = Sigma^{-1} sigma^T a computed from drift() and diffusion() only.
std::vector<double> girsanov_drift_dense(const Model& model, std::span<const double> theta,
                                         std::span<const double> x);

struct DriftAndB {
  std::vector<double> drift;
  std::vector<double> b;
};

struct BDerivatives {
  std::vector<double> grad;  // d_theta x d
  std::vector<double> hess;  // d_theta x d_theta x d
};

struct ObsDensity {
  double log_density = 0.0;
  std::vector<double> grad;  // d_theta
  std::vector<double> hess;  // d_theta x d_theta
};

DriftAndB eval_drift_and_b(const Model& model, const ParameterVector& theta,
                           std::span<const double> x);
BDerivatives eval_b_derivatives(const Model& model, const ParameterVector& theta,
                                std::span<const double> x);
ObsDensity obs_logdensity_and_derivs(const Model& model, const ParameterVector& theta,
                                     std::span<const double> x, std::span<const double> y);

// Built-in models: constant diagonal diffusion and Gaussian observations
// N(x, theta[obs_index] I) with a positive variance entry.
class DiagonalGaussianModel : public Model {
 public:
  DiagonalGaussianModel(std::string name, int param_dim, std::vector<double> sigma,
                        std::vector<double> x_star, int obs_variance_index);

  void validate(std::span<const double> theta) const override;
  void diffusion(std::span<const double> x, std::span<double> out) const override;
  bool constant_diffusion() const noexcept override { return true; }
  void girsanov_drift(std::span<const double> theta, std::span<const double> x,
                      std::span<double> out) const override;
  double obs_logdens(std::span<const double> theta, std::span<const double> x,
                     std::span<const double> y) const override;
  void obs_logdens_derivs(std::span<const double> theta, std::span<const double> x,
                          std::span<const double> y, std::span<double> grad,
                          std::span<double> hess) const override;
  void sample_observation(std::span<const double> theta, std::span<const double> x, Rng& rng,
                          std::span<double> out) const override;

  std::span<const double> sigma() const noexcept { return sigma_; }
  int obs_variance_index() const noexcept { return obs_index_; }

 protected:
  std::vector<double> sigma_;
  int obs_index_;
};

// dX = -theta1 X dt + sigma dW,  Y | X ~ N(X, theta2).
class OrnsteinUhlenbeck1D final : public DiagonalGaussianModel {
 public:
  explicit OrnsteinUhlenbeck1D(double sigma = 1.0, double x_star = 1.0);

  void drift(std::span<const double> theta, std::span<const double> x,
             std::span<double> out) const override;
  void girsanov_drift_grad(std::span<const double> theta, std::span<const double> x,
                           std::span<double> out) const override;
  void girsanov_drift_hess(std::span<const double> theta, std::span<const double> x,
                           std::span<double> out) const override;
  std::optional<LinearStructure> linear_structure(std::span<const double> theta) const override;
};

// dX1 = (theta1 - theta2 X1) dt + sigma1 dW1,  dX2 = -theta3 X2 dt + sigma2 dW2,
// Y | X ~ N_2(X, theta4 I).
class MultivariateOU2D final : public DiagonalGaussianModel {
 public:
  MultivariateOU2D(double sigma1 = 0.8, double sigma2 = 0.6, std::vector<double> x_star = {1.0, 1.0});

  void drift(std::span<const double> theta, std::span<const double> x,
             std::span<double> out) const override;
  void girsanov_drift_grad(std::span<const double> theta, std::span<const double> x,
                           std::span<double> out) const override;
  void girsanov_drift_hess(std::span<const double> theta, std::span<const double> x,
                           std::span<double> out) const override;
  std::optional<LinearStructure> linear_structure(std::span<const double> theta) const override;
};

// Stochastic FitzHugh-Nagumo:
//   dX1 = theta1 (X1 - X1^3 - X2) dt + sigma1 dW1,
//   dX2 = (theta2 X1 - X2 + theta3) dt + sigma2 dW2,   Y | X ~ N_2(X, theta4 I).
class FitzHughNagumo final : public DiagonalGaussianModel {
 public:
  FitzHughNagumo(double sigma1 = 0.2, double sigma2 = 0.4, std::vector<double> x_star = {0.0, 0.0});

  void drift(std::span<const double> theta, std::span<const double> x,
             std::span<double> out) const override;
  void girsanov_drift_grad(std::span<const double> theta, std::span<const double> x,
                           std::span<double> out) const override;
  void girsanov_drift_hess(std::span<const double> theta, std::span<const double> x,
                           std::span<double> out) const override;
};

struct ModelOptions {
  std::optional<std::vector<double>> sigma;
  std::optional<std::vector<double>> x_star;
};

// "ou1d", "mou2d" or "fhn". Throws ArgumentError for unknown names.
std::unique_ptr<Model> make_model(std::string_view name, const ModelOptions& options = {});

// Parameter values used to generate data in the reference experiments.
std::vector<double> default_parameters(std::string_view name);

std::vector<std::string> model_names();

// Euler simulation at the given level from x_star plus observations at integer
// times 1..n; fully determined by the seed.
struct SimulatedData {
  ObservationSequence observations;
  GridPath latent;
};
SimulatedData simulate_observations(const Model& model, const ParameterVector& theta, int level,
                                    std::size_t n, std::uint64_t seed);

}  // namespace ubhess
