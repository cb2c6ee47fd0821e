#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ubhess/functionals.hpp"
#include "ubhess/grid_path.hpp"
#include "ubhess/model.hpp"

namespace ubhess {

// Unit-time linear-Gaussian transition x_{k+1} = F x_k + c + w, w ~ N(0, Q),
// observed through y = x + N(0, v I), started deterministically at x0.
struct LinearGaussianSpec {
  int dim = 1;
  std::vector<double> transition;  // F, d x d row-major
  std::vector<double> offset;      // c
  std::vector<double> covariance;  // Q, d x d row-major
  std::vector<double> x0;
  double obs_variance = 1.0;
};

// Exact transition of the linear SDE over one time unit (matrix exponential and
// Van Loan integral). Throws ArgumentError if the model has no linear structure.
LinearGaussianSpec exact_transition_spec(const Model& model, std::span<const double> theta);

// Composition of 2^level Euler steps of size 2^-level: the exact law of the
// level-`level` discretized chain at integer times.
LinearGaussianSpec euler_transition_spec(const Model& model, std::span<const double> theta,
                                         int level);

// Exact marginal log-likelihood log p(y_1..y_n). Throws NumericalDivergence when
// an innovation covariance is not positive definite.
double kalman_loglik(const LinearGaussianSpec& spec, const ObservationSequence& obs);

struct FdResult {
  std::vector<double> gradient;
  std::vector<double> hessian;  // d x d row-major, exactly symmetric
};

// Central differences with step h in every coordinate.
FdResult fd_grad_hess(const std::function<double(std::span<const double>)>& f,
                      std::span<const double> theta, double h = 1e-4);

struct OracleDerivatives {
  double loglik = 0.0;
  std::vector<double> score;    // gradient of log-likelihood
  std::vector<double> hessian;  // minus the Hessian of log-likelihood, d x d
};

// Derivatives of the Kalman log-likelihood by Richardson-extrapolated central
// differences (steps h and h/2). The transition is exact for std::nullopt and
// the composed Euler scheme at the given level otherwise.
OracleDerivatives oracle_derivatives(const Model& model, std::span<const double> theta,
                                     const ObservationSequence& obs,
                                     std::optional<int> euler_level = std::nullopt,
                                     double h = 1e-4);

double oracle_loglik(const Model& model, std::span<const double> theta,
                     const ObservationSequence& obs, std::optional<int> euler_level = std::nullopt);

// Smoothing expectations pi^l(G), pi^l(GG), pi^l(H) under the level-l Euler model.
struct TargetMoments {
  FunctionalBundle mean;
  FunctionalBundle std_error;  // zero for quadrature
  std::size_t evaluations = 0;
};

// Probabilists' Gauss-Hermite rule for N(0, 1): nodes and weights summing to one.
void gauss_hermite(std::size_t count, std::vector<double>& nodes, std::vector<double>& weights);

// Tensor Gauss-Hermite quadrature over the level-0 prior path (n * d dimensions).
TargetMoments target_moments_quadrature(const Model& model, std::span<const double> theta,
                                        const ObservationSequence& obs, std::size_t nodes = 24);

// Self-normalized importance sampling with the Euler prior as proposal.
TargetMoments target_moments_monte_carlo(const Model& model, std::span<const double> theta,
                                         const ObservationSequence& obs, int level,
                                         std::size_t samples, std::uint64_t seed);

// Quadrature at level 0 when n * d <= 4, Monte Carlo with 1e6 samples otherwise.
// Intended for n <= 3 and level <= 2.
TargetMoments discrete_target_moments(const Model& model, std::span<const double> theta,
                                      const ObservationSequence& obs, int level,
                                      std::uint64_t seed = 0);

}  // namespace ubhess
