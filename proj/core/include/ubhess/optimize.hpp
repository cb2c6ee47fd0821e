#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ubhess/estimator.hpp"
#include "ubhess/model.hpp"

namespace ubhess {

// Adjustments applied to the estimated information matrix before a Newton step.
struct NewtonModifications {
  bool diagonal_only = false;
  double ridge = 0.0;
  // When the score norm drops below the threshold the Newton step is multiplied
  // by small_gradient_rate.
  std::optional<double> small_gradient_threshold;
  double small_gradient_rate = 0.002;
};

struct FitConfig {
  std::vector<double> initial;
  double learning_rate = 0.002;
  std::size_t max_iterations = 100;
  // Stops once ||theta - reference|| / ||reference|| <= tolerance, or, without a
  // reference, once the score norm is <= tolerance.
  double tolerance = 0.02;
  std::optional<std::vector<double>> reference;
  NewtonModifications newton;
  double divergence_bound = 1e6;

  void validate() const;
};

struct FitIteration {
  std::size_t iteration = 0;
  std::vector<double> theta;
  double score_norm = 0.0;
  // Relative distance to the reference, NaN without one.
  double distance = 0.0;
};

enum class FitStatus { kConverged, kMaxIterations, kDiverged, kLeftDomain };

std::string to_string(FitStatus status);

struct FitTrace {
  std::vector<FitIteration> iterations;  // iterate 0 is the initial point
  FitStatus status = FitStatus::kMaxIterations;
  std::string message;
  CostCounter cost;

  const std::vector<double>& final_theta() const { return iterations.back().theta; }
  // Number of updates performed before the stopping rule fired.
  std::size_t steps() const noexcept { return iterations.empty() ? 0 : iterations.size() - 1; }
  bool converged() const noexcept { return status == FitStatus::kConverged; }
};

// Derivatives of the log-likelihood supplied to the fitting loops. `hessian` is
// minus the Hessian (the information), d x d row-major; score sources may leave
// it empty.
struct Derivatives {
  std::vector<double> score;
  std::vector<double> hessian;
  CostCounter cost;
};

// Called with the current iterate and the iteration index (0-based).
using DerivativeSource = std::function<Derivatives(std::span<const double>, std::size_t)>;

// Gradient ascent theta <- theta + eta * score.
FitTrace sgd_fit(const DerivativeSource& source, const FitConfig& config);
// theta <- theta + H_mod^{-1} score.
FitTrace newton_fit(const DerivativeSource& source, const FitConfig& config);

// Fits driven by the unbiased estimators; iteration k uses the estimator seed
// derive_seed(est_config.seed, {k}).
FitTrace sgd_fit(const Model& model, const ObservationSequence& obs,
                 const EstimatorConfig& est_config, const FitConfig& fit_config);
FitTrace newton_fit(const Model& model, const ObservationSequence& obs,
                    const EstimatorConfig& est_config, const FitConfig& fit_config);

// Derivatives from the exact-transition Kalman oracle (linear models only).
DerivativeSource oracle_source(const Model& model, const ObservationSequence& obs);

// The matrix actually inverted by newton_fit, d x d row-major.
std::vector<double> modified_information(std::span<const double> information, std::size_t dim,
                                         const NewtonModifications& mods);

// Solves H_mod step = score. Throws NumericalDivergence if H_mod is singular.
std::vector<double> newton_step(std::span<const double> information, std::span<const double> score,
                                const NewtonModifications& mods);

}  // namespace ubhess
