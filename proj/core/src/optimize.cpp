#include "ubhess/optimize.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "ubhess/errors.hpp"
#include "ubhess/oracle.hpp"

namespace ubhess {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double relative_distance(std::span<const double> theta, const std::optional<std::vector<double>>& ref) {
  if (!ref) return std::numeric_limits<double>::quiet_NaN();
  double num = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) num += (theta[i] - (*ref)[i]) * (theta[i] - (*ref)[i]);
  return std::sqrt(num) / norm2(*ref);
}

using StepRule = std::function<std::vector<double>(const Derivatives&)>;

FitTrace run_fit(const DerivativeSource& source, const FitConfig& config, const StepRule& step) {
  config.validate();
  FitTrace trace;
  std::vector<double> theta = config.initial;
  for (std::size_t it = 0;; ++it) {
    Derivatives d;
    try {
      d = source(theta, it);
    } catch (const DomainError& e) {
      trace.status = FitStatus::kLeftDomain;
      trace.message = e.what();
      if (trace.iterations.empty()) throw;
      return trace;
    }
    if (d.score.size() != theta.size()) throw ArgumentError("derivative source returned a score of the wrong size");
    trace.cost += d.cost;
    FitIteration rec;
    rec.iteration = it;
    rec.theta = theta;
    rec.score_norm = norm2(d.score);
    rec.distance = relative_distance(theta, config.reference);
    trace.iterations.push_back(rec);

    const double criterion = config.reference ? rec.distance : rec.score_norm;
    if (criterion <= config.tolerance) {
      trace.status = FitStatus::kConverged;
      return trace;
    }
    if (it >= config.max_iterations) {
      trace.status = FitStatus::kMaxIterations;
      return trace;
    }
    const std::vector<double> delta = step(d);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += delta[i];
    const double size = norm2(theta);
    if (!std::isfinite(size) || size > config.divergence_bound) {
      trace.status = FitStatus::kDiverged;
      trace.message = "iterate norm exceeded " + std::to_string(config.divergence_bound);
      FitIteration last;
      last.iteration = it + 1;
      last.theta = theta;
      last.score_norm = std::numeric_limits<double>::quiet_NaN();
      last.distance = relative_distance(theta, config.reference);
      trace.iterations.push_back(last);
      return trace;
    }
  }
}

DerivativeSource estimator_source(const Model& model, const ObservationSequence& obs,
                                  const EstimatorConfig& est_config, bool want_hessian) {
  est_config.validate();
  return [&model, &obs, est_config, want_hessian](std::span<const double> theta, std::size_t it) {
    EstimatorConfig cfg = est_config;
    cfg.seed = derive_seed(est_config.seed, {static_cast<std::uint64_t>(it)});
    const ParameterVector p(model, std::vector<double>(theta.begin(), theta.end()));
    Derivatives d;
    if (want_hessian) {
      HessianEstimate est = estimate_hessian(model, p, obs, cfg);
      d.score = std::move(est.score);
      d.hessian = std::move(est.mean);
      d.cost = est.cost;
    } else {
      ScoreEstimate est = estimate_score(model, p, obs, cfg);
      d.score = std::move(est.mean);
      d.cost = est.cost;
    }
    return d;
  };
}

}  // namespace

std::string to_string(FitStatus status) {
  switch (status) {
    case FitStatus::kConverged: return "converged";
    case FitStatus::kMaxIterations: return "max_iterations";
    case FitStatus::kDiverged: return "diverged";
    case FitStatus::kLeftDomain: return "left_domain";
  }
  return "unknown";
}

void FitConfig::validate() const {
  if (initial.empty()) throw ArgumentError("fit needs an initial parameter vector");
  if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be > 0");
  if (!(tolerance >= 0.0)) throw ArgumentError("tolerance must be >= 0");
  if (!(newton.ridge >= 0.0)) throw ArgumentError("ridge must be >= 0");
  if (!(newton.small_gradient_rate > 0.0)) throw ArgumentError("small-gradient rate must be > 0");
  if (!(divergence_bound > 0.0)) throw ArgumentError("divergence bound must be > 0");
  if (reference) {
    if (reference->size() != initial.size()) throw ArgumentError("reference and initial sizes differ");
    if (!(norm2(*reference) > 0.0)) throw ArgumentError("reference parameter must be nonzero");
  }
}

std::vector<double> modified_information(std::span<const double> information, std::size_t dim,
                                         const NewtonModifications& mods) {
  if (information.size() != dim * dim) throw ArgumentError("information matrix has the wrong size");
  std::vector<double> out(information.begin(), information.end());
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      if (i != j && mods.diagonal_only) out[i * dim + j] = 0.0;
    }
    out[i * dim + i] += mods.ridge;
  }
  return out;
}

std::vector<double> newton_step(std::span<const double> information, std::span<const double> score,
                                const NewtonModifications& mods) {
  const std::size_t d = score.size();
  const std::vector<double> h = modified_information(information, d, mods);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> H(
      h.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  const Eigen::Map<const Eigen::VectorXd> g(score.data(), static_cast<Eigen::Index>(d));
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
  if (!lu.isInvertible()) throw NumericalDivergence("modified information matrix is singular");
  Eigen::VectorXd step = lu.solve(g);
  if (mods.small_gradient_threshold && g.norm() < *mods.small_gradient_threshold) {
    step *= mods.small_gradient_rate;
  }
  return {step.data(), step.data() + step.size()};
}

FitTrace sgd_fit(const DerivativeSource& source, const FitConfig& config) {
  const double eta = config.learning_rate;
  return run_fit(source, config, [eta](const Derivatives& d) {
    std::vector<double> delta(d.score);
    for (double& v : delta) v *= eta;
    return delta;
  });
}

FitTrace newton_fit(const DerivativeSource& source, const FitConfig& config) {
  const NewtonModifications mods = config.newton;
  return run_fit(source, config, [mods](const Derivatives& d) {
    if (d.hessian.size() != d.score.size() * d.score.size()) {
      throw ArgumentError("Newton fit needs an information matrix from the derivative source");
    }
    return newton_step(d.hessian, d.score, mods);
  });
}

FitTrace sgd_fit(const Model& model, const ObservationSequence& obs,
                 const EstimatorConfig& est_config, const FitConfig& fit_config) {
  return sgd_fit(estimator_source(model, obs, est_config, false), fit_config);
}

FitTrace newton_fit(const Model& model, const ObservationSequence& obs,
                    const EstimatorConfig& est_config, const FitConfig& fit_config) {
  return newton_fit(estimator_source(model, obs, est_config, true), fit_config);
}

DerivativeSource oracle_source(const Model& model, const ObservationSequence& obs) {
  return [&model, &obs](std::span<const double> theta, std::size_t) {
    model.validate(theta);
    OracleDerivatives o = oracle_derivatives(model, theta, obs);
    Derivatives d;
    d.score = std::move(o.score);
    d.hessian = std::move(o.hessian);
    return d;
  };
}

}  // namespace ubhess
