#include "ubhess/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <unsupported/Eigen/MatrixFunctions>

#include "ubhess/discretization.hpp"
#include "ubhess/errors.hpp"
#include "ubhess/rng.hpp"

namespace ubhess {

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LinearPieces {
  Matrix A;
  Vector c;
  Matrix S;  // sigma sigma^T
  double v;
};

LinearPieces linear_pieces(const Model& model, std::span<const double> theta) {
  model.validate(theta);
  if (!model.constant_diffusion()) throw ArgumentError(model.name() + ": oracle needs constant diffusion");
  const auto lin = model.linear_structure(theta);
  if (!lin) throw ArgumentError(model.name() + ": no linear-Gaussian oracle for this model");
  const int d = model.state_dim();
  RowMatrix sigma(d, d);
  model.diffusion(model.x_star(), {sigma.data(), static_cast<std::size_t>(d * d)});
  LinearPieces p;
  p.A = Eigen::Map<const RowMatrix>(lin->drift_matrix.data(), d, d);
  p.c = Eigen::Map<const Vector>(lin->drift_offset.data(), d);
  p.S = sigma * sigma.transpose();
  p.v = lin->obs_variance;
  return p;
}

LinearGaussianSpec to_spec(const Model& model, const Matrix& F, const Vector& c, const Matrix& Q,
                           double v) {
  const int d = model.state_dim();
  LinearGaussianSpec spec;
  spec.dim = d;
  const RowMatrix Fr = F;
  const RowMatrix Qr = 0.5 * (Q + Q.transpose());
  spec.transition.assign(Fr.data(), Fr.data() + d * d);
  spec.offset.assign(c.data(), c.data() + d);
  spec.covariance.assign(Qr.data(), Qr.data() + d * d);
  spec.x0.assign(model.x_star().begin(), model.x_star().end());
  spec.obs_variance = v;
  return spec;
}

}  // namespace

LinearGaussianSpec exact_transition_spec(const Model& model, std::span<const double> theta) {
  const LinearPieces p = linear_pieces(model, theta);
  const auto d = p.A.rows();
  // exp([[A, c], [0, 0]]) carries e^A and int_0^1 e^{As} ds c.
  Matrix aug = Matrix::Zero(d + 1, d + 1);
  aug.topLeftCorner(d, d) = p.A;
  aug.topRightCorner(d, 1) = p.c;
  const Matrix aug_exp = aug.exp();
  // Van Loan: exp([[-A, S], [0, A^T]]) = [[., G], [0, e^{A^T}]], Q = e^A G.
  Matrix vl = Matrix::Zero(2 * d, 2 * d);
  vl.topLeftCorner(d, d) = -p.A;
  vl.topRightCorner(d, d) = p.S;
  vl.bottomRightCorner(d, d) = p.A.transpose();
  const Matrix vl_exp = vl.exp();
  const Matrix F = vl_exp.bottomRightCorner(d, d).transpose();
  const Matrix Q = F * vl_exp.topRightCorner(d, d);
  return to_spec(model, aug_exp.topLeftCorner(d, d), aug_exp.topRightCorner(d, 1), Q, p.v);
}

LinearGaussianSpec euler_transition_spec(const Model& model, std::span<const double> theta,
                                         int level) {
  if (level < 0 || level > 30) throw ArgumentError("Euler oracle level must be in [0, 30]");
  const LinearPieces p = linear_pieces(model, theta);
  const auto d = p.A.rows();
  const double delta = std::ldexp(1.0, -level);
  const Matrix step = Matrix::Identity(d, d) + delta * p.A;
  Matrix F = Matrix::Identity(d, d);
  Vector c = Vector::Zero(d);
  Matrix Q = Matrix::Zero(d, d);
  const std::size_t steps = std::size_t{1} << level;
  for (std::size_t k = 0; k < steps; ++k) {
    F = step * F;
    c = step * c + delta * p.c;
    Q = step * Q * step.transpose() + delta * p.S;
  }
  return to_spec(model, F, c, Q, p.v);
}

double kalman_loglik(const LinearGaussianSpec& spec, const ObservationSequence& obs) {
  const int d = spec.dim;
  if (obs.dim() != d) throw ArgumentError("observation dimension does not match the oracle");
  if (!(spec.obs_variance > 0.0)) throw DomainError("observation variance must be positive");
  const Matrix F = Eigen::Map<const RowMatrix>(spec.transition.data(), d, d);
  const Matrix Q = Eigen::Map<const RowMatrix>(spec.covariance.data(), d, d);
  const Vector c = Eigen::Map<const Vector>(spec.offset.data(), d);
  Vector m = Eigen::Map<const Vector>(spec.x0.data(), d);
  Matrix P = Matrix::Zero(d, d);
  double loglik = 0.0;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    m = F * m + c;
    P = F * P * F.transpose() + Q;
    Matrix S = P;
    S.diagonal().array() += spec.obs_variance;
    const Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) {
      throw NumericalDivergence("Kalman innovation covariance is not positive definite");
    }
    const Vector y = Eigen::Map<const Vector>(obs[t].data(), d);
    const Vector innov = y - m;
    const Vector solved = llt.solve(innov);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    loglik += -0.5 * (d * std::log(2.0 * std::numbers::pi) + logdet + innov.dot(solved));
    const Matrix K = llt.solve(P).transpose();  // P S^{-1}
    m += K * innov;
    P = P - K * P;
    P = 0.5 * (P + P.transpose());
  }
  return loglik;
}

FdResult fd_grad_hess(const std::function<double(std::span<const double>)>& f,
                      std::span<const double> theta, double h) {
  const std::size_t p = theta.size();
  std::vector<double> x(theta.begin(), theta.end());
  auto eval = [&](std::size_t i, double di, std::size_t j, double dj) {
    x[i] += di;
    x[j] += dj;
    const double v = f(x);
    x[i] -= di;
    x[j] -= dj;
    return v;
  };
  const double f0 = f(x);
  FdResult out{std::vector<double>(p), std::vector<double>(p * p)};
  for (std::size_t i = 0; i < p; ++i) {
    const double plus = eval(i, h, i, 0.0);
    const double minus = eval(i, -h, i, 0.0);
    out.gradient[i] = (plus - minus) / (2.0 * h);
    out.hessian[i * p + i] = (plus - 2.0 * f0 + minus) / (h * h);
    for (std::size_t j = 0; j < i; ++j) {
      const double v = (eval(i, h, j, h) - eval(i, h, j, -h) - eval(i, -h, j, h) + eval(i, -h, j, -h)) /
                       (4.0 * h * h);
      out.hessian[i * p + j] = v;
      out.hessian[j * p + i] = v;
    }
  }
  return out;
}

double oracle_loglik(const Model& model, std::span<const double> theta,
                     const ObservationSequence& obs, std::optional<int> euler_level) {
  const LinearGaussianSpec spec = euler_level ? euler_transition_spec(model, theta, *euler_level)
                                              : exact_transition_spec(model, theta);
  return kalman_loglik(spec, obs);
}

OracleDerivatives oracle_derivatives(const Model& model, std::span<const double> theta,
                                     const ObservationSequence& obs, std::optional<int> euler_level,
                                     double h) {
  auto f = [&](std::span<const double> t) { return oracle_loglik(model, t, obs, euler_level); };
  const FdResult coarse = fd_grad_hess(f, theta, h);
  const FdResult fine = fd_grad_hess(f, theta, h / 2.0);
  // Richardson extrapolation cancels the O(h^2) term of both central schemes.
  const auto extrapolate = [](double c, double fn) { return (4.0 * fn - c) / 3.0; };
  OracleDerivatives out;
  out.loglik = f(theta);
  out.score.resize(coarse.gradient.size());
  for (std::size_t i = 0; i < out.score.size(); ++i) {
    out.score[i] = extrapolate(coarse.gradient[i], fine.gradient[i]);
  }
  out.hessian.resize(coarse.hessian.size());
  for (std::size_t k = 0; k < out.hessian.size(); ++k) {
    out.hessian[k] = -extrapolate(coarse.hessian[k], fine.hessian[k]);
  }
  return out;
}

void gauss_hermite(std::size_t count, std::vector<double>& nodes, std::vector<double>& weights) {
  if (count == 0) throw ArgumentError("Gauss-Hermite rule needs at least one node");
  Matrix J = Matrix::Zero(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(count));
  for (std::size_t k = 1; k < count; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    J(i - 1, i) = J(i, i - 1) = std::sqrt(static_cast<double>(k));
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(J);
  nodes.resize(count);
  weights.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    nodes[k] = eig.eigenvalues()(i);
    const double v0 = eig.eigenvectors()(0, i);
    weights[k] = v0 * v0;
  }
}

TargetMoments target_moments_quadrature(const Model& model, std::span<const double> theta,
                                        const ObservationSequence& obs, std::size_t nodes) {
  model.validate(theta);
  const auto d = static_cast<std::size_t>(model.state_dim());
  const std::size_t n = obs.size();
  const std::size_t dims = n * d;
  if (dims > 6) throw ArgumentError("tensor quadrature limited to n * d <= 6");
  std::vector<double> z, w;
  gauss_hermite(nodes, z, w);
  std::vector<double> sigma(d * d), drift(d), noise(d);
  model.diffusion(model.x_star(), sigma);

  const auto p = static_cast<std::size_t>(model.param_dim());
  FunctionalBundle num(p), f(p);
  std::size_t total = 1;
  for (std::size_t k = 0; k < dims; ++k) total *= nodes;
  std::vector<double> log_mass(total);
  std::vector<std::size_t> idx(dims, 0);
  GridPath path(0, static_cast<int>(d), n);
  TargetMoments out;
  out.mean = FunctionalBundle(p);
  out.std_error = FunctionalBundle(p);

  // Two passes: log-weights first (for a stable normalization), then moments.
  double top = -INFINITY;
  for (int pass = 0; pass < 2; ++pass) {
    std::fill(idx.begin(), idx.end(), 0);
    double norm = 0.0;
    for (std::size_t q = 0; q < total; ++q) {
      double log_prior_w = 0.0;
      std::copy(model.x_star().begin(), model.x_star().end(), path.values.begin());
      for (std::size_t t = 0; t < n; ++t) {
        const auto prev = path.state(t);
        model.drift(theta, prev, drift);
        for (std::size_t c = 0; c < d; ++c) {
          noise[c] = z[idx[t * d + c]];
          log_prior_w += std::log(w[idx[t * d + c]]);
        }
        auto next = path.state(t + 1);
        for (std::size_t r = 0; r < d; ++r) {
          double s = 0.0;
          for (std::size_t c = 0; c < d; ++c) s += sigma[r * d + c] * noise[c];
          next[r] = prev[r] + drift[r] + s;
        }
      }
      if (pass == 0) {
        double lphi = 0.0;
        for (std::size_t t = 0; t < n; ++t) lphi += model.obs_logdens(theta, path.at_time(t + 1), obs[t]);
        log_mass[q] = log_prior_w + lphi;
        top = std::max(top, log_mass[q]);
      } else {
        const double m = std::exp(log_mass[q] - top);
        norm += m;
        evaluate_functionals(model, theta, path, obs, true, f);
        num.add_scaled(f, m);
      }
      for (std::size_t k = dims; k-- > 0;) {
        if (++idx[k] < nodes) break;
        idx[k] = 0;
      }
    }
    if (pass == 1) out.mean.add_scaled(num, 1.0 / norm);
  }
  out.evaluations = total;
  return out;
}

TargetMoments target_moments_monte_carlo(const Model& model, std::span<const double> theta,
                                         const ObservationSequence& obs, int level,
                                         std::size_t samples, std::uint64_t seed) {
  model.validate(theta);
  if (samples < 2) throw ArgumentError("Monte Carlo oracle needs at least two samples");
  const auto p = static_cast<std::size_t>(model.param_dim());
  const std::size_t width = p + 2 * num_pairs(p);
  Rng rng(seed);
  std::vector<double> log_w(samples);
  std::vector<double> values(samples * width);
  FunctionalBundle f(p);
  for (std::size_t s = 0; s < samples; ++s) {
    const GridPath path = draw_prior_path(model, theta, obs.size(), level, rng);
    double lphi = 0.0;
    for (std::size_t t = 0; t < obs.size(); ++t) lphi += model.obs_logdens(theta, path.at_time(t + 1), obs[t]);
    log_w[s] = lphi;
    evaluate_functionals(model, theta, path, obs, true, f);
    const auto flat = f.flatten();
    std::copy(flat.begin(), flat.end(), values.begin() + static_cast<std::ptrdiff_t>(s * width));
  }
  double top = -INFINITY;
  for (double lw : log_w) top = std::max(top, lw);
  double wsum = 0.0;
  for (double& lw : log_w) {
    lw = std::exp(lw - top);
    wsum += lw;
  }
  std::vector<double> mean(width, 0.0), var(width, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t c = 0; c < width; ++c) mean[c] += log_w[s] * values[s * width + c];
  }
  for (double& m : mean) m /= wsum;
  // Delta-method variance of the self-normalized estimator.
  for (std::size_t s = 0; s < samples; ++s) {
    const double wn = log_w[s] / wsum;
    for (std::size_t c = 0; c < width; ++c) {
      const double dev = values[s * width + c] - mean[c];
      var[c] += wn * wn * dev * dev;
    }
  }
  TargetMoments out;
  out.mean = FunctionalBundle(p);
  out.std_error = FunctionalBundle(p);
  auto unflatten = [&](const std::vector<double>& src, FunctionalBundle& dst, bool root) {
    std::size_t c = 0;
    for (double& v : dst.G) v = root ? std::sqrt(src[c++]) : src[c++];
    for (double& v : dst.GG) v = root ? std::sqrt(src[c++]) : src[c++];
    for (double& v : dst.H) v = root ? std::sqrt(src[c++]) : src[c++];
  };
  unflatten(mean, out.mean, false);
  unflatten(var, out.std_error, true);
  out.evaluations = samples;
  return out;
}

TargetMoments discrete_target_moments(const Model& model, std::span<const double> theta,
                                      const ObservationSequence& obs, int level, std::uint64_t seed) {
  if (level == 0 && obs.size() * static_cast<std::size_t>(model.state_dim()) <= 4) {
    return target_moments_quadrature(model, theta, obs);
  }
  return target_moments_monte_carlo(model, theta, obs, level, 1'000'000, seed);
}

}  // namespace ubhess
