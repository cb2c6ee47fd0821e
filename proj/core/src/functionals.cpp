#include "ubhess/functionals.hpp"

#include <string>

#include "ubhess/errors.hpp"

namespace ubhess {

namespace {

void check_shapes(const Model& model, const GridPath& path, const ObservationSequence& obs) {
  if (path.dim != model.state_dim()) throw ArgumentError("path dimension does not match the model");
  if (obs.dim() != model.obs_dim()) throw ArgumentError("observation dimension does not match the model");
  if (path.num_points() < 2 || (path.num_points() - 1) % path.steps_per_unit() != 0) {
    throw ArgumentError("path length is not a whole number of unit intervals");
  }
  if (path.horizon() != obs.size()) {
    throw ArgumentError("path covers " + std::to_string(path.horizon()) + " time units but there are " +
                        std::to_string(obs.size()) + " observations");
  }
}

// Per-path scratch: b and its derivatives at one grid point plus the
// theta-independent map w = Sigma^{-1} sigma^T (x_{k+1} - x_k).
struct Scratch {
  std::vector<double> b, db, d2b, map, w, obs_grad, obs_hess;
  Scratch(std::size_t d, std::size_t p)
      : b(d), db(p * d), d2b(p * p * d), map(d * d), w(d), obs_grad(p), obs_hess(p * p) {}
};

}  // namespace

void FunctionalBundle::add_scaled(const FunctionalBundle& other, double scale) {
  for (std::size_t i = 0; i < G.size(); ++i) G[i] += scale * other.G[i];
  for (std::size_t i = 0; i < GG.size(); ++i) GG[i] += scale * other.GG[i];
  for (std::size_t i = 0; i < H.size(); ++i) H[i] += scale * other.H[i];
}

void FunctionalBundle::add_difference(const FunctionalBundle& a, const FunctionalBundle& b) {
  for (std::size_t i = 0; i < G.size(); ++i) G[i] += a.G[i] - b.G[i];
  for (std::size_t i = 0; i < GG.size(); ++i) GG[i] += a.GG[i] - b.GG[i];
  for (std::size_t i = 0; i < H.size(); ++i) H[i] += a.H[i] - b.H[i];
}

std::vector<double> FunctionalBundle::flatten() const {
  std::vector<double> out;
  out.reserve(G.size() + GG.size() + H.size());
  out.insert(out.end(), G.begin(), G.end());
  out.insert(out.end(), GG.begin(), GG.end());
  out.insert(out.end(), H.begin(), H.end());
  return out;
}

double log_phi(const Model& model, const ParameterVector& theta, const GridPath& path,
               const ObservationSequence& obs) {
  check_shapes(model, path, obs);
  double total = 0.0;
  for (std::size_t p = 0; p < obs.size(); ++p) {
    total += model.obs_logdens(theta.values(), path.at_time(p + 1), obs[p]);
  }
  return total;
}

double log_rho(const Model& model, const ParameterVector& theta, const GridPath& path,
               const ObservationSequence& obs) {
  const double obs_term = log_phi(model, theta, path, obs);
  const auto d = static_cast<std::size_t>(model.state_dim());
  const double delta = path.delta();
  std::vector<double> b(d);
  double riemann = 0.0;
  double stochastic = 0.0;
  for (std::size_t k = 0; k + 1 < path.num_points(); ++k) {
    const auto x = path.state(k);
    const auto x_next = path.state(k + 1);
    model.girsanov_drift(theta.values(), x, b);
    const auto map = girsanov_map(model, x);
    for (std::size_t r = 0; r < d; ++r) {
      riemann += b[r] * b[r];
      double w = 0.0;
      for (std::size_t c = 0; c < d; ++c) w += map[r * d + c] * (x_next[c] - x[c]);
      stochastic += b[r] * w;
    }
  }
  return obs_term - 0.5 * delta * riemann + stochastic;
}

void evaluate_functionals(const Model& model, std::span<const double> theta, const GridPath& path,
                          const ObservationSequence& obs, bool with_second_order,
                          FunctionalBundle& out) {
  check_shapes(model, path, obs);
  const auto d = static_cast<std::size_t>(model.state_dim());
  const auto p = static_cast<std::size_t>(model.param_dim());
  if (out.G.size() != p) out = FunctionalBundle(p);
  std::fill(out.G.begin(), out.G.end(), 0.0);
  std::fill(out.GG.begin(), out.GG.end(), 0.0);
  std::fill(out.H.begin(), out.H.end(), 0.0);

  Scratch s(d, p);
  const double half_delta = 0.5 * path.delta();
  const bool constant_map = model.constant_diffusion();
  if (constant_map) s.map = girsanov_map(model, path.state(0));

  for (std::size_t k = 0; k + 1 < path.num_points(); ++k) {
    const auto x = path.state(k);
    const auto x_next = path.state(k + 1);
    if (!constant_map) s.map = girsanov_map(model, x);
    for (std::size_t r = 0; r < d; ++r) {
      double w = 0.0;
      for (std::size_t c = 0; c < d; ++c) w += s.map[r * d + c] * (x_next[c] - x[c]);
      s.w[r] = w;
    }
    model.girsanov_drift(theta, x, s.b);
    model.girsanov_drift_grad(theta, x, s.db);
    // d/dtheta_i: -D/2 * 2 b . db_i + db_i . w
    for (std::size_t i = 0; i < p; ++i) {
      const double* dbi = s.db.data() + i * d;
      double acc = 0.0;
      for (std::size_t r = 0; r < d; ++r) acc += dbi[r] * (s.w[r] - 2.0 * half_delta * s.b[r]);
      out.G[i] += acc;
    }
    if (with_second_order) {
      model.girsanov_drift_hess(theta, x, s.d2b);
      // d2/dtheta_i dtheta_j: -D (db_i . db_j + b . d2b_ij) + d2b_ij . w
      for (std::size_t i = 0; i < p; ++i) {
        const double* dbi = s.db.data() + i * d;
        for (std::size_t j = i; j < p; ++j) {
          const double* dbj = s.db.data() + j * d;
          const double* d2 = s.d2b.data() + (i * p + j) * d;
          double acc = 0.0;
          for (std::size_t r = 0; r < d; ++r) {
            acc += d2[r] * (s.w[r] - 2.0 * half_delta * s.b[r]) - 2.0 * half_delta * dbi[r] * dbj[r];
          }
          out.H[pair_index(i, j, p)] += acc;
        }
      }
    }
  }

  for (std::size_t t = 0; t < obs.size(); ++t) {
    model.obs_logdens_derivs(theta, path.at_time(t + 1), obs[t], s.obs_grad, s.obs_hess);
    for (std::size_t i = 0; i < p; ++i) out.G[i] += s.obs_grad[i];
    if (with_second_order) {
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = i; j < p; ++j) out.H[pair_index(i, j, p)] += s.obs_hess[i * p + j];
      }
    }
  }

  if (with_second_order) {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = i; j < p; ++j) out.GG[pair_index(i, j, p)] = out.G[i] * out.G[j];
    }
  }
}

std::vector<double> grad_log_rho(const Model& model, const ParameterVector& theta,
                                 const GridPath& path, const ObservationSequence& obs) {
  FunctionalBundle b(theta.size());
  evaluate_functionals(model, theta.values(), path, obs, false, b);
  return b.G;
}

std::vector<double> hess_log_rho(const Model& model, const ParameterVector& theta,
                                 const GridPath& path, const ObservationSequence& obs) {
  FunctionalBundle b(theta.size());
  evaluate_functionals(model, theta.values(), path, obs, true, b);
  return b.H;
}

FunctionalBundle bundle(const Model& model, const ParameterVector& theta, const GridPath& path,
                        const ObservationSequence& obs) {
  FunctionalBundle b(theta.size());
  evaluate_functionals(model, theta.values(), path, obs, true, b);
  return b;
}

std::vector<double> unpack_symmetric(std::span<const double> packed, std::size_t dim) {
  if (packed.size() != num_pairs(dim)) throw ArgumentError("packed size does not match dimension");
  std::vector<double> full(dim * dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) full[i * dim + j] = packed[pair_index(i, j, dim)];
  }
  return full;
}

}  // namespace ubhess
