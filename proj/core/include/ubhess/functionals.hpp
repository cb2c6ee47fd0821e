#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ubhess/grid_path.hpp"
#include "ubhess/model.hpp"

namespace ubhess {

// Index of the unordered pair (i, j), i <= j, in packed upper-triangular storage.
constexpr std::size_t pair_index(std::size_t i, std::size_t j, std::size_t dim) noexcept {
  if (i > j) {
    const std::size_t t = i;
    i = j;
    j = t;
  }
  return i * dim - i * (i - 1) / 2 + (j - i);
}

constexpr std::size_t num_pairs(std::size_t dim) noexcept { return dim * (dim + 1) / 2; }

// Score functional G, its outer products GG and the second-derivative functional H
// of one path. GG and H are packed over pairs i <= j.
struct FunctionalBundle {
  std::vector<double> G;
  std::vector<double> GG;
  std::vector<double> H;

  FunctionalBundle() = default;
  explicit FunctionalBundle(std::size_t param_dim)
      : G(param_dim, 0.0), GG(num_pairs(param_dim), 0.0), H(num_pairs(param_dim), 0.0) {}

  std::size_t param_dim() const noexcept { return G.size(); }

  // this += scale * other, entrywise.
  void add_scaled(const FunctionalBundle& other, double scale);
  // this += a - b, entrywise.
  void add_difference(const FunctionalBundle& a, const FunctionalBundle& b);

  // All entries in a fixed order: G, then GG, then H.
  std::vector<double> flatten() const;
};

// Sum_p log g_theta(y_p | x_p) over the integer-time states of the path.
double log_phi(const Model& model, const ParameterVector& theta, const GridPath& path,
               const ObservationSequence& obs);

// Discretized log rho: log phi plus the Euler-Girsanov log-weight
//   -D/2 sum_k |b(x_k)|^2 + sum_k b(x_k)^T Sigma^{-1} sigma^T (x_{k+1} - x_k).
double log_rho(const Model& model, const ParameterVector& theta, const GridPath& path,
               const ObservationSequence& obs);

// theta-gradient of log_rho (left-endpoint sums).
std::vector<double> grad_log_rho(const Model& model, const ParameterVector& theta,
                                 const GridPath& path, const ObservationSequence& obs);

// theta-Hessian of log_rho, packed over i <= j.
std::vector<double> hess_log_rho(const Model& model, const ParameterVector& theta,
                                 const GridPath& path, const ObservationSequence& obs);

// G, GG and H in one pass over the path.
FunctionalBundle bundle(const Model& model, const ParameterVector& theta, const GridPath& path,
                        const ObservationSequence& obs);

// Fills only what is requested; `with_second_order = false` leaves GG and H at zero.
void evaluate_functionals(const Model& model, std::span<const double> theta, const GridPath& path,
                          const ObservationSequence& obs, bool with_second_order,
                          FunctionalBundle& out);

// Expands packed pairs to a symmetric d x d row-major matrix.
std::vector<double> unpack_symmetric(std::span<const double> packed, std::size_t dim);

}  // namespace ubhess
