#include <cmath>

#include "ubhess/discretization.hpp"
#include "ubhess/errors.hpp"
#include "ubhess/model.hpp"

namespace ubhess {

SimulatedData simulate_observations(const Model& model, const ParameterVector& theta, int level,
                                    std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ArgumentError("simulate_observations: horizon n must be >= 1");
  if (level < 0) throw ArgumentError("simulate_observations: level must be >= 0");
  Rng path_rng = Rng::derive(seed, {0});
  Rng obs_rng = Rng::derive(seed, {1});
  GridPath latent = draw_prior_path(model, theta.values(), n, level, path_rng);
  std::vector<double> y(n * static_cast<std::size_t>(model.obs_dim()));
  for (std::size_t p = 0; p < n; ++p) {
    model.sample_observation(theta.values(), latent.at_time(p + 1), obs_rng,
                             std::span<double>(y.data() + p * model.obs_dim(),
                                               static_cast<std::size_t>(model.obs_dim())));
  }
  return {ObservationSequence(model.obs_dim(), std::move(y)), std::move(latent)};
}

}  // namespace ubhess
