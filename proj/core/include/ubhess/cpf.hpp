#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ubhess/coupling.hpp"
#include "ubhess/discretization.hpp"
#include "ubhess/grid_path.hpp"
#include "ubhess/model.hpp"
#include "ubhess/rng.hpp"

namespace ubhess {

struct FilterOptions {
  std::size_t num_particles = 32;
  // Residual step of every two-PMF coupling (ancestor and terminal draws).
  ResidualCoupling residual = ResidualCoupling::kInversion;
  CheckMeasure check = CheckMeasure::kStandard;
};

// N trajectories over [0, n], stored as one segment per unit interval plus the
// ancestor links between consecutive segments. Slot N-1 is the conditioned path.
class ParticleEnsemble {
 public:
  void reset(int level, int dim, std::size_t horizon, std::size_t particles,
             std::span<const double> x_star);

  int level() const noexcept { return level_; }
  std::size_t particles() const noexcept { return particles_; }
  std::size_t horizon() const noexcept { return horizon_; }
  std::size_t frozen_slot() const noexcept { return particles_ - 1; }

  // States at k-1+D, ..., k of particle i (k = 1..n).
  std::span<double> segment(std::size_t k, std::size_t i) noexcept {
    return {segments_.data() + ((k - 1) * particles_ + i) * block_, block_};
  }
  std::span<const double> segment(std::size_t k, std::size_t i) const noexcept {
    return {segments_.data() + ((k - 1) * particles_ + i) * block_, block_};
  }
  // State of particle i at integer time k; x_star for k = 0.
  std::span<const double> endpoint(std::size_t k, std::size_t i) const noexcept {
    if (k == 0) return x_star_;
    return {segments_.data() + ((k - 1) * particles_ + i + 1) * block_ - dim_, dim_};
  }
  // Index at block k-1 from which particle i of block k descends (k >= 2).
  std::size_t ancestor(std::size_t k, std::size_t i) const noexcept {
    return ancestors_[(k - 1) * particles_ + i];
  }
  void set_ancestor(std::size_t k, std::size_t i, std::size_t a) noexcept {
    ancestors_[(k - 1) * particles_ + i] = a;
  }

  // Copies block k of `path` into the frozen slot.
  void freeze(std::size_t k, const GridPath& path) noexcept;
  // Reconstructs the full trajectory of terminal particle i, x_star included.
  void trace(std::size_t i, GridPath& out) const;

 private:
  int level_ = 0;
  std::size_t dim_ = 1;
  std::size_t horizon_ = 0;
  std::size_t particles_ = 0;
  std::size_t block_ = 0;
  std::vector<double> x_star_;
  std::vector<double> segments_;
  std::vector<std::size_t> ancestors_;
};

// Two chains at one level. `met` is exact bitwise equality of the two paths.
struct CoupledPair {
  GridPath x;
  GridPath x_bar;
  bool met = false;

  void update_met() noexcept { met = bit_identical(x, x_bar); }
};

// Chain state at level l: a coupled pair at level l and one at level l - 1.
struct CoupledLevels {
  CoupledPair fine;
  CoupledPair coarse;

  int level() const noexcept { return fine.x.level; }
  bool both_met() const noexcept { return fine.met && coarse.met; }
};

// Conditional particle filter kernels bound to one (model, theta, observations)
// triple. Owns reusable ensemble buffers, so an instance must not be shared
// across threads; create one per chain or per worker.
class ParticleFilter {
 public:
  ParticleFilter(const Model& model, std::span<const double> theta, const ObservationSequence& obs,
                 FilterOptions options = {});

  const FilterOptions& options() const noexcept { return options_; }
  const Model& model() const noexcept { return *model_; }
  std::span<const double> theta() const noexcept { return theta_; }
  const ObservationSequence& observations() const noexcept { return *obs_; }

  // Conditional particle filter: one application of the kernel C^l to `path`
  // (level taken from the path), in place.
  void cpf(GridPath& path, Rng& rng, CostCounter* cost = nullptr);

  // Coupled CPF on a pair of same-level paths: common-noise propagation,
  // coupled ancestor draws and a coupled terminal draw. Updates `met`.
  void ccpf(CoupledPair& state, Rng& rng, CostCounter* cost = nullptr);

  // Coupled CPF across levels l and l-1 (the kernel C-check^l): the fine path
  // at level l and the coarse path at level l-1 share Brownian increments.
  void coupled_levels(GridPath& fine, GridPath& coarse, Rng& rng, CostCounter* cost = nullptr);

  // Coupled-CCPF at level l: four ensembles, one fine Brownian block per particle
  // and four-way coupled resampling. Updates both met flags.
  void cccpf(CoupledLevels& state, Rng& rng, CostCounter* cost = nullptr);

  // Initial chain laws: two independent prior paths, the first moved by one CPF
  // (resp. cross-level CPF) sweep, the second kept as drawn.
  CoupledPair init_pair(int level, Rng& rng, CostCounter* cost = nullptr);
  CoupledLevels init_levels(int level, Rng& rng, CostCounter* cost = nullptr);

 private:
  void check_path(const GridPath& path, int level) const;
  void fill_noise(int level, Rng& rng);
  Pmf weights(const ParticleEnsemble& e, std::size_t k);

  const Model* model_;
  std::vector<double> theta_;
  const ObservationSequence* obs_;
  FilterOptions options_;
  ParticleEnsemble ens_[4];
  std::vector<double> noise_;
  std::vector<double> log_w_;
};

// Free-function forms of the kernels.
GridPath cpf_kernel(const Model& model, const ParameterVector& theta, const ObservationSequence& obs,
                    const GridPath& input, std::size_t num_particles, Rng& rng);
CoupledPair ccpf_kernel0(const Model& model, const ParameterVector& theta,
                         const ObservationSequence& obs, const CoupledPair& state,
                         const FilterOptions& options, Rng& rng);
std::pair<GridPath, GridPath> coupled_cpf_levels(const Model& model, const ParameterVector& theta,
                                                 const ObservationSequence& obs,
                                                 const GridPath& fine, const GridPath& coarse,
                                                 const FilterOptions& options, Rng& rng);
CoupledLevels cccpf_kernel(const Model& model, const ParameterVector& theta,
                           const ObservationSequence& obs, const CoupledLevels& state,
                           const FilterOptions& options, Rng& rng);
CoupledPair init_chain0(const Model& model, const ParameterVector& theta,
                        const ObservationSequence& obs, const FilterOptions& options, Rng& rng);
CoupledLevels init_chainl(const Model& model, const ParameterVector& theta,
                          const ObservationSequence& obs, int level, const FilterOptions& options,
                          Rng& rng);

}  // namespace ubhess
