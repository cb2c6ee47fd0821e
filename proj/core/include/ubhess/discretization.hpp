#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ubhess/grid_path.hpp"
#include "ubhess/model.hpp"
#include "ubhess/rng.hpp"

namespace ubhess {

// Work done by the simulation kernels: Euler state updates and ancestor draws.
// Counted exactly; used as the hardware-independent cost of an estimate.
struct CostCounter {
  std::uint64_t euler_steps = 0;
  std::uint64_t resampling_ops = 0;

  CostCounter& operator+=(const CostCounter& other) noexcept {
    euler_steps += other.euler_steps;
    resampling_ops += other.resampling_ops;
    return *this;
  }
  std::uint64_t total() const noexcept { return euler_steps + resampling_ops; }
};

// Any state component with magnitude above this aborts the replicate.
inline constexpr double kDivergenceThreshold = 1e12;

// 2^level i.i.d. N_d(0, 2^-level I) increments covering one unit of time.
struct BrownianBlock {
  int level = 0;
  int dim = 1;
  std::vector<double> increments;  // (2^level) x dim, row-major

  std::size_t steps() const noexcept { return std::size_t{1} << level; }
};

BrownianBlock draw_brownian_block(int level, int dim, Rng& rng);

// Pairwise sums of consecutive increments: the level-1 block driving the coarse chain.
BrownianBlock coarsen(const BrownianBlock& fine);

// States at times D, 2D, ..., 1 after a start point (the start itself is excluded).
struct SubPath {
  int level = 0;
  int dim = 1;
  std::vector<double> values;

  std::span<const double> endpoint() const noexcept {
    return {values.data() + values.size() - static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
};

// Euler-Maruyama recursion x_k = x_{k-1} + a(x_{k-1}) D + sigma(x_{k-1}) V_k at a fixed
// level. Holds a pointer to the model and a view of theta; both must outlive it.
class EulerStepper {
 public:
  EulerStepper(const Model& model, std::span<const double> theta, int level);

  int level() const noexcept { return level_; }
  std::size_t steps() const noexcept { return steps_; }
  double delta() const noexcept { return delta_; }
  int dim() const noexcept { return dim_; }

  // Writes steps() states into out (steps() x dim). Throws NumericalDivergence.
  void advance(std::span<const double> x0, std::span<const double> increments,
               std::span<double> out, CostCounter* cost = nullptr) const;

  // Same recursion at this stepper's level, driven by increments one level finer
  // (2 * steps() of them), summed pairwise on the fly.
  void advance_from_fine(std::span<const double> x0, std::span<const double> fine_increments,
                         std::span<double> out, CostCounter* cost = nullptr) const;

 private:
  const Model* model_;
  std::span<const double> theta_;
  int level_;
  int dim_;
  std::size_t steps_;
  double delta_;
  bool constant_sigma_;
  std::vector<double> sigma_;
};

SubPath euler_unit_step(const Model& model, const ParameterVector& theta,
                        std::span<const double> x0, const BrownianBlock& block);

// Common-noise pair kernel: both chains consume the same Brownian block.
std::pair<SubPath, SubPath> coupled_pair_step(const Model& model, const ParameterVector& theta,
                                              std::span<const double> x0,
                                              std::span<const double> x0_bar, int level, Rng& rng);

struct LevelStep {
  SubPath fine;
  SubPath fine_bar;
  SubPath coarse;
  SubPath coarse_bar;
};

// Four-chain kernel: the fine pair runs at `level` on one fine block, the coarse
// pair at level - 1 on the pairwise sums of that same block. Requires level >= 1.
LevelStep coupled_level_step(const Model& model, const ParameterVector& theta,
                             std::span<const double> x0_fine, std::span<const double> x0_fine_bar,
                             std::span<const double> x0_coarse,
                             std::span<const double> x0_coarse_bar, int level, Rng& rng);

// A level-`level` Euler path over [0, horizon] started at x_star.
GridPath draw_prior_path(const Model& model, std::span<const double> theta, std::size_t horizon,
                         int level, Rng& rng, CostCounter* cost = nullptr);

// Fine (level) and coarse (level - 1) Euler paths from x_star sharing Brownian motion.
std::pair<GridPath, GridPath> draw_coupled_prior_paths(const Model& model,
                                                       std::span<const double> theta,
                                                       std::size_t horizon, int level, Rng& rng,
                                                       CostCounter* cost = nullptr);

}  // namespace ubhess
