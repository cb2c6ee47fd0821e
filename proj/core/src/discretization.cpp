#include "ubhess/discretization.hpp"

#include <cmath>

#include "ubhess/errors.hpp"

namespace ubhess {

namespace {

void check_level(int level) {
  if (level < 0 || level > 30) throw ArgumentError("discretization level must be in [0, 30]");
}

void check_state(std::span<const double> x) {
  for (double v : x) {
    if (!(std::abs(v) <= kDivergenceThreshold)) {
      throw NumericalDivergence("Euler state left the finite range (|x| > 1e12 or NaN)");
    }
  }
}

}  // namespace

BrownianBlock draw_brownian_block(int level, int dim, Rng& rng) {
  check_level(level);
  BrownianBlock block{level, dim, std::vector<double>((std::size_t{1} << level) * dim)};
  const double scale = std::sqrt(std::ldexp(1.0, -level));
  for (double& v : block.increments) v = scale * rng.normal();
  return block;
}

BrownianBlock coarsen(const BrownianBlock& fine) {
  if (fine.level < 1) throw ArgumentError("cannot coarsen a level-0 block");
  const auto d = static_cast<std::size_t>(fine.dim);
  BrownianBlock coarse{fine.level - 1, fine.dim, std::vector<double>(fine.increments.size() / 2)};
  for (std::size_t k = 0; k < coarse.steps(); ++k) {
    for (std::size_t c = 0; c < d; ++c) {
      coarse.increments[k * d + c] =
          fine.increments[(2 * k) * d + c] + fine.increments[(2 * k + 1) * d + c];
    }
  }
  return coarse;
}

EulerStepper::EulerStepper(const Model& model, std::span<const double> theta, int level)
    : model_(&model),
      theta_(theta),
      level_(level),
      dim_(model.state_dim()),
      steps_(std::size_t{1} << level),
      delta_(std::ldexp(1.0, -level)),
      constant_sigma_(model.constant_diffusion()),
      sigma_(static_cast<std::size_t>(dim_ * dim_)) {
  check_level(level);
  if (constant_sigma_) model.diffusion(model.x_star(), sigma_);
}

void EulerStepper::advance(std::span<const double> x0, std::span<const double> increments,
                           std::span<double> out, CostCounter* cost) const {
  const auto d = static_cast<std::size_t>(dim_);
  double drift_buf[16];
  std::vector<double> drift_heap;
  std::span<double> a(drift_buf, d);
  if (d > 16) {
    drift_heap.resize(d);
    a = drift_heap;
  }
  std::vector<double> sigma_local;
  if (!constant_sigma_) sigma_local.resize(d * d);

  const double* prev = x0.data();
  for (std::size_t k = 0; k < steps_; ++k) {
    double* next = out.data() + k * d;
    const std::span<const double> xp(prev, d);
    model_->drift(theta_, xp, a);
    const double* sig = sigma_.data();
    if (!constant_sigma_) {
      model_->diffusion(xp, sigma_local);
      sig = sigma_local.data();
    }
    const double* v = increments.data() + k * d;
    for (std::size_t r = 0; r < d; ++r) {
      double noise = 0.0;
      for (std::size_t c = 0; c < d; ++c) noise += sig[r * d + c] * v[c];
      next[r] = prev[r] + a[r] * delta_ + noise;
    }
    check_state({next, d});
    prev = next;
  }
  if (cost != nullptr) cost->euler_steps += steps_;
}

void EulerStepper::advance_from_fine(std::span<const double> x0,
                                     std::span<const double> fine_increments,
                                     std::span<double> out, CostCounter* cost) const {
  const auto d = static_cast<std::size_t>(dim_);
  double summed_buf[64];
  std::vector<double> summed_heap;
  std::span<double> summed;
  if (steps_ * d <= 64) {
    summed = std::span<double>(summed_buf, steps_ * d);
  } else {
    summed_heap.resize(steps_ * d);
    summed = summed_heap;
  }
  for (std::size_t k = 0; k < steps_; ++k) {
    for (std::size_t c = 0; c < d; ++c) {
      summed[k * d + c] = fine_increments[(2 * k) * d + c] + fine_increments[(2 * k + 1) * d + c];
    }
  }
  advance(x0, summed, out, cost);
}

SubPath euler_unit_step(const Model& model, const ParameterVector& theta,
                        std::span<const double> x0, const BrownianBlock& block) {
  if (block.dim != model.state_dim()) throw ArgumentError("Brownian block dimension mismatch");
  const EulerStepper stepper(model, theta.values(), block.level);
  SubPath out{block.level, block.dim, std::vector<double>(block.increments.size())};
  stepper.advance(x0, block.increments, out.values);
  return out;
}

std::pair<SubPath, SubPath> coupled_pair_step(const Model& model, const ParameterVector& theta,
                                              std::span<const double> x0,
                                              std::span<const double> x0_bar, int level, Rng& rng) {
  const BrownianBlock block = draw_brownian_block(level, model.state_dim(), rng);
  return {euler_unit_step(model, theta, x0, block), euler_unit_step(model, theta, x0_bar, block)};
}

LevelStep coupled_level_step(const Model& model, const ParameterVector& theta,
                             std::span<const double> x0_fine, std::span<const double> x0_fine_bar,
                             std::span<const double> x0_coarse,
                             std::span<const double> x0_coarse_bar, int level, Rng& rng) {
  if (level < 1) throw ArgumentError("coupled_level_step requires level >= 1");
  const BrownianBlock fine = draw_brownian_block(level, model.state_dim(), rng);
  const BrownianBlock coarse = coarsen(fine);
  return {euler_unit_step(model, theta, x0_fine, fine),
          euler_unit_step(model, theta, x0_fine_bar, fine),
          euler_unit_step(model, theta, x0_coarse, coarse),
          euler_unit_step(model, theta, x0_coarse_bar, coarse)};
}

GridPath draw_prior_path(const Model& model, std::span<const double> theta, std::size_t horizon,
                         int level, Rng& rng, CostCounter* cost) {
  const EulerStepper stepper(model, theta, level);
  const int d = model.state_dim();
  GridPath path(level, d, horizon);
  std::copy(model.x_star().begin(), model.x_star().end(), path.values.begin());
  const std::size_t block = stepper.steps() * static_cast<std::size_t>(d);
  for (std::size_t p = 0; p < horizon; ++p) {
    const BrownianBlock noise = draw_brownian_block(level, d, rng);
    const auto start = path.state(p * stepper.steps());
    stepper.advance(start, noise.increments,
                    std::span<double>(path.values.data() + (p * stepper.steps() + 1) * d, block), cost);
  }
  return path;
}

std::pair<GridPath, GridPath> draw_coupled_prior_paths(const Model& model,
                                                       std::span<const double> theta,
                                                       std::size_t horizon, int level, Rng& rng,
                                                       CostCounter* cost) {
  if (level < 1) throw ArgumentError("coupled prior paths require level >= 1");
  const EulerStepper fine_stepper(model, theta, level);
  const EulerStepper coarse_stepper(model, theta, level - 1);
  const int d = model.state_dim();
  GridPath fine(level, d, horizon);
  GridPath coarse(level - 1, d, horizon);
  std::copy(model.x_star().begin(), model.x_star().end(), fine.values.begin());
  std::copy(model.x_star().begin(), model.x_star().end(), coarse.values.begin());
  const std::size_t fs = fine_stepper.steps();
  const std::size_t cs = coarse_stepper.steps();
  for (std::size_t p = 0; p < horizon; ++p) {
    const BrownianBlock noise = draw_brownian_block(level, d, rng);
    fine_stepper.advance(fine.state(p * fs), noise.increments,
                         std::span<double>(fine.values.data() + (p * fs + 1) * d, fs * d), cost);
    coarse_stepper.advance_from_fine(
        coarse.state(p * cs), noise.increments,
        std::span<double>(coarse.values.data() + (p * cs + 1) * d, cs * d), cost);
  }
  return {std::move(fine), std::move(coarse)};
}

}  // namespace ubhess
