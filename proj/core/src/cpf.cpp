#include "ubhess/cpf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ubhess/errors.hpp"

namespace ubhess {

void ParticleEnsemble::reset(int level, int dim, std::size_t horizon, std::size_t particles,
                             std::span<const double> x_star) {
  level_ = level;
  dim_ = static_cast<std::size_t>(dim);
  horizon_ = horizon;
  particles_ = particles;
  block_ = (std::size_t{1} << level) * dim_;
  x_star_.assign(x_star.begin(), x_star.end());
  segments_.resize(horizon * particles * block_);
  ancestors_.resize(horizon * particles);
  for (std::size_t i = 0; i < particles; ++i) ancestors_[i] = i;
}

void ParticleEnsemble::freeze(std::size_t k, const GridPath& path) noexcept {
  const double* src = path.values.data() + ((k - 1) * (block_ / dim_) + 1) * dim_;
  std::copy(src, src + block_, segment(k, frozen_slot()).begin());
  if (k >= 2) set_ancestor(k, frozen_slot(), frozen_slot());
}

void ParticleEnsemble::trace(std::size_t i, GridPath& out) const {
  out.level = level_;
  out.dim = static_cast<int>(dim_);
  out.values.resize(horizon_ * block_ + dim_);
  std::copy(x_star_.begin(), x_star_.end(), out.values.begin());
  for (std::size_t k = horizon_; k >= 1; --k) {
    const auto seg = segment(k, i);
    std::copy(seg.begin(), seg.end(), out.values.begin() + static_cast<std::ptrdiff_t>((k - 1) * block_ + dim_));
    if (k >= 2) i = ancestor(k, i);
  }
}

ParticleFilter::ParticleFilter(const Model& model, std::span<const double> theta,
                               const ObservationSequence& obs, FilterOptions options)
    : model_(&model), theta_(theta.begin(), theta.end()), obs_(&obs), options_(options) {
  if (options_.num_particles < 2) throw ArgumentError("particle filters need N >= 2 particles");
  if (obs.dim() != model.obs_dim()) throw ArgumentError("observation dimension does not match the model");
  model.validate(theta_);
  log_w_.resize(options_.num_particles);
}

void ParticleFilter::check_path(const GridPath& path, int level) const {
  if (path.dim != model_->state_dim() || path.level != level) {
    throw ArgumentError("conditioned path has the wrong level or dimension");
  }
  if (path.values.size() != ((obs_->size() << level) + 1) * static_cast<std::size_t>(path.dim)) {
    throw ArgumentError("conditioned path does not span the " + std::to_string(obs_->size()) +
                        " observation times");
  }
}

void ParticleFilter::fill_noise(int level, Rng& rng) {
  const std::size_t count = (std::size_t{1} << level) * static_cast<std::size_t>(model_->state_dim());
  noise_.resize(count);
  const double scale = std::sqrt(std::ldexp(1.0, -level));
  for (double& v : noise_) v = scale * rng.normal();
}

Pmf ParticleFilter::weights(const ParticleEnsemble& e, std::size_t k) {
  const auto y = (*obs_)[k - 1];
  for (std::size_t i = 0; i < e.particles(); ++i) {
    log_w_[i] = model_->obs_logdens(theta_, e.endpoint(k, i), y);
  }
  return Pmf::from_log_weights(log_w_);
}

void ParticleFilter::cpf(GridPath& path, Rng& rng, CostCounter* cost) {
  const int level = path.level;
  check_path(path, level);
  const std::size_t n = obs_->size();
  const std::size_t N = options_.num_particles;
  ParticleEnsemble& e = ens_[0];
  e.reset(level, model_->state_dim(), n, N, model_->x_star());
  const EulerStepper stepper(*model_, theta_, level);

  for (std::size_t k = 1; k <= n; ++k) {
    for (std::size_t i = 0; i + 1 < N; ++i) {
      fill_noise(level, rng);
      const std::size_t a = k >= 2 ? e.ancestor(k, i) : i;
      stepper.advance(e.endpoint(k - 1, a), noise_, e.segment(k, i), cost);
    }
    e.freeze(k, path);
    if (k == n) break;
    const Pmf r = weights(e, k);
    const DiscreteSampler sampler(r.probabilities());
    for (std::size_t i = 0; i + 1 < N; ++i) e.set_ancestor(k + 1, i, sampler.sample(rng));
    if (cost != nullptr) cost->resampling_ops += N - 1;
  }
  const Pmf r = weights(e, n);
  const std::size_t pick = DiscreteSampler(r.probabilities()).sample(rng);
  if (cost != nullptr) cost->resampling_ops += 1;
  e.trace(pick, path);
}

void ParticleFilter::ccpf(CoupledPair& state, Rng& rng, CostCounter* cost) {
  const int level = state.x.level;
  check_path(state.x, level);
  check_path(state.x_bar, level);
  const std::size_t n = obs_->size();
  const std::size_t N = options_.num_particles;
  ParticleEnsemble& e = ens_[0];
  ParticleEnsemble& eb = ens_[1];
  e.reset(level, model_->state_dim(), n, N, model_->x_star());
  eb.reset(level, model_->state_dim(), n, N, model_->x_star());
  const EulerStepper stepper(*model_, theta_, level);

  for (std::size_t k = 1; k <= n; ++k) {
    for (std::size_t i = 0; i + 1 < N; ++i) {
      fill_noise(level, rng);
      const std::size_t a = k >= 2 ? e.ancestor(k, i) : i;
      const std::size_t ab = k >= 2 ? eb.ancestor(k, i) : i;
      stepper.advance(e.endpoint(k - 1, a), noise_, e.segment(k, i), cost);
      stepper.advance(eb.endpoint(k - 1, ab), noise_, eb.segment(k, i), cost);
    }
    e.freeze(k, state.x);
    eb.freeze(k, state.x_bar);
    if (k == n) break;
    const Pmf r1 = weights(e, k);
    const Pmf r2 = weights(eb, k);
    const MaximalCoupling coupling(r1, r2, options_.residual);
    for (std::size_t i = 0; i + 1 < N; ++i) {
      const auto [a, ab] = coupling.sample(rng);
      e.set_ancestor(k + 1, i, a);
      eb.set_ancestor(k + 1, i, ab);
    }
    if (cost != nullptr) cost->resampling_ops += N - 1;
  }
  const Pmf r1 = weights(e, n);
  const Pmf r2 = weights(eb, n);
  const auto [i, j] = MaximalCoupling(r1, r2, options_.residual).sample(rng);
  if (cost != nullptr) cost->resampling_ops += 1;
  e.trace(i, state.x);
  eb.trace(j, state.x_bar);
  state.update_met();
}

void ParticleFilter::coupled_levels(GridPath& fine, GridPath& coarse, Rng& rng, CostCounter* cost) {
  const int level = fine.level;
  if (level < 1) throw ArgumentError("cross-level coupled CPF requires level >= 1");
  check_path(fine, level);
  check_path(coarse, level - 1);
  const std::size_t n = obs_->size();
  const std::size_t N = options_.num_particles;
  ParticleEnsemble& ef = ens_[0];
  ParticleEnsemble& ec = ens_[1];
  ef.reset(level, model_->state_dim(), n, N, model_->x_star());
  ec.reset(level - 1, model_->state_dim(), n, N, model_->x_star());
  const EulerStepper fine_stepper(*model_, theta_, level);
  const EulerStepper coarse_stepper(*model_, theta_, level - 1);

  for (std::size_t k = 1; k <= n; ++k) {
    for (std::size_t i = 0; i + 1 < N; ++i) {
      fill_noise(level, rng);
      const std::size_t af = k >= 2 ? ef.ancestor(k, i) : i;
      const std::size_t ac = k >= 2 ? ec.ancestor(k, i) : i;
      fine_stepper.advance(ef.endpoint(k - 1, af), noise_, ef.segment(k, i), cost);
      coarse_stepper.advance_from_fine(ec.endpoint(k - 1, ac), noise_, ec.segment(k, i), cost);
    }
    ef.freeze(k, fine);
    ec.freeze(k, coarse);
    if (k == n) break;
    const Pmf r1 = weights(ef, k);
    const Pmf r2 = weights(ec, k);
    const MaximalCoupling coupling(r1, r2, options_.residual);
    for (std::size_t i = 0; i + 1 < N; ++i) {
      const auto [af, ac] = coupling.sample(rng);
      ef.set_ancestor(k + 1, i, af);
      ec.set_ancestor(k + 1, i, ac);
    }
    if (cost != nullptr) cost->resampling_ops += N - 1;
  }
  const Pmf r1 = weights(ef, n);
  const Pmf r2 = weights(ec, n);
  const auto [i, j] = MaximalCoupling(r1, r2, options_.residual).sample(rng);
  if (cost != nullptr) cost->resampling_ops += 1;
  ef.trace(i, fine);
  ec.trace(j, coarse);
}

void ParticleFilter::cccpf(CoupledLevels& state, Rng& rng, CostCounter* cost) {
  const int level = state.level();
  if (level < 1) throw ArgumentError("C-CCPF requires level >= 1");
  check_path(state.fine.x, level);
  check_path(state.fine.x_bar, level);
  check_path(state.coarse.x, level - 1);
  check_path(state.coarse.x_bar, level - 1);
  const std::size_t n = obs_->size();
  const std::size_t N = options_.num_particles;
  // Ordered as the four-way coupling expects: fine, coarse, fine-bar, coarse-bar.
  ParticleEnsemble& ef = ens_[0];
  ParticleEnsemble& ec = ens_[1];
  ParticleEnsemble& efb = ens_[2];
  ParticleEnsemble& ecb = ens_[3];
  const int d = model_->state_dim();
  ef.reset(level, d, n, N, model_->x_star());
  efb.reset(level, d, n, N, model_->x_star());
  ec.reset(level - 1, d, n, N, model_->x_star());
  ecb.reset(level - 1, d, n, N, model_->x_star());
  const EulerStepper fine_stepper(*model_, theta_, level);
  const EulerStepper coarse_stepper(*model_, theta_, level - 1);

  for (std::size_t k = 1; k <= n; ++k) {
    for (std::size_t i = 0; i + 1 < N; ++i) {
      fill_noise(level, rng);
      const bool first = k == 1;
      fine_stepper.advance(ef.endpoint(k - 1, first ? i : ef.ancestor(k, i)), noise_,
                           ef.segment(k, i), cost);
      fine_stepper.advance(efb.endpoint(k - 1, first ? i : efb.ancestor(k, i)), noise_,
                           efb.segment(k, i), cost);
      coarse_stepper.advance_from_fine(ec.endpoint(k - 1, first ? i : ec.ancestor(k, i)), noise_,
                                       ec.segment(k, i), cost);
      coarse_stepper.advance_from_fine(ecb.endpoint(k - 1, first ? i : ecb.ancestor(k, i)), noise_,
                                       ecb.segment(k, i), cost);
    }
    ef.freeze(k, state.fine.x);
    efb.freeze(k, state.fine.x_bar);
    ec.freeze(k, state.coarse.x);
    ecb.freeze(k, state.coarse.x_bar);
    if (k == n) break;
    const FourWayCoupling coupling(weights(ef, k), weights(ec, k), weights(efb, k), weights(ecb, k),
                                   options_.residual, options_.check);
    for (std::size_t i = 0; i + 1 < N; ++i) {
      const auto idx = coupling.sample(rng);
      ef.set_ancestor(k + 1, i, idx[0]);
      ec.set_ancestor(k + 1, i, idx[1]);
      efb.set_ancestor(k + 1, i, idx[2]);
      ecb.set_ancestor(k + 1, i, idx[3]);
    }
    if (cost != nullptr) cost->resampling_ops += N - 1;
  }
  const FourWayCoupling coupling(weights(ef, n), weights(ec, n), weights(efb, n), weights(ecb, n),
                                 options_.residual, options_.check);
  const auto idx = coupling.sample(rng);
  if (cost != nullptr) cost->resampling_ops += 1;
  ef.trace(idx[0], state.fine.x);
  ec.trace(idx[1], state.coarse.x);
  efb.trace(idx[2], state.fine.x_bar);
  ecb.trace(idx[3], state.coarse.x_bar);
  state.fine.update_met();
  state.coarse.update_met();
}

CoupledPair ParticleFilter::init_pair(int level, Rng& rng, CostCounter* cost) {
  CoupledPair state;
  state.x = draw_prior_path(*model_, theta_, obs_->size(), level, rng, cost);
  state.x_bar = draw_prior_path(*model_, theta_, obs_->size(), level, rng, cost);
  cpf(state.x, rng, cost);
  state.update_met();
  return state;
}

CoupledLevels ParticleFilter::init_levels(int level, Rng& rng, CostCounter* cost) {
  if (level < 1) throw ArgumentError("cross-level chains require level >= 1");
  CoupledLevels state;
  std::tie(state.fine.x, state.coarse.x) =
      draw_coupled_prior_paths(*model_, theta_, obs_->size(), level, rng, cost);
  std::tie(state.fine.x_bar, state.coarse.x_bar) =
      draw_coupled_prior_paths(*model_, theta_, obs_->size(), level, rng, cost);
  coupled_levels(state.fine.x, state.coarse.x, rng, cost);
  state.fine.update_met();
  state.coarse.update_met();
  return state;
}

GridPath cpf_kernel(const Model& model, const ParameterVector& theta, const ObservationSequence& obs,
                    const GridPath& input, std::size_t num_particles, Rng& rng) {
  FilterOptions options;
  options.num_particles = num_particles;
  ParticleFilter filter(model, theta.values(), obs, options);
  GridPath out = input;
  filter.cpf(out, rng);
  return out;
}

CoupledPair ccpf_kernel0(const Model& model, const ParameterVector& theta,
                         const ObservationSequence& obs, const CoupledPair& state,
                         const FilterOptions& options, Rng& rng) {
  if (state.x.level != 0) throw ArgumentError("ccpf_kernel0 expects level-0 paths");
  ParticleFilter filter(model, theta.values(), obs, options);
  CoupledPair out = state;
  filter.ccpf(out, rng);
  return out;
}

std::pair<GridPath, GridPath> coupled_cpf_levels(const Model& model, const ParameterVector& theta,
                                                 const ObservationSequence& obs,
                                                 const GridPath& fine, const GridPath& coarse,
                                                 const FilterOptions& options, Rng& rng) {
  ParticleFilter filter(model, theta.values(), obs, options);
  std::pair<GridPath, GridPath> out{fine, coarse};
  filter.coupled_levels(out.first, out.second, rng);
  return out;
}

CoupledLevels cccpf_kernel(const Model& model, const ParameterVector& theta,
                           const ObservationSequence& obs, const CoupledLevels& state,
                           const FilterOptions& options, Rng& rng) {
  ParticleFilter filter(model, theta.values(), obs, options);
  CoupledLevels out = state;
  filter.cccpf(out, rng);
  return out;
}

CoupledPair init_chain0(const Model& model, const ParameterVector& theta,
                        const ObservationSequence& obs, const FilterOptions& options, Rng& rng) {
  ParticleFilter filter(model, theta.values(), obs, options);
  return filter.init_pair(0, rng);
}

CoupledLevels init_chainl(const Model& model, const ParameterVector& theta,
                          const ObservationSequence& obs, int level, const FilterOptions& options,
                          Rng& rng) {
  ParticleFilter filter(model, theta.values(), obs, options);
  return filter.init_levels(level, rng);
}

}  // namespace ubhess
