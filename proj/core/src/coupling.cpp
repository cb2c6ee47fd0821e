#include "ubhess/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ubhess/errors.hpp"

namespace ubhess {

namespace {

constexpr double kFullOverlap = 1.0 - 1e-14;

void require_same_size(const Pmf& a, const Pmf& b) {
  if (a.size() != b.size()) {
    throw ArgumentError("coupled PMFs must share the support size (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace

Pmf Pmf::from_weights(std::span<const double> weights) {
  if (weights.empty()) throw ArgumentError("PMF needs at least one index");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError("PMF weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw ArgumentError("PMF weights sum to zero");
  std::vector<double> p(weights.begin(), weights.end());
  for (double& v : p) v /= total;
  return Pmf(std::move(p));
}

Pmf Pmf::from_log_weights(std::span<const double> log_weights) {
  if (log_weights.empty()) throw ArgumentError("PMF needs at least one index");
  double top = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) {
    if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity()) {
      throw ArgumentError("log-weights must be finite or -inf");
    }
    top = std::max(top, lw);
  }
  if (top == -std::numeric_limits<double>::infinity()) throw ArgumentError("all log-weights are -inf");
  std::vector<double> p(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(log_weights[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return Pmf(std::move(p));
}

DiscreteSampler::DiscreteSampler(std::span<const double> masses) : cumulative_(masses.size()) {
  double run = 0.0;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    run += masses[i];
    cumulative_[i] = run;
    if (masses[i] > 0.0) last_positive_ = i;
  }
}

std::size_t DiscreteSampler::invert(double u) const noexcept {
  const double target = u * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  const auto idx = static_cast<std::size_t>(it - cumulative_.begin());
  return std::min(idx, last_positive_);
}

MaximalCoupling::MaximalCoupling(const Pmf& r1, const Pmf& r2, ResidualCoupling residual)
    : min_(r1.size()), residual1_(r1.size()), residual2_(r1.size()), kind_(residual) {
  require_same_size(r1, r2);
  for (std::size_t i = 0; i < r1.size(); ++i) {
    min_[i] = std::min(r1[i], r2[i]);
    residual1_[i] = r1[i] - min_[i];
    residual2_[i] = r2[i] - min_[i];
    overlap_ += min_[i];
  }
  full_overlap_ = overlap_ >= kFullOverlap;
  overlap_sampler_ = DiscreteSampler(min_);
  if (!full_overlap_) {
    for (double v : residual1_) residual_total_ += v;
    residual1_sampler_ = DiscreteSampler(residual1_);
    residual2_sampler_ = DiscreteSampler(residual2_);
  }
}

std::pair<std::size_t, std::size_t> MaximalCoupling::sample(Rng& rng) const {
  if (full_overlap_) {
    const std::size_t i = overlap_sampler_.sample(rng);
    return {i, i};
  }
  if (rng.uniform() < overlap_) {
    const std::size_t i = overlap_sampler_.sample(rng);
    return {i, i};
  }
  if (kind_ == ResidualCoupling::kInversion) {
    const double u = rng.uniform();
    return {residual1_sampler_.invert(u), residual2_sampler_.invert(u)};
  }
  const std::size_t i = residual1_sampler_.sample(rng);
  const std::size_t j = residual2_sampler_.sample(rng);
  return {i, j};
}

double MaximalCoupling::joint_mass(std::size_t i, std::size_t j) const noexcept {
  double mass = (i == j) ? min_[i] : 0.0;
  if (residual_total_ > 0.0) mass += residual1_[i] * residual2_[j] / residual_total_;
  return mass;
}

std::pair<std::size_t, std::size_t> sample_max_coupling(const Pmf& r1, const Pmf& r2, Rng& rng) {
  return MaximalCoupling(r1, r2, ResidualCoupling::kIndependent).sample(rng);
}

std::pair<std::size_t, std::size_t> sample_inversion_residual_coupling(const Pmf& r1, const Pmf& r2,
                                                                       Rng& rng) {
  return MaximalCoupling(r1, r2, ResidualCoupling::kInversion).sample(rng);
}

namespace {

std::size_t conditional_draw(const Pmf& r5, const Pmf& r6, const DiscreteSampler& r6_sampler,
                             std::size_t i5, Rng& rng) {
  const double p5 = r5[i5];
  if (!(p5 > 0.0)) throw ArgumentError("conditional coupling: i5 has zero mass under r5");
  // Accept the shared index with probability min(1, r6/r5).
  if (r6[i5] >= p5 || p5 * rng.uniform() < r6[i5]) return i5;
  for (long iter = 0; iter < kCouplingRejectionCap; ++iter) {
    const std::size_t cand = r6_sampler.sample(rng);
    if (r6[cand] * rng.uniform() > r5[cand]) return cand;
  }
  throw CouplingCapExceeded("conditional coupling rejection loop exceeded 1e7 iterations");
}

}  // namespace

std::pair<std::size_t, std::size_t> sample_conditional_coupling(const Pmf& r5, const Pmf& r6,
                                                                std::size_t i5, Rng& rng) {
  require_same_size(r5, r6);
  if (i5 >= r5.size()) throw ArgumentError("conditional coupling: index out of range");
  const DiscreteSampler r6_sampler(r6.probabilities());
  return {i5, conditional_draw(r5, r6, r6_sampler, i5, rng)};
}

FourWayCoupling::FourWayCoupling(const Pmf& r1, const Pmf& r2, const Pmf& r3, const Pmf& r4,
                                 ResidualCoupling residual, CheckMeasure check)
    : r_{r1, r2, r3, r4},
      check_(check),
      pair12_(r1, r2, residual),
      pair34_exact_(r3, r4, ResidualCoupling::kIndependent),
      pair12_exact_(r1, r2, ResidualCoupling::kIndependent),
      r3_sampler_(r3.probabilities()),
      r4_sampler_(r4.probabilities()) {
  require_same_size(r1, r2);
  require_same_size(r1, r3);
  require_same_size(r1, r4);
  const bool eq13 = r1 == r3;
  const bool eq24 = r2 == r4;
  if (eq13 && !eq24) {
    branch_ = Branch::kFirstPairEqual;
  } else if (eq24 && !eq13) {
    branch_ = Branch::kSecondPairEqual;
  } else {
    branch_ = Branch::kGeneral;
  }
}

double FourWayCoupling::check_mass(int which, std::size_t a, std::size_t b) const noexcept {
  const MaximalCoupling& mc = which == 0 ? pair12_exact_ : pair34_exact_;
  if (check_ == CheckMeasure::kStandard) return mc.joint_mass(a, b);
  const Pmf& rj = r_[which == 0 ? 0 : 2];
  const Pmf& rk = r_[which == 0 ? 1 : 3];
  double mass = std::min(rj[a], rk[b]);
  const double denom = 1.0 - mc.overlap();
  if (denom > 0.0) {
    mass += (rj[a] - std::min(rj[a], rk[a])) / denom * (rk[b] - std::min(rj[b], rk[b]));
  }
  return mass;
}

std::array<std::size_t, 4> FourWayCoupling::sample(Rng& rng) const {
  switch (branch_) {
    case Branch::kFirstPairEqual: {
      // r1 == r3: the fine indices agree, the coarse index of the second chain is
      // coupled to i1 through r1 -> r4.
      const auto [i1, i2] = pair12_.sample(rng);
      const std::size_t i6 = conditional_draw(r_[0], r_[3], r4_sampler_, i1, rng);
      return {i1, i2, i1, i6};
    }
    case Branch::kSecondPairEqual: {
      const auto [i1, i2] = pair12_.sample(rng);
      const std::size_t i6 = conditional_draw(r_[1], r_[2], r3_sampler_, i2, rng);
      return {i1, i2, i6, i2};
    }
    case Branch::kGeneral:
      break;
  }
  // Coupling of the two maximal couplings (r1, r2) and (r3, r4) on pairs.
  const auto [i7, i8] = pair12_exact_.sample(rng);
  const double m7 = check_mass(0, i7, i8);
  const double m9 = check_mass(1, i7, i8);
  if (m9 >= m7 || m7 * rng.uniform() < m9) return {i7, i8, i7, i8};
  for (long iter = 0; iter < kCouplingRejectionCap; ++iter) {
    const auto [a, b] = pair34_exact_.sample(rng);
    if (check_mass(1, a, b) * rng.uniform() > check_mass(0, a, b)) return {i7, i8, a, b};
  }
  throw CouplingCapExceeded("four-way coupling rejection loop exceeded 1e7 iterations");
}

std::array<std::size_t, 4> sample_max_coupling4(const Pmf& r1, const Pmf& r2, const Pmf& r3,
                                                const Pmf& r4, Rng& rng, CheckMeasure check) {
  return FourWayCoupling(r1, r2, r3, r4, ResidualCoupling::kIndependent, check).sample(rng);
}

}  // namespace ubhess
