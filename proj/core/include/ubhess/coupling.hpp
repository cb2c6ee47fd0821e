#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ubhess/rng.hpp"

namespace ubhess {

// A probability mass function over indices 0..N-1.
class Pmf {
 public:
  // Normalizes non-negative weights with a positive total.
  static Pmf from_weights(std::span<const double> weights);
  // Normalizes exp(log_weights) stably (log-sum-exp); -inf entries get zero mass.
  static Pmf from_log_weights(std::span<const double> log_weights);

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const noexcept { return p_[i]; }
  std::span<const double> probabilities() const noexcept { return p_; }

  // Componentwise exact equality.
  friend bool operator==(const Pmf& a, const Pmf& b) noexcept { return a.p_ == b.p_; }

 private:
  explicit Pmf(std::vector<double> p) : p_(std::move(p)) {}
  std::vector<double> p_;
};

// Inverse-CDF sampling from unnormalized non-negative masses.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(std::span<const double> masses);

  double total() const noexcept { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  // u in [0, 1).
  std::size_t invert(double u) const noexcept;
  std::size_t sample(Rng& rng) const noexcept { return invert(rng.uniform()); }

 private:
  std::vector<double> cumulative_;
  std::size_t last_positive_ = 0;
};

// How the non-overlapping part of a maximal coupling is drawn.
//   kIndependent: two independent residual draws (exact maximal coupling).
//   kInversion: both residual CDFs inverted at one shared uniform.
enum class ResidualCoupling { kIndependent, kInversion };

// Sampler for a maximal coupling of two PMFs on the same support size.
// Precomputes overlap and residual CDFs so repeated draws cost O(log N).
class MaximalCoupling {
 public:
  MaximalCoupling(const Pmf& r1, const Pmf& r2, ResidualCoupling residual);

  std::pair<std::size_t, std::size_t> sample(Rng& rng) const;

  // P(i = j) = sum_k min(r1^k, r2^k).
  double overlap() const noexcept { return overlap_; }
  // Joint mass of (i, j) under the kIndependent construction.
  double joint_mass(std::size_t i, std::size_t j) const noexcept;

 private:
  std::vector<double> min_;
  std::vector<double> residual1_;
  std::vector<double> residual2_;
  double overlap_ = 0.0;
  double residual_total_ = 0.0;
  bool full_overlap_ = false;
  ResidualCoupling kind_;
  DiscreteSampler overlap_sampler_;
  DiscreteSampler residual1_sampler_;
  DiscreteSampler residual2_sampler_;
};

// Iteration cap of the rejection loops in the conditional and four-way samplers.
inline constexpr long kCouplingRejectionCap = 10'000'000;

std::pair<std::size_t, std::size_t> sample_max_coupling(const Pmf& r1, const Pmf& r2, Rng& rng);
std::pair<std::size_t, std::size_t> sample_inversion_residual_coupling(const Pmf& r1, const Pmf& r2,
                                                                       Rng& rng);

// Given i5 ~ r5, returns (i5, i6) with i6 ~ r6 and i6 = i5 with probability
// min(1, r6^{i5} / r5^{i5}). Throws ArgumentError if r5^{i5} = 0.
std::pair<std::size_t, std::size_t> sample_conditional_coupling(const Pmf& r5, const Pmf& r6,
                                                                std::size_t i5, Rng& rng);

// Mass function used to accept/reject pairs when coupling two maximal couplings.
//   kStandard: the joint mass of the independent-residual maximal coupling.
//   kPrinted: min(r_j^a, r_{j+1}^b) + residual product, without the diagonal
//             indicator on the overlap term. Kept for comparison; its marginals are off.
enum class CheckMeasure { kStandard, kPrinted };

// Coupling of four PMFs (r1, r2) fine/coarse of one chain and (r3, r4) of the
// other, such that i_j ~ r_j and equal pairs of PMFs produce equal indices.
class FourWayCoupling {
 public:
  FourWayCoupling(const Pmf& r1, const Pmf& r2, const Pmf& r3, const Pmf& r4,
                  ResidualCoupling residual = ResidualCoupling::kInversion,
                  CheckMeasure check = CheckMeasure::kStandard);

  std::array<std::size_t, 4> sample(Rng& rng) const;

 private:
  enum class Branch { kFirstPairEqual, kSecondPairEqual, kGeneral };

  double check_mass(int which, std::size_t a, std::size_t b) const noexcept;

  std::array<Pmf, 4> r_;
  Branch branch_;
  CheckMeasure check_;
  MaximalCoupling pair12_;
  MaximalCoupling pair34_exact_;
  MaximalCoupling pair12_exact_;
  DiscreteSampler r3_sampler_;
  DiscreteSampler r4_sampler_;
};

std::array<std::size_t, 4> sample_max_coupling4(const Pmf& r1, const Pmf& r2, const Pmf& r3,
                                                const Pmf& r4, Rng& rng,
                                                CheckMeasure check = CheckMeasure::kStandard);

}  // namespace ubhess
