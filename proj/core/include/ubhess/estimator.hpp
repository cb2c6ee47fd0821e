#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ubhess/cpf.hpp"
#include "ubhess/discretization.hpp"
#include "ubhess/functionals.hpp"
#include "ubhess/model.hpp"
#include "ubhess/rng.hpp"

namespace ubhess {

// Highest discretization level any distribution places mass on.
inline constexpr int kMaxLevel = 30;

enum class LevelMode { kTruncated, kUntruncatedConstantSigma, kUntruncatedGeneral };

// The randomization law P_L over levels, with survival function
// P_bar(l) = sum_{p >= l} P_L(p).
//   kTruncated:                 P_L(l) ∝ D_l,                          l <= L_max
//   kUntruncatedConstantSigma:  P_L(l) ∝ D_l (l+1) log2(2+l)^2
//   kUntruncatedGeneral:        P_L(l) ∝ D_l^{1/2} (l+1) log2(2+l)^2
// The untruncated forms are normalized over 0..kMaxLevel.
class LevelDistribution {
 public:
  static LevelDistribution truncated(int l_max);
  static LevelDistribution untruncated_constant_sigma();
  static LevelDistribution untruncated_general();

  LevelMode mode() const noexcept { return mode_; }
  int max_level() const noexcept { return static_cast<int>(prob_.size()) - 1; }
  double probability(int l) const noexcept;
  double survival(int l) const noexcept;
  int sample(Rng& rng) const;

  std::string describe() const;

 private:
  LevelDistribution(LevelMode mode, std::vector<double> weights);

  LevelMode mode_;
  std::vector<double> prob_;
  std::vector<double> survival_;
};

struct EstimatorConfig {
  FilterOptions filter;
  int m_star = 2;
  LevelDistribution levels = LevelDistribution::truncated(4);
  std::size_t replicates = 100;
  std::size_t max_iterations = 100'000;
  std::uint64_t seed = 0;
  // 0 selects std::thread::hardware_concurrency().
  unsigned workers = 0;
  // Chains abort with DeadlineExceeded once this point passes.
  std::optional<std::chrono::steady_clock::time_point> deadline;

  // Throws ArgumentError on invalid values.
  void validate() const;
};

// One unbiased increment together with how it was produced.
struct XiResult {
  FunctionalBundle xi;
  CostCounter cost;
  std::size_t iterations = 0;
  // Meeting time of the level-l pair and (for l >= 1) of the level-(l-1) pair.
  std::size_t tau = 0;
  std::size_t tau_coarse = 0;
};

// Single-level coupled-chain estimate of pi^l(f) for every functional in the
// bundle (the unbiased estimator built from one CCPF chain at `level`).
XiResult compute_pi_hat(ParticleFilter& filter, int level, const EstimatorConfig& config, Rng& rng,
                        bool second_order = true);

// Xi^0 = pi_hat^0(f^0).
XiResult compute_xi0(ParticleFilter& filter, const EstimatorConfig& config, Rng& rng,
                     bool second_order = true);
XiResult compute_xi0(const Model& model, const ParameterVector& theta,
                     const ObservationSequence& obs, const EstimatorConfig& config, Rng& rng);

// Xi^l = pi_hat^l(f^l) - pi_hat^{l-1}(f^{l-1}) from one C-CCPF chain, l >= 1.
XiResult compute_xil(ParticleFilter& filter, int level, const EstimatorConfig& config, Rng& rng,
                     bool second_order = true);
XiResult compute_xil(const Model& model, const ParameterVector& theta,
                     const ObservationSequence& obs, int level, const EstimatorConfig& config,
                     Rng& rng);

// Xi^0 for level 0, Xi^l otherwise.
XiResult compute_xi(ParticleFilter& filter, int level, const EstimatorConfig& config, Rng& rng,
                    bool second_order = true);

int sample_level(const LevelDistribution& dist, Rng& rng);

// One replicate term of the Hessian estimator and, from the same first stream,
// one replicate of the score estimator. Packed vectors are over pairs i <= j.
struct ReplicateTerm {
  std::vector<double> hessian;
  std::vector<double> score;
  int level = 0;
  int level_tilde = 0;
  CostCounter cost;
};

// Replicate k of the Hessian estimator; all randomness derives from (config.seed, k).
ReplicateTerm hessian_replicate(ParticleFilter& filter, const EstimatorConfig& config,
                                std::size_t k);
ReplicateTerm hessian_replicate(const Model& model, const ParameterVector& theta,
                                const ObservationSequence& obs, const EstimatorConfig& config,
                                std::size_t k);

// Replicate k of the score estimator (one level draw, G functionals only).
ReplicateTerm score_replicate(ParticleFilter& filter, const EstimatorConfig& config, std::size_t k);

struct HessianEstimate {
  std::size_t dim = 0;
  std::vector<double> mean;       // d x d, row-major, exactly symmetric
  std::vector<double> std_error;  // d x d
  std::vector<double> score;      // d
  std::vector<double> score_std_error;
  std::size_t replicates = 0;
  std::vector<std::pair<int, int>> level_draws;
  std::vector<std::vector<double>> terms;  // packed replicate terms, in replicate order
  CostCounter cost;
};

struct ScoreEstimate {
  std::vector<double> mean;
  std::vector<double> std_error;
  std::size_t replicates = 0;
  std::vector<int> level_draws;
  std::vector<std::vector<double>> terms;
  CostCounter cost;
};

HessianEstimate estimate_hessian(const Model& model, const ParameterVector& theta,
                                 const ObservationSequence& obs, const EstimatorConfig& config);
ScoreEstimate estimate_score(const Model& model, const ParameterVector& theta,
                             const ObservationSequence& obs, const EstimatorConfig& config);

// M independent increments Xi^level (replicate k seeded from (config.seed, k)),
// for variance studies.
struct IncrementSample {
  std::vector<FunctionalBundle> xi;
  CostCounter cost;
};
IncrementSample sample_increments(const Model& model, const ParameterVector& theta,
                                  const ObservationSequence& obs, int level,
                                  const EstimatorConfig& config);

// Runs body(k, filter) for k = 0..count-1 on `workers` threads, each thread with
// its own ParticleFilter. The first failure (lowest k) is rethrown as
// ReplicateFailure once all threads stop; DeadlineExceeded propagates unchanged.
void for_each_replicate(const Model& model, std::span<const double> theta,
                        const ObservationSequence& obs, const FilterOptions& options,
                        std::size_t count, unsigned workers,
                        const std::function<void(std::size_t, ParticleFilter&)>& body);

unsigned resolve_workers(unsigned requested) noexcept;

}  // namespace ubhess
