#include "ubhess/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "ubhess/errors.hpp"

namespace ubhess {

namespace {

// Stream tags for derive_seed(seed, {k, tag, level}).
constexpr std::uint64_t kLevelStream = 0;
constexpr std::uint64_t kPrimaryStream = 1;
constexpr std::uint64_t kTildeStream = 2;

// Running sum of pi_hat for one coupled pair:
// f(X(m*)) + sum_{m* < m < tau} [f(X(m)) - f(X_bar(m))].
class PairAccumulator {
 public:
  PairAccumulator(const Model& model, std::span<const double> theta,
                  const ObservationSequence& obs, int m_star, bool second_order)
      : model_(&model),
        theta_(theta),
        obs_(&obs),
        m_star_(static_cast<std::size_t>(m_star)),
        second_order_(second_order),
        sum_(static_cast<std::size_t>(model.param_dim())),
        f_(static_cast<std::size_t>(model.param_dim())),
        f_bar_(static_cast<std::size_t>(model.param_dim())) {}

  void observe(std::size_t m, const CoupledPair& pair) {
    if (pair.met && tau_ == 0) tau_ = m;
    if (m == m_star_) {
      evaluate_functionals(*model_, theta_, pair.x, *obs_, second_order_, f_);
      sum_.add_scaled(f_, 1.0);
    } else if (m > m_star_ && !pair.met) {
      evaluate_functionals(*model_, theta_, pair.x, *obs_, second_order_, f_);
      evaluate_functionals(*model_, theta_, pair.x_bar, *obs_, second_order_, f_bar_);
      sum_.add_difference(f_, f_bar_);
    }
  }

  bool done(std::size_t m) const noexcept { return tau_ != 0 && m >= m_star_; }
  std::size_t tau() const noexcept { return tau_; }
  const FunctionalBundle& sum() const noexcept { return sum_; }

 private:
  const Model* model_;
  std::span<const double> theta_;
  const ObservationSequence* obs_;
  std::size_t m_star_;
  bool second_order_;
  std::size_t tau_ = 0;
  FunctionalBundle sum_;
  FunctionalBundle f_;
  FunctionalBundle f_bar_;
};

[[noreturn]] void meeting_failure(std::size_t cap, int level) {
  throw MeetingFailure("coupled chains at level " + std::to_string(level) + " did not meet within " +
                       std::to_string(cap) + " iterations");
}

void check_deadline(const EstimatorConfig& config) {
  if (config.deadline && std::chrono::steady_clock::now() > *config.deadline) {
    throw DeadlineExceeded("estimator deadline passed");
  }
}

// Mean and standard error per column over rows of equal length, summed in row order.
void column_stats(const std::vector<std::vector<double>>& rows, std::vector<double>& mean,
                  std::vector<double>& se) {
  const std::size_t width = rows.empty() ? 0 : rows.front().size();
  const std::size_t m = rows.size();
  mean.assign(width, 0.0);
  se.assign(width, 0.0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < width; ++c) mean[c] += row[c];
  }
  for (std::size_t c = 0; c < width; ++c) mean[c] /= static_cast<double>(m);
  if (m < 2) return;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < width; ++c) {
      const double dev = row[c] - mean[c];
      se[c] += dev * dev;
    }
  }
  for (std::size_t c = 0; c < width; ++c) {
    se[c] = std::sqrt(se[c] / static_cast<double>(m - 1) / static_cast<double>(m));
  }
}

}  // namespace

LevelDistribution::LevelDistribution(LevelMode mode, std::vector<double> weights)
    : mode_(mode), prob_(std::move(weights)), survival_(prob_.size()) {
  double total = 0.0;
  for (double w : prob_) total += w;
  for (double& p : prob_) p /= total;
  double tail = 0.0;
  for (std::size_t l = prob_.size(); l-- > 0;) {
    tail += prob_[l];
    survival_[l] = tail;
  }
  survival_[0] = 1.0;
}

LevelDistribution LevelDistribution::truncated(int l_max) {
  if (l_max < 0 || l_max > kMaxLevel) {
    throw ArgumentError("L_max must be in [0, " + std::to_string(kMaxLevel) + "]");
  }
  std::vector<double> w(static_cast<std::size_t>(l_max) + 1);
  for (int l = 0; l <= l_max; ++l) w[static_cast<std::size_t>(l)] = std::ldexp(1.0, -l);
  return {LevelMode::kTruncated, std::move(w)};
}

LevelDistribution LevelDistribution::untruncated_constant_sigma() {
  std::vector<double> w(kMaxLevel + 1);
  for (int l = 0; l <= kMaxLevel; ++l) {
    const double lg = std::log2(2.0 + l);
    w[static_cast<std::size_t>(l)] = std::ldexp(1.0, -l) * (l + 1) * lg * lg;
  }
  return {LevelMode::kUntruncatedConstantSigma, std::move(w)};
}

LevelDistribution LevelDistribution::untruncated_general() {
  std::vector<double> w(kMaxLevel + 1);
  for (int l = 0; l <= kMaxLevel; ++l) {
    const double lg = std::log2(2.0 + l);
    w[static_cast<std::size_t>(l)] = std::sqrt(std::ldexp(1.0, -l)) * (l + 1) * lg * lg;
  }
  return {LevelMode::kUntruncatedGeneral, std::move(w)};
}

double LevelDistribution::probability(int l) const noexcept {
  if (l < 0 || l > max_level()) return 0.0;
  return prob_[static_cast<std::size_t>(l)];
}

double LevelDistribution::survival(int l) const noexcept {
  if (l <= 0) return 1.0;
  if (l > max_level()) return 0.0;
  return survival_[static_cast<std::size_t>(l)];
}

int LevelDistribution::sample(Rng& rng) const {
  const double u = rng.uniform();
  double run = 0.0;
  for (std::size_t l = 0; l < prob_.size(); ++l) {
    run += prob_[l];
    if (u < run) return static_cast<int>(l);
  }
  return max_level();
}

std::string LevelDistribution::describe() const {
  switch (mode_) {
    case LevelMode::kTruncated:
      return "truncated(L_max=" + std::to_string(max_level()) + ")";
    case LevelMode::kUntruncatedConstantSigma:
      return "untruncated-constant-sigma";
    case LevelMode::kUntruncatedGeneral:
      return "untruncated-general";
  }
  return "unknown";
}

int sample_level(const LevelDistribution& dist, Rng& rng) { return dist.sample(rng); }

void EstimatorConfig::validate() const {
  if (filter.num_particles < 2) throw ArgumentError("N must be >= 2");
  if (m_star < 2) throw ArgumentError("m_star must be >= 2");
  if (replicates < 1) throw ArgumentError("M must be >= 1");
  if (max_iterations < static_cast<std::size_t>(m_star)) {
    throw ArgumentError("iteration cap must be at least m_star");
  }
}

XiResult compute_pi_hat(ParticleFilter& filter, int level, const EstimatorConfig& config, Rng& rng,
                        bool second_order) {
  XiResult out;
  CoupledPair state = filter.init_pair(level, rng, &out.cost);
  PairAccumulator acc(filter.model(), filter.theta(), filter.observations(), config.m_star,
                      second_order);
  std::size_t m = 0;
  while (!acc.done(m)) {
    if (m >= config.max_iterations) meeting_failure(config.max_iterations, level);
    check_deadline(config);
    ++m;
    filter.ccpf(state, rng, &out.cost);
    acc.observe(m, state);
  }
  out.xi = acc.sum();
  out.iterations = m;
  out.tau = acc.tau();
  return out;
}

XiResult compute_xi0(ParticleFilter& filter, const EstimatorConfig& config, Rng& rng,
                     bool second_order) {
  return compute_pi_hat(filter, 0, config, rng, second_order);
}

XiResult compute_xi0(const Model& model, const ParameterVector& theta,
                     const ObservationSequence& obs, const EstimatorConfig& config, Rng& rng) {
  config.validate();
  ParticleFilter filter(model, theta.values(), obs, config.filter);
  return compute_xi0(filter, config, rng);
}

XiResult compute_xil(ParticleFilter& filter, int level, const EstimatorConfig& config, Rng& rng,
                     bool second_order) {
  if (level < 1) throw ArgumentError("compute_xil requires level >= 1");
  XiResult out;
  CoupledLevels state = filter.init_levels(level, rng, &out.cost);
  PairAccumulator fine(filter.model(), filter.theta(), filter.observations(), config.m_star,
                       second_order);
  PairAccumulator coarse(filter.model(), filter.theta(), filter.observations(), config.m_star,
                         second_order);
  std::size_t m = 0;
  while (!(fine.done(m) && coarse.done(m))) {
    if (m >= config.max_iterations) meeting_failure(config.max_iterations, level);
    check_deadline(config);
    ++m;
    filter.cccpf(state, rng, &out.cost);
    fine.observe(m, state.fine);
    coarse.observe(m, state.coarse);
  }
  out.xi = fine.sum();
  out.xi.add_scaled(coarse.sum(), -1.0);
  out.iterations = m;
  out.tau = fine.tau();
  out.tau_coarse = coarse.tau();
  return out;
}

XiResult compute_xil(const Model& model, const ParameterVector& theta,
                     const ObservationSequence& obs, int level, const EstimatorConfig& config,
                     Rng& rng) {
  config.validate();
  ParticleFilter filter(model, theta.values(), obs, config.filter);
  return compute_xil(filter, level, config, rng);
}

XiResult compute_xi(ParticleFilter& filter, int level, const EstimatorConfig& config, Rng& rng,
                    bool second_order) {
  return level == 0 ? compute_xi0(filter, config, rng, second_order)
                    : compute_xil(filter, level, config, rng, second_order);
}

ReplicateTerm hessian_replicate(ParticleFilter& filter, const EstimatorConfig& config,
                                std::size_t k) {
  const auto p = static_cast<std::size_t>(filter.model().param_dim());
  ReplicateTerm term;
  Rng level_rng = Rng::derive(config.seed, {k, kLevelStream});
  term.level = config.levels.sample(level_rng);
  term.level_tilde = config.levels.sample(level_rng);

  FunctionalBundle primary(p);
  for (int l = 0; l <= term.level; ++l) {
    Rng rng = Rng::derive(config.seed, {k, kPrimaryStream, static_cast<std::uint64_t>(l)});
    const XiResult xi = compute_xi(filter, l, config, rng, true);
    primary.add_scaled(xi.xi, 1.0 / config.levels.survival(l));
    term.cost += xi.cost;
  }
  std::vector<double> tilde(p, 0.0);
  for (int l = 0; l <= term.level_tilde; ++l) {
    Rng rng = Rng::derive(config.seed, {k, kTildeStream, static_cast<std::uint64_t>(l)});
    const XiResult xi = compute_xi(filter, l, config, rng, false);
    const double w = 1.0 / config.levels.survival(l);
    for (std::size_t i = 0; i < p; ++i) tilde[i] += w * xi.xi.G[i];
    term.cost += xi.cost;
  }

  term.hessian.resize(num_pairs(p));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      const std::size_t ij = pair_index(i, j, p);
      term.hessian[ij] = primary.G[i] * tilde[j] - primary.GG[ij] - primary.H[ij];
    }
  }
  term.score = primary.G;
  return term;
}

ReplicateTerm hessian_replicate(const Model& model, const ParameterVector& theta,
                                const ObservationSequence& obs, const EstimatorConfig& config,
                                std::size_t k) {
  config.validate();
  ParticleFilter filter(model, theta.values(), obs, config.filter);
  return hessian_replicate(filter, config, k);
}

ReplicateTerm score_replicate(ParticleFilter& filter, const EstimatorConfig& config, std::size_t k) {
  const auto p = static_cast<std::size_t>(filter.model().param_dim());
  ReplicateTerm term;
  Rng level_rng = Rng::derive(config.seed, {k, kLevelStream});
  term.level = config.levels.sample(level_rng);
  term.score.assign(p, 0.0);
  for (int l = 0; l <= term.level; ++l) {
    Rng rng = Rng::derive(config.seed, {k, kPrimaryStream, static_cast<std::uint64_t>(l)});
    const XiResult xi = compute_xi(filter, l, config, rng, false);
    const double w = 1.0 / config.levels.survival(l);
    for (std::size_t i = 0; i < p; ++i) term.score[i] += w * xi.xi.G[i];
    term.cost += xi.cost;
  }
  return term;
}

unsigned resolve_workers(unsigned requested) noexcept {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void for_each_replicate(const Model& model, std::span<const double> theta,
                        const ObservationSequence& obs, const FilterOptions& options,
                        std::size_t count, unsigned workers,
                        const std::function<void(std::size_t, ParticleFilter&)>& body) {
  const unsigned threads =
      static_cast<unsigned>(std::min<std::size_t>(resolve_workers(workers), std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> completed{0};
  std::atomic<bool> stop{false};
  std::mutex failure_mutex;
  std::size_t failed_index = count;
  std::string failure_message;
  std::atomic<bool> deadline_hit{false};

  auto worker = [&]() {
    ParticleFilter filter(model, theta, obs, options);
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count) break;
      try {
        body(k, filter);
        completed.fetch_add(1);
      } catch (const DeadlineExceeded&) {
        deadline_hit.store(true);
        stop.store(true);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (k < failed_index) {
          failed_index = k;
          failure_message = e.what();
        }
        stop.store(true);
      }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (deadline_hit.load()) throw DeadlineExceeded("estimator deadline passed");
  if (failed_index < count) throw ReplicateFailure(failed_index, completed.load(), failure_message);
}

HessianEstimate estimate_hessian(const Model& model, const ParameterVector& theta,
                                 const ObservationSequence& obs, const EstimatorConfig& config) {
  config.validate();
  const auto p = static_cast<std::size_t>(model.param_dim());
  std::vector<ReplicateTerm> terms(config.replicates);
  for_each_replicate(model, theta.values(), obs, config.filter, config.replicates, config.workers,
                     [&](std::size_t k, ParticleFilter& filter) {
                       terms[k] = hessian_replicate(filter, config, k);
                     });

  HessianEstimate est;
  est.dim = p;
  est.replicates = config.replicates;
  est.terms.reserve(terms.size());
  std::vector<std::vector<double>> scores;
  scores.reserve(terms.size());
  for (auto& t : terms) {
    est.level_draws.emplace_back(t.level, t.level_tilde);
    est.cost += t.cost;
    est.terms.push_back(std::move(t.hessian));
    scores.push_back(std::move(t.score));
  }
  std::vector<double> packed_mean, packed_se;
  column_stats(est.terms, packed_mean, packed_se);
  est.mean = unpack_symmetric(packed_mean, p);
  est.std_error = unpack_symmetric(packed_se, p);
  column_stats(scores, est.score, est.score_std_error);
  return est;
}

ScoreEstimate estimate_score(const Model& model, const ParameterVector& theta,
                             const ObservationSequence& obs, const EstimatorConfig& config) {
  config.validate();
  std::vector<ReplicateTerm> terms(config.replicates);
  for_each_replicate(model, theta.values(), obs, config.filter, config.replicates, config.workers,
                     [&](std::size_t k, ParticleFilter& filter) {
                       terms[k] = score_replicate(filter, config, k);
                     });
  ScoreEstimate est;
  est.replicates = config.replicates;
  for (auto& t : terms) {
    est.level_draws.push_back(t.level);
    est.cost += t.cost;
    est.terms.push_back(std::move(t.score));
  }
  column_stats(est.terms, est.mean, est.std_error);
  return est;
}

IncrementSample sample_increments(const Model& model, const ParameterVector& theta,
                                  const ObservationSequence& obs, int level,
                                  const EstimatorConfig& config) {
  config.validate();
  std::vector<XiResult> results(config.replicates);
  for_each_replicate(model, theta.values(), obs, config.filter, config.replicates, config.workers,
                     [&](std::size_t k, ParticleFilter& filter) {
                       Rng rng = Rng::derive(config.seed, {k, kPrimaryStream, static_cast<std::uint64_t>(level)});
                       results[k] = compute_xi(filter, level, config, rng, true);
                     });
  IncrementSample out;
  out.xi.reserve(results.size());
  for (auto& r : results) {
    out.cost += r.cost;
    out.xi.push_back(std::move(r.xi));
  }
  return out;
}

}  // namespace ubhess
