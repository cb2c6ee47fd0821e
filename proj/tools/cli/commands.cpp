#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "ubhess/errors.hpp"
#include "ubhess/oracle.hpp"

namespace ubhess::cli {

namespace {

using json = nlohmann::json;

constexpr const char* kVersion = "ubhess 0.1.0";

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  return f;
}

json settings_json(const Settings& s) {
  json j;
  j["model"] = s.model;
  j["theta"] = s.theta;
  if (s.x0) j["x0"] = *s.x0;
  if (s.sigma) j["sigma"] = *s.sigma;
  j["level"] = s.level;
  j["n"] = s.n;
  j["l_max"] = s.l_max;
  j["level_mode"] = s.level_mode;
  j["num_particles"] = s.num_particles;
  j["m_star"] = s.m_star;
  j["replicates"] = s.replicates;
  j["max_chain_iterations"] = s.max_chain_iterations;
  j["seed"] = s.seed;
  j["workers"] = s.workers;
  j["coupling"] = s.coupling;
  j["oracle"] = s.oracle;
  j["levels"] = s.levels;
  j["repeats"] = s.repeats;
  j["reference_level"] = s.reference_level;
  j["objective"] = s.objective;
  j["init"] = s.init;
  j["eta"] = s.eta;
  j["max_iter"] = s.max_iter;
  j["tol"] = s.tol;
  j["reference"] = s.reference;
  j["diag_only"] = s.diag_only;
  j["ridge"] = s.ridge;
  if (s.small_grad_threshold) j["small_grad_threshold"] = *s.small_grad_threshold;
  j["small_grad_rate"] = s.small_grad_rate;
  j["data"] = s.data;
  j["out"] = s.out;
  j["paper_scale"] = s.paper_scale;
  return j;
}

void write_manifest(const std::string& command, const Settings& s) {
  json m;
  m["command"] = command;
  m["model"] = s.model;
  m["config"] = settings_json(s);
  m["seed"] = s.seed;
  m["timestamp"] = timestamp();
  m["version"] = kVersion;
  std::ofstream f = open_output(s.out + ".manifest.json");
  f << m.dump(2) << "\n";
}

std::unique_ptr<Model> build_model(const Settings& s) {
  ModelOptions options;
  options.x_star = s.x0;
  options.sigma = s.sigma;
  return make_model(s.model, options);
}

std::vector<double> theta_or_default(const Settings& s) {
  return s.theta.empty() ? default_parameters(s.model) : s.theta;
}

std::vector<std::string> entry_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) names.push_back("h" + std::to_string(i + 1) + std::to_string(j + 1));
  }
  return names;
}

std::vector<std::string> bundle_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < d; ++i) names.push_back("g" + std::to_string(i + 1));
  for (const char* prefix : {"gg", "h"}) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) names.push_back(prefix + std::to_string(i + 1) + std::to_string(j + 1));
    }
  }
  return names;
}

// Reference Hessian for bias and MSE sweeps: the exact Kalman oracle when the
// model is linear-Gaussian, a deep-level estimate otherwise.
std::vector<double> reference_hessian(const Model& model, const ParameterVector& theta,
                                      const ObservationSequence& obs, const Settings& s,
                                      std::string& source) {
  if (model.linear_structure(theta.values())) {
    source = "kalman_exact";
    return oracle_derivatives(model, theta.values(), obs).hessian;
  }
  Settings deep = s;
  deep.l_max = s.reference_level;
  deep.level_mode = "truncated";
  EstimatorConfig cfg = estimator_config(deep);
  cfg.seed = derive_seed(s.seed, {0xfeed});
  source = "estimator_level_" + std::to_string(s.reference_level);
  return estimate_hessian(model, theta, obs, cfg).mean;
}

void write_sweep_footer(std::ostream& f, const std::string& label, const std::vector<double>& x,
                        const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) {
    f << "#fit: " << label << " slope=nan intercept=nan points=" << lx.size() << "\n";
    return;
  }
  const LineFit lf = fit_line(lx, ly);
  f << "#fit: " << label << " slope=" << fmt(lf.slope) << " intercept=" << fmt(lf.intercept)
    << " points=" << lx.size() << "\n";
}

int cmd_simulate(const Settings& s, std::ostream& out) {
  const auto model = build_model(s);
  const ParameterVector theta(*model, theta_or_default(s));
  if (s.n == 0) throw ArgumentError("n must be >= 1");
  const SimulatedData data = simulate_observations(*model, theta, s.level, s.n, s.seed);
  std::ofstream f = open_output(s.out);
  const int dy = model->obs_dim();
  const int dx = model->state_dim();
  f << "t";
  for (int c = 0; c < dy; ++c) f << ",y" << c + 1;
  for (int c = 0; c < dx; ++c) f << ",x" << c + 1;
  f << "\n";
  for (std::size_t p = 0; p < s.n; ++p) {
    f << p + 1;
    for (double v : data.observations[p]) f << "," << fmt(v);
    for (double v : data.latent.at_time(p + 1)) f << "," << fmt(v);
    f << "\n";
  }
  write_manifest("simulate", s);
  out << "wrote " << s.n << " observations to " << s.out << "\n";
  return 0;
}

int cmd_estimate(const std::string& kind, const Settings& s, std::ostream& out) {
  const auto model = build_model(s);
  const ParameterVector theta(*model, theta_or_default(s));
  const ObservationSequence obs = read_observations(s.data);
  const EstimatorConfig cfg = estimator_config(s);
  const auto t0 = std::chrono::steady_clock::now();
  json j;
  j["kind"] = kind;
  j["model"] = s.model;
  j["theta"] = std::vector<double>(theta.values().begin(), theta.values().end());
  j["levels"] = cfg.levels.describe();
  if (kind == "hessian") {
    const HessianEstimate est = estimate_hessian(*model, theta, obs, cfg);
    j["hessian"] = est.mean;
    j["hessian_std_error"] = est.std_error;
    j["score"] = est.score;
    j["score_std_error"] = est.score_std_error;
    j["replicates"] = est.replicates;
    std::vector<std::vector<int>> draws;
    for (const auto& [a, b] : est.level_draws) draws.push_back({a, b});
    j["level_draws"] = draws;
    j["cost"] = {{"euler_steps", est.cost.euler_steps}, {"resampling_ops", est.cost.resampling_ops}};
    if (est.replicates == 1) j["single_replicate"] = est.terms.front();
  } else if (kind == "score") {
    const ScoreEstimate est = estimate_score(*model, theta, obs, cfg);
    j["score"] = est.mean;
    j["score_std_error"] = est.std_error;
    j["replicates"] = est.replicates;
    j["level_draws"] = est.level_draws;
    j["cost"] = {{"euler_steps", est.cost.euler_steps}, {"resampling_ops", est.cost.resampling_ops}};
    if (est.replicates == 1) j["single_replicate"] = est.terms.front();
  } else {
    throw ArgumentError("estimate kind must be 'score' or 'hessian'");
  }
  j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (s.oracle) {
    if (!model->linear_structure(theta.values())) {
      throw ArgumentError("--oracle needs a linear-Gaussian model (ou1d or mou2d)");
    }
    const OracleDerivatives o = oracle_derivatives(*model, theta.values(), obs);
    j["oracle"] = {{"loglik", o.loglik}, {"score", o.score}, {"hessian", o.hessian}};
  }
  std::ofstream f = open_output(s.out);
  f << j.dump(2) << "\n";
  write_manifest("estimate " + kind, s);
  out << "wrote " << kind << " estimate to " << s.out << "\n";
  return 0;
}

int cmd_sweep(const std::string& kind, const Settings& s, std::ostream& out) {
  if (s.levels.empty()) throw ArgumentError("sweep needs a non-empty --levels list");
  if (kind != "bias" && kind != "variance" && kind != "mse") {
    throw ArgumentError("sweep kind must be bias, variance or mse");
  }
  const auto model = build_model(s);
  const ParameterVector theta(*model, theta_or_default(s));
  const ObservationSequence obs = read_observations(s.data);
  const std::size_t d = theta.size();
  std::ofstream f = open_output(s.out);
  std::vector<double> deltas, summed, costs;

  if (kind == "variance") {
    const auto names = bundle_names(d);
    f << "level,delta";
    for (const auto& nm : names) f << ",var_" << nm;
    f << ",summed,replicates,cost\n";
    for (int l : s.levels) {
      Settings ls = s;
      ls.seed = derive_seed(s.seed, {static_cast<std::uint64_t>(l)});
      const IncrementSample sample = sample_increments(*model, theta, obs, l, estimator_config(ls));
      const std::size_t w = names.size();
      std::vector<double> mean(w, 0.0), var(w, 0.0);
      for (const auto& xi : sample.xi) {
        const auto v = xi.flatten();
        for (std::size_t c = 0; c < w; ++c) mean[c] += v[c];
      }
      const double m = static_cast<double>(sample.xi.size());
      for (double& v : mean) v /= m;
      for (const auto& xi : sample.xi) {
        const auto v = xi.flatten();
        for (std::size_t c = 0; c < w; ++c) var[c] += (v[c] - mean[c]) * (v[c] - mean[c]);
      }
      double total = 0.0;
      for (double& v : var) {
        v = m > 1 ? v / (m - 1) : 0.0;
        total += v;
      }
      const double delta = std::ldexp(1.0, -l);
      f << l << "," << fmt(delta);
      for (double v : var) f << "," << fmt(v);
      f << "," << fmt(total) << "," << sample.xi.size() << "," << sample.cost.total() << "\n";
      deltas.push_back(delta);
      summed.push_back(total);
    }
    write_sweep_footer(f, "summed_variance_vs_delta", deltas, summed);
  } else {
    std::string ref_source;
    const std::vector<double> ref = reference_hessian(*model, theta, obs, s, ref_source);
    const auto names = entry_names(d);
    const std::string stat = kind == "bias" ? "bias_" : "mse_";
    f << "level,delta";
    for (const auto& nm : names) f << "," << stat << nm;
    f << ",summed,replicates,cost\n";
    for (int L : s.levels) {
      Settings ls = s;
      ls.l_max = L;
      ls.level_mode = "truncated";
      const std::size_t runs = kind == "bias" ? 1 : s.repeats;
      std::vector<double> acc(d * d, 0.0);
      std::uint64_t cost = 0;
      for (std::size_t r = 0; r < runs; ++r) {
        EstimatorConfig cfg = estimator_config(ls);
        cfg.seed = derive_seed(s.seed, {static_cast<std::uint64_t>(L), r});
        const HessianEstimate est = estimate_hessian(*model, theta, obs, cfg);
        cost += est.cost.total();
        for (std::size_t e = 0; e < d * d; ++e) {
          const double diff = est.mean[e] - ref[e];
          acc[e] += kind == "bias" ? diff : diff * diff;
        }
      }
      double total = 0.0;
      for (double& v : acc) {
        v /= static_cast<double>(runs);
        total += kind == "bias" ? std::abs(v) : v;
      }
      const double delta = std::ldexp(1.0, -L);
      f << L << "," << fmt(delta);
      for (double v : acc) f << "," << fmt(v);
      f << "," << fmt(total) << "," << runs * s.replicates << "," << cost / runs << "\n";
      deltas.push_back(delta);
      summed.push_back(total);
      costs.push_back(static_cast<double>(cost / runs));
    }
    f << "#reference: " << ref_source << "\n";
    write_sweep_footer(f, kind == "bias" ? "summed_abs_bias_vs_delta" : "summed_mse_vs_delta", deltas, summed);
    if (kind == "mse") write_sweep_footer(f, "cost_vs_summed_mse", summed, costs);
  }
  write_manifest("sweep " + kind, s);
  out << "wrote " << kind << " sweep over " << s.levels.size() << " levels to " << s.out << "\n";
  return 0;
}

int cmd_fit(const std::string& method, const Settings& s, std::ostream& out) {
  if (method != "sgd" && method != "newton") throw ArgumentError("fit method must be sgd or newton");
  FitConfig fc = fit_config(s);
  FitTrace trace;
  if (s.objective == "quadratic") {
    // log-likelihood -|theta - c|^2 centred at the reference.
    const std::vector<double> c = fc.reference ? *fc.reference : std::vector<double>(fc.initial.size(), 0.0);
    const DerivativeSource src = [c](std::span<const double> th, std::size_t) {
      Derivatives d;
      const std::size_t k = th.size();
      d.score.resize(k);
      d.hessian.assign(k * k, 0.0);
      for (std::size_t i = 0; i < k; ++i) {
        d.score[i] = -2.0 * (th[i] - c[i]);
        d.hessian[i * k + i] = 2.0;
      }
      return d;
    };
    trace = method == "sgd" ? sgd_fit(src, fc) : newton_fit(src, fc);
  } else if (s.objective == "likelihood") {
    const auto model = build_model(s);
    const ObservationSequence obs = read_observations(s.data);
    if (s.oracle) {
      const DerivativeSource src = oracle_source(*model, obs);
      trace = method == "sgd" ? sgd_fit(src, fc) : newton_fit(src, fc);
    } else {
      const EstimatorConfig ec = estimator_config(s);
      trace = method == "sgd" ? sgd_fit(*model, obs, ec, fc) : newton_fit(*model, obs, ec, fc);
    }
  } else {
    throw ArgumentError("objective must be likelihood or quadratic");
  }
  std::ofstream f = open_output(s.out);
  f << "iteration";
  for (std::size_t i = 0; i < fc.initial.size(); ++i) f << ",theta" << i + 1;
  f << ",score_norm,distance\n";
  for (const auto& it : trace.iterations) {
    f << it.iteration;
    for (double v : it.theta) f << "," << fmt(v);
    f << "," << fmt(it.score_norm) << "," << fmt(it.distance) << "\n";
  }
  f << "#status: " << to_string(trace.status) << " steps=" << trace.steps() << " cost=" << trace.cost.total();
  if (!trace.message.empty()) f << " message=\"" << trace.message << "\"";
  f << "\n";
  write_manifest("fit " + method, s);
  out << method << " fit " << to_string(trace.status) << " after " << trace.steps() << " steps; trace in "
      << s.out << "\n";
  return 0;
}

template <typename T>
void take(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace

Settings preset(const std::string& model, bool paper_scale) {
  Settings s;
  s.model = model;
  s.theta = default_parameters(model);
  s.reference = s.theta;
  s.paper_scale = paper_scale;
  if (model == "ou1d") {
    s.init = {0.1, 0.1};
    s.eta = 0.002;
  } else if (model == "mou2d") {
    s.init = {0.1, 0.1, 0.1, 0.1};
    s.eta = 0.005;
    s.ridge = 1e-4;
  } else if (model == "fhn") {
    s.init = {0.1, 0.1, 0.1, 0.1};
    s.eta = 0.001;
    s.diag_only = true;
    s.ridge = 1e-4;
    s.small_grad_threshold = 0.1;
    s.small_grad_rate = 0.002;
  }
  if (paper_scale) {
    s.n = 500;
    s.replicates = 10'000;
    s.l_max = 8;
    s.levels = {2, 3, 4, 5, 6, 7};
  } else {
    s.n = 50;
    s.levels = {1, 2, 3, 4, 5};
  }
  return s;
}

void apply_json(Settings& s, const std::string& text) {
  const json j = json::parse(text);
  if (!j.is_object()) throw ArgumentError("config file must hold a JSON object");
  static const std::vector<std::string> known = {
      "model", "theta", "x0", "sigma", "level", "n", "l_max", "level_mode", "num_particles",
      "m_star", "replicates", "max_chain_iterations", "seed", "workers", "coupling", "oracle",
      "levels", "repeats", "reference_level", "objective", "init", "eta", "max_iter", "tol",
      "reference", "diag_only", "ridge", "small_grad_threshold", "small_grad_rate", "data", "out"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ArgumentError("unknown config key '" + key + "'");
    }
  }
  take(j, "model", s.model);
  take(j, "theta", s.theta);
  if (j.contains("x0")) s.x0 = j.at("x0").get<std::vector<double>>();
  if (j.contains("sigma")) s.sigma = j.at("sigma").get<std::vector<double>>();
  take(j, "level", s.level);
  take(j, "n", s.n);
  take(j, "l_max", s.l_max);
  take(j, "level_mode", s.level_mode);
  take(j, "num_particles", s.num_particles);
  take(j, "m_star", s.m_star);
  take(j, "replicates", s.replicates);
  take(j, "max_chain_iterations", s.max_chain_iterations);
  take(j, "seed", s.seed);
  take(j, "workers", s.workers);
  take(j, "coupling", s.coupling);
  take(j, "oracle", s.oracle);
  take(j, "levels", s.levels);
  take(j, "repeats", s.repeats);
  take(j, "reference_level", s.reference_level);
  take(j, "objective", s.objective);
  take(j, "init", s.init);
  take(j, "eta", s.eta);
  take(j, "max_iter", s.max_iter);
  take(j, "tol", s.tol);
  take(j, "reference", s.reference);
  take(j, "diag_only", s.diag_only);
  take(j, "ridge", s.ridge);
  if (j.contains("small_grad_threshold")) s.small_grad_threshold = j.at("small_grad_threshold").get<double>();
  take(j, "small_grad_rate", s.small_grad_rate);
  take(j, "data", s.data);
  take(j, "out", s.out);
}

EstimatorConfig estimator_config(const Settings& s) {
  EstimatorConfig cfg;
  cfg.filter.num_particles = s.num_particles;
  if (s.coupling == "inversion") {
    cfg.filter.residual = ResidualCoupling::kInversion;
  } else if (s.coupling == "maximal") {
    cfg.filter.residual = ResidualCoupling::kIndependent;
  } else {
    throw ArgumentError("coupling must be 'maximal' or 'inversion'");
  }
  cfg.m_star = s.m_star;
  if (s.level_mode == "truncated") {
    cfg.levels = LevelDistribution::truncated(s.l_max);
  } else if (s.level_mode == "untruncated") {
    cfg.levels = LevelDistribution::untruncated_constant_sigma();
  } else if (s.level_mode == "untruncated-general") {
    cfg.levels = LevelDistribution::untruncated_general();
  } else {
    throw ArgumentError("level mode must be truncated, untruncated or untruncated-general");
  }
  cfg.replicates = s.replicates;
  cfg.max_iterations = s.max_chain_iterations;
  cfg.seed = s.seed;
  cfg.workers = s.workers;
  cfg.validate();
  return cfg;
}

FitConfig fit_config(const Settings& s) {
  FitConfig fc;
  fc.initial = s.init;
  fc.learning_rate = s.eta;
  fc.max_iterations = s.max_iter;
  fc.tolerance = s.tol;
  if (!s.reference.empty()) fc.reference = s.reference;
  fc.newton.diagonal_only = s.diag_only;
  fc.newton.ridge = s.ridge;
  fc.newton.small_gradient_threshold = s.small_grad_threshold;
  fc.newton.small_gradient_rate = s.small_grad_rate;
  fc.validate();
  return fc;
}

ObservationSequence read_observations(const std::string& path) {
  if (path.empty()) throw ArgumentError("a --data file is required");
  std::ifstream f(path);
  if (!f) throw ArgumentError("cannot read data file '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw ArgumentError("data file '" + path + "' is empty");
  std::vector<std::size_t> ycols;
  {
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t c = 0; std::getline(ss, cell, ','); ++c) {
      if (!cell.empty() && cell[0] == 'y') ycols.push_back(c);
    }
  }
  if (ycols.empty()) throw ArgumentError("data file has no y columns");
  std::vector<double> values;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    for (std::size_t c : ycols) {
      if (c >= row.size()) throw ArgumentError("short row in data file");
      values.push_back(row[c]);
    }
  }
  if (values.empty()) throw ArgumentError("data file has no observations");
  return ObservationSequence(static_cast<int>(ycols.size()), std::move(values));
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("line fit needs >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0.0)) throw ArgumentError("line fit needs distinct x values");
  LineFit lf;
  lf.slope = sxy / sxx;
  lf.intercept = my - lf.slope * mx;
  return lf;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unbiased score and Hessian estimation for partially observed diffusions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // Raw flag values; only those actually given override the lower layers.
  Settings flags;
  std::string config_path, theta_text, init_text, reference_text, levels_text, x0_text, sigma_text;
  double small_grad = 0.0;
  std::string kind;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--model", flags.model, "ou1d, mou2d or fhn")
        ->check(CLI::IsMember(model_names()));
    sub->add_option("--theta", theta_text, "comma-separated parameter vector");
    sub->add_option("--x0", x0_text, "comma-separated initial state");
    sub->add_option("--sigma", sigma_text, "comma-separated diffusion coefficients");
    sub->add_option("--seed", flags.seed, "root random seed");
    sub->add_option("--workers", flags.workers, "threads (0 = available cores)");
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--out", flags.out, "output path")->required();
    sub->add_flag("--paper-scale", flags.paper_scale, "use the long-horizon reference presets");
  };
  const auto add_estimator = [&](CLI::App* sub) {
    sub->add_option("--data", flags.data, "observation CSV from `simulate`");
    sub->add_option("--L-max", flags.l_max, "truncation level of the level distribution");
    sub->add_option("--level-mode", flags.level_mode, "truncated, untruncated or untruncated-general");
    sub->add_option("--N", flags.num_particles, "particles per filter");
    sub->add_option("--m-star", flags.m_star, "burn-in index (>= 2)");
    sub->add_option("--M", flags.replicates, "independent replicates");
    sub->add_option("--max-chain-iterations", flags.max_chain_iterations, "meeting-time cap");
    sub->add_option("--coupling", flags.coupling, "residual coupling of resampling")
        ->check(CLI::IsMember({"maximal", "inversion"}));
    sub->add_flag("--oracle", flags.oracle, "use or report the Kalman oracle (linear models)");
  };

  CLI::App* sim = app.add_subcommand("simulate", "simulate observations");
  add_common(sim);
  sim->add_option("--level", flags.level, "Euler level used for simulation");
  sim->add_option("--n", flags.n, "number of observations");

  CLI::App* est = app.add_subcommand("estimate", "score or Hessian estimate");
  est->add_option("kind", kind, "score or hessian")->required()->check(CLI::IsMember({"score", "hessian"}));
  add_common(est);
  add_estimator(est);

  CLI::App* sweep = app.add_subcommand("sweep", "bias, variance or MSE sweep over levels");
  sweep->add_option("kind", kind, "bias, variance or mse")
      ->required()
      ->check(CLI::IsMember({"bias", "variance", "mse"}));
  add_common(sweep);
  add_estimator(sweep);
  sweep->add_option("--levels", levels_text, "comma-separated levels");
  sweep->add_option("--repeats", flags.repeats, "independent estimates per level (mse)");
  sweep->add_option("--reference-level", flags.reference_level, "pseudo-truth level for nonlinear models");

  CLI::App* fit = app.add_subcommand("fit", "SGD or Newton parameter fitting");
  fit->add_option("kind", kind, "sgd or newton")->required()->check(CLI::IsMember({"sgd", "newton"}));
  add_common(fit);
  add_estimator(fit);
  fit->add_option("--objective", flags.objective, "likelihood or quadratic")
      ->check(CLI::IsMember({"likelihood", "quadratic"}));
  fit->add_option("--init", init_text, "comma-separated initial parameter");
  fit->add_option("--eta", flags.eta, "SGD learning rate");
  fit->add_option("--max-iter", flags.max_iter, "maximum number of updates");
  fit->add_option("--tol", flags.tol, "convergence threshold");
  fit->add_option("--reference", reference_text, "reference parameter for the distance criterion");
  fit->add_flag("--diag-only", flags.diag_only, "zero the off-diagonal information entries");
  fit->add_option("--ridge", flags.ridge, "value added to the information diagonal");
  fit->add_option("--small-grad-threshold", small_grad, "score norm below which steps are scaled");
  fit->add_option("--small-grad-rate", flags.small_grad_rate, "scale applied to small-gradient steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const auto given = [&](const char* name) { return sub->get_option_no_throw(name) != nullptr && sub->count(name) > 0; };
    const auto parse_list = [](const std::string& text) {
      std::vector<double> v;
      std::stringstream ss(text);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        if (!cell.empty()) v.push_back(std::stod(cell));
      }
      return v;
    };

    // Layer 1: preset of the model named on the command line or in the config.
    std::string model = flags.model;
    std::string config_text;
    if (!config_path.empty()) {
      std::ifstream cf(config_path);
      if (!cf) throw ArgumentError("cannot read config file '" + config_path + "'");
      std::stringstream buf;
      buf << cf.rdbuf();
      config_text = buf.str();
      if (!given("--model")) {
        const json j = json::parse(config_text);
        if (j.contains("model")) model = j.at("model").get<std::string>();
      }
    }
    Settings s = preset(model, flags.paper_scale);
    // Layer 2: JSON config.
    if (!config_text.empty()) apply_json(s, config_text);
    // Layer 3: explicit flags.
    s.model = model;
    if (given("--theta")) s.theta = parse_list(theta_text);
    if (given("--x0")) s.x0 = parse_list(x0_text);
    if (given("--sigma")) s.sigma = parse_list(sigma_text);
    if (given("--seed")) s.seed = flags.seed;
    if (given("--workers")) s.workers = flags.workers;
    s.out = flags.out;
    if (given("--level")) s.level = flags.level;
    if (given("--n")) s.n = flags.n;
    if (given("--data")) s.data = flags.data;
    if (given("--L-max")) s.l_max = flags.l_max;
    if (given("--level-mode")) s.level_mode = flags.level_mode;
    if (given("--N")) s.num_particles = flags.num_particles;
    if (given("--m-star")) s.m_star = flags.m_star;
    if (given("--M")) s.replicates = flags.replicates;
    if (given("--max-chain-iterations")) s.max_chain_iterations = flags.max_chain_iterations;
    if (given("--coupling")) s.coupling = flags.coupling;
    if (given("--oracle")) s.oracle = flags.oracle;
    if (given("--levels")) {
      s.levels.clear();
      for (double v : parse_list(levels_text)) s.levels.push_back(static_cast<int>(v));
    }
    if (given("--repeats")) s.repeats = flags.repeats;
    if (given("--reference-level")) s.reference_level = flags.reference_level;
    if (given("--objective")) s.objective = flags.objective;
    if (given("--init")) s.init = parse_list(init_text);
    if (given("--eta")) s.eta = flags.eta;
    if (given("--max-iter")) s.max_iter = flags.max_iter;
    if (given("--tol")) s.tol = flags.tol;
    if (given("--reference")) s.reference = parse_list(reference_text);
    if (given("--diag-only")) s.diag_only = flags.diag_only;
    if (given("--ridge")) s.ridge = flags.ridge;
    if (given("--small-grad-threshold")) s.small_grad_threshold = small_grad;
    if (given("--small-grad-rate")) s.small_grad_rate = flags.small_grad_rate;
    if (given("--levels") && s.levels.empty()) throw ArgumentError("--levels must list at least one level");

    const std::string name = sub->get_name();
    if (name == "simulate") return cmd_simulate(s, out);
    if (name == "estimate") return cmd_estimate(kind, s, out);
    if (name == "sweep") return cmd_sweep(kind, s, out);
    return cmd_fit(kind, s, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ubhess::cli
