#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ubhess/estimator.hpp"
#include "ubhess/model.hpp"
#include "ubhess/optimize.hpp"

namespace ubhess::cli {

// Every knob a subcommand can read. Values are resolved in three layers:
// model preset, then a JSON config file, then explicitly passed flags.
struct Settings {
  std::string model = "ou1d";
  std::vector<double> theta;
  std::optional<std::vector<double>> x0;
  std::optional<std::vector<double>> sigma;

  // simulate
  int level = 10;
  std::size_t n = 50;

  // estimator
  int l_max = 4;
  std::string level_mode = "truncated";
  std::size_t num_particles = 32;
  int m_star = 2;
  std::size_t replicates = 100;
  std::size_t max_chain_iterations = 100'000;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  std::string coupling = "inversion";
  bool oracle = false;

  // sweep
  std::vector<int> levels;
  std::size_t repeats = 20;
  int reference_level = 10;

  // fit
  std::string objective = "likelihood";
  std::vector<double> init;
  double eta = 0.002;
  std::size_t max_iter = 100;
  double tol = 0.02;
  std::vector<double> reference;
  bool diag_only = false;
  double ridge = 0.0;
  std::optional<double> small_grad_threshold;
  double small_grad_rate = 0.002;

  std::string data;
  std::string out;
  bool paper_scale = false;
};

// Built-in parameter values for a model; the paper-scale variant uses the long
// horizon and large replicate counts of the reference experiments.
Settings preset(const std::string& model, bool paper_scale);

// Overlays keys of a JSON object (snake_case field names) onto settings.
// Unknown keys are rejected.
void apply_json(Settings& settings, const std::string& json_text);

EstimatorConfig estimator_config(const Settings& s);
FitConfig fit_config(const Settings& s);

// Observation CSV written by `simulate`: header t,y1..yd[,x1..xd].
ObservationSequence read_observations(const std::string& path);

// Ordinary least-squares slope and intercept of y on x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Entry point used by the executable and the tests. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ubhess::cli
