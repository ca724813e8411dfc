// skm: command-line front end for the sampling k-means library.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "skm/skm.hpp"

namespace {

struct CommonOptions {
  std::string dataset;
  std::string format = "csv";
  std::string algorithm = "c1";
  std::size_t k = 2;
  double epsilon = 1.0;
  double tau = 0.0;
  double delta = 0.1;
  double threshold = 1e-3;
  std::size_t max_iters = 100;
  double const_p = 48.0;
  double const_q = 192.0;
  double const_groups = 8.0;
  double const_size = 64.0;
  std::optional<std::uint64_t> p;
  std::optional<std::uint64_t> q;
  std::string spectral = "frobenius_bound";
  bool per_centroid_draws = false;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  bool oracle = false;
  std::string init;
  bool timing = false;
  std::string output;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--dataset", o.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--format", o.format, "csv or f64le")->check(CLI::IsMember({"csv", "f64le"}));
  cmd->add_option("--algorithm", o.algorithm, "lloyd, c1 or c2")
      ->check(CLI::IsMember({"lloyd", "c1", "c2"}));
  cmd->add_option("--k", o.k, "Number of clusters");
  cmd->add_option("--epsilon", o.epsilon, "Centroid accuracy");
  cmd->add_option("--tau", o.tau, "Label slack, c2 only");
  cmd->add_option("--delta", o.delta, "Failure probability");
  cmd->add_option("--threshold", o.threshold, "Stop when the mean centroid shift is below this");
  cmd->add_option("--max-iters", o.max_iters, "Iteration cap");
  cmd->add_option("--const-p", o.const_p, "Leading constant of p");
  cmd->add_option("--const-q", o.const_q, "Leading constant of q");
  cmd->add_option("--const-groups", o.const_groups, "Median-of-means group-count constant");
  cmd->add_option("--const-group-size", o.const_size, "Median-of-means group-size constant");
  cmd->add_option("--p", o.p, "Fixed uniform sample size");
  cmd->add_option("--q", o.q, "Fixed weighted sample size");
  cmd->add_option("--spectral", o.spectral, "frobenius_bound or power_iteration")
      ->check(CLI::IsMember({"frobenius_bound", "power_iteration"}));
  cmd->add_flag("--per-centroid-draws", o.per_centroid_draws,
                "Draw estimator samples separately for every centroid");
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--trials", o.trials, "Independent trials")->check(CLI::PositiveNumber);
  cmd->add_flag("--oracle", o.oracle, "Compare every iteration with Lloyd on the same centroids");
  cmd->add_option("--init", o.init, "Initial centroids CSV (default k-means++)")
      ->check(CLI::ExistingFile);
  cmd->add_flag("--timing", o.timing, "Include wall-clock times (breaks byte-identity)");
  cmd->add_option("--output", o.output, "Report path (default stdout)");
}

skm::ExperimentConfig to_config(const CommonOptions& o) {
  skm::ExperimentConfig c;
  c.dataset_path = o.dataset;
  c.format = skm::parse_format(o.format);
  c.algorithm = skm::parse_algorithm(o.algorithm);
  c.k = o.k;
  c.epsilon = o.epsilon;
  c.tau = o.tau;
  c.delta = o.delta;
  c.threshold_T = o.threshold;
  c.max_iters = o.max_iters;
  c.constants = {o.const_p, o.const_q, o.const_groups, o.const_size};
  c.p_override = o.p;
  c.q_override = o.q;
  c.spectral = o.spectral == "power_iteration" ? skm::SpectralMethod::power_iteration
                                               : skm::SpectralMethod::frobenius_bound;
  c.share_draws = !o.per_centroid_draws;
  c.seed = o.seed;
  c.trials = o.trials;
  c.oracle = o.oracle;
  c.init_path = o.init;
  c.timing = o.timing;
  c.output_path = o.output;
  return c;
}

void emit(const skm::json& j, const std::string& path) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw skm::Error(skm::ErrorCode::io_error, "cannot write " + path);
  os << text;
}

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = list.find(',', start);
    const std::string field = list.substr(start, comma == std::string::npos ? std::string::npos
                                                                            : comma - start);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (field.empty() || used != field.size()) {
      throw skm::Error(skm::ErrorCode::parse_error, "bad value '" + field + "' in --values");
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampling-based approximate k-means"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  CLI::App* run = app.add_subcommand("run", "Run one configuration for several trials");
  add_common(run, run_opts);

  CommonOptions sweep_opts;
  std::string sweep_param = "epsilon";
  std::string sweep_values;
  CLI::App* sweep = app.add_subcommand("sweep", "Vary one parameter and aggregate");
  add_common(sweep, sweep_opts);
  sweep->add_option("--param", sweep_param, "epsilon, q, p or k")
      ->check(CLI::IsMember({"epsilon", "q", "p", "k"}));
  sweep->add_option("--values", sweep_values, "Comma-separated values")->required();

  std::size_t adv_n = 8;
  std::size_t adv_k = 2;
  std::size_t adv_d = 4;
  double adv_alpha = 1.0;
  std::uint64_t adv_seed = 0;
  std::string adv_out;
  std::string adv_meta;
  CLI::App* gen = app.add_subcommand("gen-adversarial", "Write a lower-bound instance");
  gen->add_option("--n", adv_n, "Columns");
  gen->add_option("--k", adv_k, "Clusters (must divide n)");
  gen->add_option("--d", adv_d, "Dimension");
  gen->add_option("--alpha", adv_alpha, "Scale");
  gen->add_option("--seed", adv_seed, "Seed");
  gen->add_option("--output", adv_out, "f64le dataset path")->required();
  gen->add_option("--metadata", adv_meta, "Sidecar JSON path (default <output>.json)");

  std::string cost_dataset;
  std::string cost_format = "csv";
  std::size_t cost_k = 2;
  double cost_eps = 1.0;
  std::optional<double> cost_tau;
  double cost_delta = 0.1;
  bool cost_qrag = false;
  std::string cost_spectral = "frobenius_bound";
  std::string cost_out;
  CLI::App* cost = app.add_subcommand("predict-cost", "Evaluate the complexity model");
  cost->add_option("--dataset", cost_dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  cost->add_option("--format", cost_format, "csv or f64le")
      ->check(CLI::IsMember({"csv", "f64le"}));
  cost->add_option("--k", cost_k, "Clusters");
  cost->add_option("--epsilon", cost_eps, "Accuracy");
  cost->add_option("--tau", cost_tau, "Label slack; enables the C2 and Q2 rows");
  cost->add_option("--delta", cost_delta, "Failure probability");
  cost->add_flag("--qrag", cost_qrag, "Quantum rows assume a random access gate");
  cost->add_option("--spectral", cost_spectral, "frobenius_bound or power_iteration")
      ->check(CLI::IsMember({"frobenius_bound", "power_iteration"}));
  cost->add_option("--output", cost_out, "Output path (default stdout)");

  skm::SamplerCheckOptions check;
  std::string check_out;
  CLI::App* validate = app.add_subcommand("validate-sampler", "Check sampler distributions");
  validate->add_option("--matrices", check.matrices, "Random matrices");
  validate->add_option("--draws", check.draws, "Draws per distribution");
  validate->add_option("--tv", check.tv_threshold, "Total-variation threshold");
  validate->add_option("--seed", check.seed, "Seed");
  validate->add_option("--output", check_out, "Output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const skm::ExperimentConfig cfg = to_config(run_opts);
      const auto m = skm::load_dataset(cfg.dataset_path, cfg.format);
      emit(skm::run_experiment(m, cfg), cfg.output_path);
    } else if (*sweep) {
      const skm::ExperimentConfig cfg = to_config(sweep_opts);
      const auto m = skm::load_dataset(cfg.dataset_path, cfg.format);
      emit(skm::run_sweep(m, cfg, skm::parse_sweep_param(sweep_param), parse_values(sweep_values)),
           cfg.output_path);
    } else if (*gen) {
      skm::SplitMix64 rng(adv_seed);
      const auto inst = skm::build_instance(adv_n, adv_k, adv_d, adv_alpha, rng);
      skm::write_f64le_file(adv_out, inst.matrix);
      emit(skm::adversarial_sidecar(inst, adv_seed), adv_meta.empty() ? adv_out + ".json" : adv_meta);
    } else if (*cost) {
      const auto m = skm::load_dataset(cost_dataset, skm::parse_format(cost_format));
      skm::ComplexityInputs in;
      in.norms = m.norms(cost_spectral == "power_iteration" ? skm::SpectralMethod::power_iteration
                                                           : skm::SpectralMethod::frobenius_bound);
      in.n = m.n();
      in.d = m.d();
      in.k = cost_k;
      in.epsilon = cost_eps;
      in.tau = cost_tau;
      in.delta = cost_delta;
      in.qrag = cost_qrag;
      emit(skm::predict_costs(in), cost_out);
    } else if (*validate) {
      bool pass = false;
      emit(skm::validate_samplers(check, &pass), check_out);
      if (!pass) {
        std::cerr << "sampler validation failed\n";
        return 1;
      }
    }
  } catch (const skm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
