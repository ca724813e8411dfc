#pragma once

// Experiment orchestration and JSON reports ("schema": "skm-report/1").
//
// Trials are independent: trial t runs with stream key seed ^ mix64(t) and
// may execute on any worker, and reports are assembled in trial order, so
// the output does not depend on SKM_THREADS. Wall-clock fields are omitted
// unless timing is requested, which keeps reports byte-identical per seed.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "skm/adversarial.hpp"
#include "skm/baseline.hpp"
#include "skm/complexity_model.hpp"
#include "skm/dataset_io.hpp"
#include "skm/rng.hpp"
#include "skm/sample_access.hpp"
#include "skm/sublinear_kmeans.hpp"

namespace skm {

using json = nlohmann::json;

inline constexpr const char* kReportSchema = "skm-report/1";
inline constexpr const char* kCostSchema = "skm-cost/1";
inline constexpr const char* kSamplerSchema = "skm-sampler-check/1";
inline constexpr const char* kAdversarialSchema = "skm-adversarial/1";

enum class AlgorithmChoice { lloyd, c1, c2 };

inline AlgorithmChoice parse_algorithm(const std::string& name) {
  if (name == "lloyd") return AlgorithmChoice::lloyd;
  if (name == "c1") return AlgorithmChoice::c1;
  if (name == "c2") return AlgorithmChoice::c2;
  throw Error(ErrorCode::invalid_parameter, "unknown algorithm '" + name + "'");
}

constexpr const char* to_string(AlgorithmChoice a) {
  switch (a) {
    case AlgorithmChoice::lloyd: return "lloyd";
    case AlgorithmChoice::c1: return "c1";
    case AlgorithmChoice::c2: return "c2";
  }
  return "?";
}

struct ExperimentConfig {
  std::string dataset_path;
  DatasetFormat format = DatasetFormat::csv;
  AlgorithmChoice algorithm = AlgorithmChoice::c1;
  std::size_t k = 2;
  double epsilon = 1.0;
  double tau = 0.0;
  double delta = 0.1;
  double threshold_T = 1e-3;
  std::size_t max_iters = 100;
  SampleConstants constants;
  std::optional<std::uint64_t> p_override;
  std::optional<std::uint64_t> q_override;
  SpectralMethod spectral = SpectralMethod::frobenius_bound;
  bool share_draws = true;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  bool oracle = false;
  /// Empty means k-means++ from the base seed; otherwise a centroid CSV.
  std::string init_path;
  std::optional<CentroidSet> init;
  bool timing = false;
  std::string output_path;

  void validate() const {
    if (trials == 0) throw Error(ErrorCode::invalid_parameter, "trials must be >= 1");
    if (k == 0) throw Error(ErrorCode::invalid_parameter, "k must be >= 1");
    if (algorithm != AlgorithmChoice::lloyd) params(0).validate();
  }

  IterationParams params(std::uint64_t trial_seed) const {
    IterationParams p;
    p.epsilon = epsilon;
    p.tau = algorithm == AlgorithmChoice::c2 ? tau : 0.0;
    p.delta = delta;
    p.threshold_T = threshold_T;
    p.max_iters = max_iters;
    p.constants = constants;
    p.mode = algorithm == AlgorithmChoice::c2 ? AssignMode::sampled_assign
                                              : AssignMode::exact_assign;
    p.seed = trial_seed;
    p.p_override = p_override;
    p.q_override = q_override;
    p.spectral = spectral;
    p.share_draws = share_draws;
    return p;
  }
};

// JSON helpers ---------------------------------------------------------------

inline json centroids_json(const CentroidSet& C) {
  json rows = json::array();
  for (std::size_t j = 0; j < C.k(); ++j) {
    const auto c = C.centroid(j);
    rows.push_back(std::vector<double>(c.begin(), c.end()));
  }
  return rows;
}

inline json norms_json(const MatrixNorms& n) {
  return {{"spectral_upper", n.spectral_upper},
          {"spectral_method", to_string(n.spectral_method)},
          {"frobenius", n.frobenius},
          {"norm_21", n.norm_21},
          {"norm_11", n.norm_11},
          {"norm_2inf", n.norm_2inf}};
}

inline json queries_json(const QueryCounter& q) {
  return {{"entry_reads", q.entry_reads}, {"norm_reads", q.norm_reads}, {"samples", q.samples}};
}

inline json iteration_json(const IterationReport& r, bool timing) {
  json j = {{"iteration", r.new_centroids.iteration()},
            {"p_used", r.p_used},
            {"q_used", r.q_used},
            {"p_hits", r.p_hits},
            {"q_hits", r.q_hits},
            {"centroid_shift", r.centroid_shift},
            {"empty_clusters", r.empty_clusters},
            {"rng_draws", r.rng_draws},
            {"distinct_labeled", r.distinct_labeled},
            {"estimator_samples", r.estimator_samples},
            {"input_frobenius_sq", r.input_frobenius_sq},
            {"queries", queries_json(r.queries)},
            {"centroids", centroids_json(r.new_centroids)}};
  if (timing) j["wall_nanos"] = r.wall_nanos;
  return j;
}

// Runs -----------------------------------------------------------------------

struct TrialResult {
  json report;
  bool failed = false;
  double final_rss = 0.0;
  double first_oracle_error = 0.0;
  double max_oracle_error = 0.0;
  std::uint64_t entry_reads = 0;
  std::size_t iterations = 0;
};

inline std::size_t worker_count(std::size_t jobs) {
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SKM_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) workers = std::min<std::size_t>(workers, static_cast<std::size_t>(cap));
  }
  return std::max<std::size_t>(1, std::min(workers, jobs));
}

/// Runs fn(index) for every index in [0, jobs) on up to SKM_THREADS workers.
template <class Fn>
void parallel_for(std::size_t jobs, Fn&& fn) {
  const std::size_t workers = worker_count(jobs);
  if (workers <= 1) {
    for (std::size_t t = 0; t < jobs; ++t) fn(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t t = next++; t < jobs; t = next++) {
        try {
          fn(t);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

constexpr std::uint64_t kInitTag = 0x1417ULL;

inline CentroidSet initial_centroids(const SampleAccessMatrix& m, const ExperimentConfig& cfg) {
  if (cfg.init) return *cfg.init;
  if (!cfg.init_path.empty()) return load_centroids_csv(cfg.init_path);
  SplitMix64 gen = derive_stream(cfg.seed, {kInitTag});
  return kmeanspp_init(m, cfg.k, gen);
}

inline json config_json(const ExperimentConfig& c) {
  json j = {{"dataset_path", c.dataset_path},
            {"format", to_string(c.format)},
            {"algorithm", to_string(c.algorithm)},
            {"k", c.k},
            {"epsilon", c.epsilon},
            {"tau", c.tau},
            {"delta", c.delta},
            {"threshold_T", c.threshold_T},
            {"max_iters", c.max_iters},
            {"const_p", c.constants.p},
            {"const_q", c.constants.q},
            {"const_mm_groups", c.constants.mm_groups},
            {"const_mm_size", c.constants.mm_size},
            {"spectral", to_string(c.spectral)},
            {"share_draws", c.share_draws},
            {"seed", c.seed},
            {"trials", c.trials},
            {"oracle", c.oracle},
            {"init", c.init ? "inline" : (c.init_path.empty() ? "kmeans++" : c.init_path)}};
  j["p_override"] = c.p_override ? json(*c.p_override) : json(nullptr);
  j["q_override"] = c.q_override ? json(*c.q_override) : json(nullptr);
  return j;
}

inline TrialResult run_trial(const SampleAccessMatrix& m, const ExperimentConfig& cfg,
                             const CentroidSet& init, const MatrixNorms& norms,
                             std::size_t trial) {
  TrialResult out;
  const std::uint64_t key = trial_key(cfg.seed, trial);
  json iterations = json::array();
  json oracle_errors = json::array();
  CentroidSet final_centroids = init;
  bool converged = false;

  if (cfg.algorithm == AlgorithmChoice::lloyd) {
    const LloydRun lr = lloyd_run(m, init, cfg.threshold_T, cfg.max_iters);
    converged = lr.converged;
    for (std::size_t t = 1; t < lr.trajectory.size(); ++t) {
      iterations.push_back(
          {{"iteration", t},
           {"centroid_shift", mean_centroid_shift(lr.trajectory[t - 1], lr.trajectory[t])},
           {"centroids", centroids_json(lr.trajectory[t])}});
    }
    out.entry_reads = static_cast<std::uint64_t>(lr.trajectory.size() - 1) * m.n() * m.d();
    out.iterations = lr.trajectory.size() - 1;
    final_centroids = lr.trajectory.back();
  } else {
    IterationParams params = cfg.params(key);
    params.norms = norms;
    CentroidSet current = init;
    for (std::size_t t = 0; t < params.max_iters; ++t) {
      SplitMix64 gen = derive_stream(params.seed, {detail::kIterationTag, t});
      IterationReport r = iterate(m, current, params, gen);
      json ij = iteration_json(r, cfg.timing);
      if (cfg.oracle) {
        const double err = max_centroid_error(r.new_centroids, lloyd_iterate(m, current));
        ij["oracle_error"] = err;
        oracle_errors.push_back(err);
        if (t == 0) out.first_oracle_error = err;
        out.max_oracle_error = std::max(out.max_oracle_error, err);
        if (err > cfg.epsilon) out.failed = true;
      }
      out.entry_reads += r.queries.entry_reads;
      iterations.push_back(std::move(ij));
      current = r.new_centroids;
      ++out.iterations;
      if (r.centroid_shift <= params.threshold_T) {
        converged = true;
        break;
      }
    }
    final_centroids = current;
  }
  out.final_rss = rss_cost(m, final_centroids);
  out.report = {{"trial", trial},
                {"stream_key", key},
                {"converged", converged},
                {"iterations", std::move(iterations)},
                {"final_rss", out.final_rss},
                {"entry_reads", out.entry_reads}};
  if (cfg.oracle) {
    out.report["oracle_errors"] = std::move(oracle_errors);
    out.report["failed"] = out.failed;
  }
  return out;
}

inline json run_experiment(const SampleAccessMatrix& m, const ExperimentConfig& cfg) {
  cfg.validate();
  const CentroidSet init = initial_centroids(m, cfg);
  if (init.k() != cfg.k || init.d() != m.d()) {
    throw Error(ErrorCode::dimension_mismatch, "initial centroids do not match k or d");
  }
  const MatrixNorms norms = m.norms(cfg.spectral);

  std::vector<TrialResult> results(cfg.trials);
  parallel_for(cfg.trials, [&](std::size_t t) { results[t] = run_trial(m, cfg, init, norms, t); });

  json report = {{"schema", kReportSchema},
                 {"command", "run"},
                 {"config", config_json(cfg)},
                 {"dataset", {{"n", m.n()}, {"d", m.d()}, {"norms", norms_json(norms)}}},
                 {"initial_centroids", centroids_json(init)}};
  if (cfg.algorithm != AlgorithmChoice::lloyd) {
    const IterationParams p = cfg.params(cfg.seed);
    const SampleSizes s = sample_sizes(norms, m.n(), m.d(), cfg.k, p.epsilon, p.delta, p.mode,
                                       p.constants);
    report["sample_sizes"] = {{"p", cfg.p_override.value_or(s.p)},
                              {"q", cfg.q_override.value_or(s.q)},
                              {"p_formula", s.p_raw},
                              {"q_formula", s.q_raw}};
  }

  json trials = json::array();
  std::size_t failures = 0;
  double rss_sum = 0.0;
  double first_err_sum = 0.0;
  double max_err = 0.0;
  std::uint64_t reads = 0;
  std::size_t iteration_total = 0;
  for (auto& r : results) {
    failures += r.failed ? 1 : 0;
    rss_sum += r.final_rss;
    first_err_sum += r.first_oracle_error;
    max_err = std::max(max_err, r.max_oracle_error);
    reads += r.entry_reads;
    iteration_total += r.iterations;
    trials.push_back(std::move(r.report));
  }
  const double nt = static_cast<double>(cfg.trials);
  json aggregate = {{"trials", cfg.trials},
                    {"mean_final_rss", rss_sum / nt},
                    {"entry_reads_total", reads},
                    {"entry_reads_per_iteration",
                     iteration_total == 0 ? 0.0
                                          : static_cast<double>(reads) /
                                                static_cast<double>(iteration_total)},
                    {"full_read_cost", m.n() * m.d()}};
  if (cfg.oracle) {
    aggregate["failure_fraction"] = static_cast<double>(failures) / nt;
    aggregate["failures"] = failures;
    aggregate["mean_first_oracle_error"] = first_err_sum / nt;
    aggregate["max_oracle_error"] = max_err;
    const LloydRun reference = lloyd_run(m, init, cfg.threshold_T, cfg.max_iters);
    report["lloyd_reference"] = {{"iterations", reference.trajectory.size() - 1},
                                 {"converged", reference.converged},
                                 {"final_rss", rss_cost(m, reference.trajectory.back())}};
  }
  report["aggregate"] = std::move(aggregate);
  report["trials"] = std::move(trials);
  return report;
}

enum class SweepParam { epsilon, q, p, k };

inline SweepParam parse_sweep_param(const std::string& name) {
  if (name == "epsilon") return SweepParam::epsilon;
  if (name == "q") return SweepParam::q;
  if (name == "p") return SweepParam::p;
  if (name == "k") return SweepParam::k;
  throw Error(ErrorCode::invalid_parameter, "unknown sweep parameter '" + name + "'");
}

/// Re-runs the configuration once per value; reports per-value aggregates.
inline json run_sweep(const SampleAccessMatrix& m, const ExperimentConfig& base,
                      SweepParam param, const std::vector<double>& values) {
  json points = json::array();
  const char* name = "epsilon";
  for (double value : values) {
    ExperimentConfig cfg = base;
    switch (param) {
      case SweepParam::epsilon: cfg.epsilon = value; name = "epsilon"; break;
      case SweepParam::q: cfg.q_override = static_cast<std::uint64_t>(value); name = "q"; break;
      case SweepParam::p: cfg.p_override = static_cast<std::uint64_t>(value); name = "p"; break;
      case SweepParam::k:
        cfg.k = static_cast<std::size_t>(value);
        cfg.init.reset();
        name = "k";
        break;
    }
    json r = run_experiment(m, cfg);
    json point = {{"value", value}, {"aggregate", r["aggregate"]}};
    if (r.contains("sample_sizes")) point["sample_sizes"] = r["sample_sizes"];
    points.push_back(std::move(point));
  }
  json cfg_echo = config_json(base);
  return {{"schema", kReportSchema},
          {"command", "sweep"},
          {"param", name},
          {"values", values},
          {"config", cfg_echo},
          {"points", std::move(points)}};
}

// Cost predictions -------------------------------------------------------------

inline json cost_json(const ComplexityEstimate& e) {
  const auto& in = e.inputs_echo;
  json inputs = {{"n", in.n},
                 {"d", in.d},
                 {"k", in.k},
                 {"epsilon", in.epsilon},
                 {"delta", in.delta},
                 {"norms", norms_json(in.norms)}};
  inputs["tau"] = in.tau ? json(*in.tau) : json(nullptr);
  return {{"schema", kCostSchema},
          {"algorithm", std::string(to_string(e.algorithm))},
          {"queries", e.queries},
          {"time", e.time},
          {"qrag_variant", e.qrag_variant},
          {"inputs", std::move(inputs)},
          {"model",
           "hidden constants = 1; polylog factors instantiated as max(1, log2(k/delta)); "
           "log n factors as max(1, log2 n)"}};
}

/// One record per algorithm row; rows needing tau are skipped without one.
inline json predict_costs(const ComplexityInputs& in) {
  json records = json::array();
  for (Algorithm a : kAllAlgorithms) {
    if ((a == Algorithm::C2 || a == Algorithm::Q2) && !in.tau) continue;
    records.push_back(cost_json(predict(a, in)));
  }
  return records;
}

// Sampler validation -----------------------------------------------------------

struct SamplerCheckOptions {
  std::size_t matrices = 20;
  std::size_t max_side = 16;
  std::size_t max_entries = 64;
  std::uint64_t draws = 1000000;
  double tv_threshold = 0.005;
  std::uint64_t seed = 1;
};

inline double total_variation(const std::vector<std::uint64_t>& counts,
                              const std::vector<double>& probs) {
  double total = 0.0;
  for (std::uint64_t c : counts) total += static_cast<double>(c);
  double tv = 0.0;
  for (std::size_t a = 0; a < counts.size(); ++a) {
    tv += std::abs(static_cast<double>(counts[a]) / total - probs[a]);
  }
  return 0.5 * tv;
}

/// Random matrix for sampler checks: shape within max_side and max_entries,
/// entries uniform in [-1, 1] with roughly a fifth set to zero.
inline SampleAccessMatrix random_check_matrix(SplitMix64& gen, const SamplerCheckOptions& o) {
  std::size_t d = 0;
  std::size_t n = 0;
  do {
    d = 1 + static_cast<std::size_t>(uniform_below(gen, o.max_side));
    n = 1 + static_cast<std::size_t>(uniform_below(gen, o.max_side));
  } while (d * n > o.max_entries);
  std::vector<double> values(n * d);
  for (double& x : values) x = uniform01(gen) < 0.2 ? 0.0 : 2.0 * uniform01(gen) - 1.0;
  values[uniform_below(gen, values.size())] = 1.0;  // never identically zero
  return SampleAccessMatrix::build(d, n, std::move(values));
}

inline json validate_samplers(const SamplerCheckOptions& o, bool* all_pass = nullptr) {
  json matrices = json::array();
  bool pass = true;
  SplitMix64 shape_gen = derive_stream(o.seed, {0x5a3e});
  for (std::size_t t = 0; t < o.matrices; ++t) {
    const SampleAccessMatrix m = random_check_matrix(shape_gen, o);
    SplitMix64 gen = derive_stream(o.seed, {0xd4a3, t});
    const std::size_t n = m.n();
    const std::size_t d = m.d();

    std::vector<std::uint64_t> col_counts(n, 0);
    std::vector<double> col_probs(n);
    for (std::uint64_t s = 0; s < o.draws; ++s) ++col_counts[m.sample_col_by_norm(gen)];
    for (std::size_t i = 0; i < n; ++i) col_probs[i] = m.prob_col_by_norm(i);
    const double tv_col = total_variation(col_counts, col_probs);

    std::vector<std::uint64_t> glob_counts(n * d, 0);
    std::vector<double> glob_probs(n * d);
    for (std::uint64_t s = 0; s < o.draws; ++s) {
      const EntryIndex e = m.sample_entry_global(gen);
      ++glob_counts[e.column * d + e.row];
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t l = 0; l < d; ++l) glob_probs[i * d + l] = m.prob_entry_global(i, l);
    }
    const double tv_global = total_variation(glob_counts, glob_probs);

    double tv_entry_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (m.col_norm(i) == 0.0) continue;
      std::vector<std::uint64_t> counts(d, 0);
      std::vector<double> probs(d);
      for (std::uint64_t s = 0; s < o.draws; ++s) ++counts[m.sample_entry_in_col(i, gen)];
      for (std::size_t l = 0; l < d; ++l) probs[l] = m.prob_entry_in_col(i, l);
      tv_entry_max = std::max(tv_entry_max, total_variation(counts, probs));
    }
    const bool ok = tv_col <= o.tv_threshold && tv_global <= o.tv_threshold &&
                    tv_entry_max <= o.tv_threshold;
    pass = pass && ok;
    matrices.push_back({{"index", t},
                        {"d", d},
                        {"n", n},
                        {"tv_col_by_norm", tv_col},
                        {"tv_entry_global", tv_global},
                        {"tv_entry_in_col_max", tv_entry_max},
                        {"pass", ok}});
  }
  if (all_pass) *all_pass = pass;
  return {{"schema", kSamplerSchema},
          {"draws", o.draws},
          {"tv_threshold", o.tv_threshold},
          {"seed", o.seed},
          {"matrices", std::move(matrices)},
          {"pass", pass}};
}

// Adversarial instances ----------------------------------------------------------

/// Sidecar metadata with the hidden bit strings, for verification.
inline json adversarial_sidecar(const AdversarialInstance& inst, std::uint64_t seed) {
  json bits = json::array();
  for (std::size_t i = 0; i < inst.n; ++i) {
    std::string s;
    for (std::uint8_t b : inst.bits(i)) s.push_back(b ? '1' : '0');
    bits.push_back(std::move(s));
  }
  json partition = json::array();
  for (std::size_t j = 0; j < inst.k; ++j) {
    partition.push_back({{"cluster", j},
                         {"first", j * inst.cluster_size()},
                         {"last", (j + 1) * inst.cluster_size() - 1}});
  }
  json rotation = json::array();
  for (std::size_t a = 0; a < inst.d; ++a) {
    rotation.push_back(std::vector<double>(inst.rotation.begin() + a * inst.d,
                                           inst.rotation.begin() + (a + 1) * inst.d));
  }
  return {{"schema", kAdversarialSchema},
          {"n", inst.n},
          {"k", inst.k},
          {"d", inst.d},
          {"alpha", inst.alpha},
          {"seed", seed},
          {"centered", AdversarialInstance::centered},
          {"centering_offset", static_cast<double>(inst.half()) / static_cast<double>(inst.d)},
          {"rotation_kind", "householder reflection of ones/sqrt(d) onto e1"},
          {"rotation", std::move(rotation)},
          {"partition", std::move(partition)},
          {"anchor_centroids", centroids_json(inst.anchor_centroids())},
          {"exact_centroids", centroids_json(inst.exact_centroids())},
          {"hidden_bits", std::move(bits)}};
}

}  // namespace skm
