#pragma once

// Closed-form per-iteration query and time predictions for the two classical
// and two quantum iterations, plus the classical and quantum lower bounds.
//
// Hidden constants are 1. Every suppressed polylog is instantiated as one
// factor L(k / delta), with L(x) = max(1, log2 x); explicit log n factors of
// the time bounds use L(n). The model is meant for comparing regimes, not for
// predicting absolute runtimes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "skm/error.hpp"
#include "skm/sample_access.hpp"

namespace skm {

enum class Algorithm { C1, C2, Q1, Q2, LB_classical, LB_quantum };

constexpr std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::C1: return "C1";
    case Algorithm::C2: return "C2";
    case Algorithm::Q1: return "Q1";
    case Algorithm::Q2: return "Q2";
    case Algorithm::LB_classical: return "LB_classical";
    case Algorithm::LB_quantum: return "LB_quantum";
  }
  return "?";
}

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::C1, Algorithm::C2,
                                               Algorithm::Q1, Algorithm::Q2,
                                               Algorithm::LB_classical, Algorithm::LB_quantum};

struct ComplexityInputs {
  MatrixNorms norms;
  std::size_t n = 1;
  std::size_t d = 1;
  std::size_t k = 1;
  double epsilon = 1.0;
  std::optional<double> tau;
  double delta = 0.1;
  /// Use the quantum-random-access-gate runtimes for Q1 and Q2.
  bool qrag = false;
};

struct ComplexityEstimate {
  Algorithm algorithm = Algorithm::C1;
  double queries = 0.0;
  double time = 0.0;
  bool qrag_variant = false;
  ComplexityInputs inputs_echo;
};

inline double clamped_log2(double x) { return std::max(1.0, std::log2(x)); }

inline ComplexityEstimate predict(Algorithm algorithm, const ComplexityInputs& in) {
  const bool needs_tau = algorithm == Algorithm::C2 || algorithm == Algorithm::Q2;
  if (needs_tau && !in.tau) {
    throw Error(ErrorCode::missing_tau, std::string(to_string(algorithm)) + " needs tau");
  }
  if (!(in.epsilon > 0.0)) throw Error(ErrorCode::invalid_parameter, "epsilon must be positive");
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw Error(ErrorCode::invalid_delta, "delta");
  if (needs_tau && !(*in.tau > 0.0)) throw Error(ErrorCode::invalid_tau, "tau must be positive");

  const double n = static_cast<double>(in.n);
  const double d = static_cast<double>(in.d);
  const double k = static_cast<double>(in.k);
  const double eps = in.epsilon;
  const double spectral = in.norms.spectral_upper;
  const double frob = in.norms.frobenius;
  const double n21 = in.norms.norm_21;
  const double n11 = in.norms.norm_11;
  const double n2inf = in.norms.norm_2inf;
  const double polylog = clamped_log2(k / in.delta);
  const double log_n = clamped_log2(n);

  ComplexityEstimate out;
  out.algorithm = algorithm;
  out.inputs_echo = in;
  out.qrag_variant = in.qrag && (algorithm == Algorithm::Q1 || algorithm == Algorithm::Q2);

  switch (algorithm) {
    case Algorithm::C1: {
      const double lead = spectral * spectral / n + n21 * n21 / (n * n);
      out.queries = lead * k * k * d / (eps * eps) * polylog;
      out.time = out.queries * (log_n + k);
      break;
    }
    case Algorithm::C2: {
      const double tau = *in.tau;
      const double lead = spectral * spectral / n + n11 * n11 / (n * n);
      out.queries = lead * frob * frob * n2inf * n2inf / n * k * k * k /
                    (eps * eps * tau * tau) * polylog;
      out.time = out.queries * log_n;
      break;
    }
    case Algorithm::Q1: {
      const double lead = std::sqrt(k) * spectral / std::sqrt(n) + std::sqrt(d) * n21 / n;
      out.queries = lead * std::pow(k, 1.5) * d / eps * polylog;
      out.time = out.qrag_variant ? out.queries * log_n : out.queries * (log_n + std::sqrt(k));
      break;
    }
    case Algorithm::Q2: {
      const double tau = *in.tau;
      const double lead = std::sqrt(k) * spectral / std::sqrt(n) + std::sqrt(d) * n11 / n;
      const double body = frob * n2inf / std::sqrt(n) * std::pow(k, 1.5) / (eps * tau);
      out.queries = lead * body * polylog;
      out.time = out.qrag_variant ? lead * body * log_n * polylog + k * d
                                  : lead * (body * log_n + k * k * d / eps) * polylog;
      break;
    }
    case Algorithm::LB_classical:
      out.queries = std::min(frob * frob / n * k * d / (eps * eps), n * d);
      out.time = out.queries;
      break;
    case Algorithm::LB_quantum:
      out.queries = std::min(frob / std::sqrt(n) * k * d / eps, n * d);
      out.time = out.queries;
      break;
  }
  return out;
}

struct Crossover {
  double epsilon = 0.0;
  double c1_queries = 0.0;
  double q1_queries = 0.0;
};

/// The epsilon at which the C1 and Q1 query predictions coincide, found by
/// bisection on log(epsilon). Below it the quantum prediction is smaller.
inline Crossover crossover_epsilon_c1_q1(ComplexityInputs in) {
  auto gap = [&](double log_eps) {
    in.epsilon = std::exp(log_eps);
    return std::log(predict(Algorithm::Q1, in).queries) -
           std::log(predict(Algorithm::C1, in).queries);
  };
  double lo = -1.0;
  double hi = 1.0;
  for (int expand = 0; expand < 200 && gap(lo) > 0.0; ++expand) lo -= 2.0 * (hi - lo);
  for (int expand = 0; expand < 200 && gap(hi) < 0.0; ++expand) hi += 2.0 * (hi - lo);
  if (!(gap(lo) <= 0.0 && gap(hi) >= 0.0)) {
    throw Error(ErrorCode::invalid_parameter, "no C1/Q1 crossover bracket");
  }
  for (int it = 0; it < 300 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) < 0.0 ? lo : hi) = mid;
  }
  Crossover out;
  out.epsilon = std::exp(0.5 * (lo + hi));
  in.epsilon = out.epsilon;
  out.c1_queries = predict(Algorithm::C1, in).queries;
  out.q1_queries = predict(Algorithm::Q1, in).queries;
  return out;
}

}  // namespace skm
