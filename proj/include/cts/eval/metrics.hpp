#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cts/env/environment.hpp"
#include "cts/eval/policy.hpp"
#include "cts/sim/simulator.hpp"

namespace cts::eval {

struct Metrics {
  double success_guided = 0.0;
  double success_free = 0.0;
  double success_combined = 0.0;
  double skip_guided = 0.0;
  double skip_free = 0.0;
  double mode_f1 = 0.0;
  double mode_consistency = 0.0;
  int n_dialogs = 0;
  int n_guided = 0;
  int n_free = 0;
  std::uint64_t seed = 0;
  double noise = 0.0;

  bool operator==(const Metrics&) const = default;
};

/// Adjacent (SKIP, SKIP) pairs divided by the number of actions. Throws
/// EmptyPath.
double skip_ratio(const std::vector<graph::ActionKind>& path);

/// Mean over dialogs of |fraction predicted Guided - fraction predicted Free|.
/// Dialogs without predictions are left out; 0 if none remain.
double mode_consistency(const std::vector<std::vector<sim::DialogMode>>& per_dialog);

/// Macro-averaged F1 over the two modes; a class with no predicted and no
/// true instances contributes 0.
double macro_f1(const std::vector<sim::DialogMode>& truth, const std::vector<sim::DialogMode>& predicted);

/// Metrics of finished dialogs; `success[i]` belongs to `transcripts[i]`.
Metrics compute_metrics(const std::vector<sim::Transcript>& transcripts, const std::vector<bool>& success);

struct EvalOptions {
  int dialogs = 500;
  std::uint64_t seed = 0;
  env::EnvConfig env;
};

struct EvalResult {
  Metrics metrics;
  std::vector<sim::Transcript> transcripts;
  std::vector<bool> success;
};

/// Runs `options.dialogs` simulated dialogs; dialog i uses seed
/// derive_seed(options.seed, i).
EvalResult run_evaluation(Policy& policy, const env::World& world, const EvalOptions& options);

struct NoiseRow {
  double noise = 0.0;
  Metrics metrics;
};

std::vector<NoiseRow> noise_sweep(Policy& policy, const env::World& world, const EvalOptions& options,
                                  const std::vector<double>& levels);

}  // namespace cts::eval
