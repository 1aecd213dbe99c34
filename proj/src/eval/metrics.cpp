#include "cts/eval/metrics.hpp"

#include <cmath>

#include "cts/common/error.hpp"

namespace cts::eval {

using graph::ActionKind;
using sim::DialogMode;

std::size_t OraclePolicy::act(const env::Observation&, const std::vector<env::ActionInput>&) {
  if (!session_) throw Error("oracle policy needs a simulated session");
  return sim::oracle_action(*session_);
}

std::optional<DialogMode> OraclePolicy::predict_mode(const env::Observation&) {
  if (!session_) return std::nullopt;
  return session_->goal().mode;
}

double skip_ratio(const std::vector<ActionKind>& path) {
  if (path.empty()) throw EmptyPath("skip ratio of an empty dialog");
  std::size_t pairs = 0;
  for (std::size_t i = 1; i < path.size(); ++i)
    if (path[i - 1] == ActionKind::Skip && path[i] == ActionKind::Skip) ++pairs;
  return static_cast<double>(pairs) / static_cast<double>(path.size());
}

double mode_consistency(const std::vector<std::vector<DialogMode>>& per_dialog) {
  double sum = 0.0;
  int counted = 0;
  for (const auto& preds : per_dialog) {
    if (preds.empty()) continue;
    double guided = 0.0;
    for (auto m : preds) guided += m == DialogMode::Guided ? 1.0 : 0.0;
    const double pg = guided / static_cast<double>(preds.size());
    sum += std::abs(pg - (1.0 - pg));
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / counted;
}

double macro_f1(const std::vector<DialogMode>& truth, const std::vector<DialogMode>& predicted) {
  if (truth.size() != predicted.size()) throw DimensionMismatch("macro_f1: label counts differ");
  double total = 0.0;
  for (auto cls : {DialogMode::Guided, DialogMode::Free}) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == cls;
      const bool p = predicted[i] == cls;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    const double denom = 2 * tp + fp + fn;
    total += denom == 0 ? 0.0 : 2 * tp / denom;
  }
  return total / 2.0;
}

Metrics compute_metrics(const std::vector<sim::Transcript>& transcripts, const std::vector<bool>& success) {
  if (transcripts.size() != success.size()) throw DimensionMismatch("compute_metrics: one success flag per dialog");
  Metrics m;
  m.n_dialogs = static_cast<int>(transcripts.size());
  double ok_guided = 0, ok_free = 0, skip_guided = 0, skip_free = 0;
  std::vector<DialogMode> truth, predicted;
  std::vector<std::vector<DialogMode>> per_dialog;
  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    const auto& t = transcripts[i];
    std::vector<ActionKind> path;
    std::vector<DialogMode> preds;
    for (const auto& turn : t.turns) {
      path.push_back(turn.action);
      if (turn.mode_prediction) {
        preds.push_back(*turn.mode_prediction);
        truth.push_back(t.mode);
        predicted.push_back(*turn.mode_prediction);
      }
    }
    per_dialog.push_back(std::move(preds));
    const double ratio = path.empty() ? 0.0 : skip_ratio(path);
    if (t.mode == DialogMode::Guided) {
      ++m.n_guided;
      ok_guided += success[i];
      skip_guided += ratio;
    } else {
      ++m.n_free;
      ok_free += success[i];
      skip_free += ratio;
    }
  }
  if (m.n_guided > 0) {
    m.success_guided = ok_guided / m.n_guided;
    m.skip_guided = skip_guided / m.n_guided;
  }
  if (m.n_free > 0) {
    m.success_free = ok_free / m.n_free;
    m.skip_free = skip_free / m.n_free;
  }
  if (m.n_dialogs > 0) m.success_combined = (ok_guided + ok_free) / m.n_dialogs;
  m.mode_f1 = truth.empty() ? 0.0 : macro_f1(truth, predicted);
  m.mode_consistency = mode_consistency(per_dialog);
  return m;
}

EvalResult run_evaluation(Policy& policy, const env::World& world, const EvalOptions& options) {
  env::Environment environment(world, options.env);
  EvalResult result;
  for (int i = 0; i < options.dialogs; ++i) {
    auto step = environment.reset(derive_seed(options.seed, static_cast<std::uint64_t>(i)));
    policy.begin_dialog(&environment.session());
    while (!step.done) {
      const auto decision = policy.decide(step.obs, step.candidates);
      step = environment.step(decision.action);
      if (decision.mode) environment.session().annotate_mode(*decision.mode);
    }
    result.transcripts.push_back(environment.session().transcript());
    result.success.push_back(environment.session().success());
  }
  result.metrics = compute_metrics(result.transcripts, result.success);
  result.metrics.seed = options.seed;
  result.metrics.noise = options.env.noise;
  return result;
}

std::vector<NoiseRow> noise_sweep(Policy& policy, const env::World& world, const EvalOptions& options,
                                  const std::vector<double>& levels) {
  std::vector<NoiseRow> rows;
  for (double level : levels) {
    auto opts = options;
    opts.env.noise = level;
    rows.push_back({level, run_evaluation(policy, world, opts).metrics});
  }
  return rows;
}

}  // namespace cts::eval
