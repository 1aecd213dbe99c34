#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cts/env/observation.hpp"
#include "cts/sim/simulator.hpp"

namespace cts::eval {

struct Decision {
  std::size_t action = 0;
  std::optional<sim::DialogMode> mode;
};

/// Anything that can run a dialog. `session` is the simulated dialog when
/// one exists (live chats pass nullptr); only oracles may look inside it.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual void begin_dialog(const sim::Session* session) { (void)session; }
  virtual std::size_t act(const env::Observation& obs, const std::vector<env::ActionInput>& candidates) = 0;
  virtual std::optional<sim::DialogMode> predict_mode(const env::Observation& obs) {
    (void)obs;
    return std::nullopt;
  }
  /// Action plus mode guess; override when both come from one computation.
  virtual Decision decide(const env::Observation& obs, const std::vector<env::ActionInput>& candidates) {
    Decision d;
    d.action = act(obs, candidates);
    d.mode = predict_mode(obs);
    return d;
  }
};

/// Perfect-knowledge policy built on sim::oracle_action.
class OraclePolicy final : public Policy {
 public:
  std::string name() const override { return "oracle"; }
  void begin_dialog(const sim::Session* session) override { session_ = session; }
  std::size_t act(const env::Observation&, const std::vector<env::ActionInput>&) override;
  std::optional<sim::DialogMode> predict_mode(const env::Observation&) override;

 private:
  const sim::Session* session_ = nullptr;
};

/// Uniformly random actions and mode guesses; useful for audits.
class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  std::string name() const override { return "random"; }
  std::size_t act(const env::Observation&, const std::vector<env::ActionInput>& candidates) override {
    return rng_.index(candidates.size());
  }
  std::optional<sim::DialogMode> predict_mode(const env::Observation&) override {
    return rng_.bernoulli(0.5) ? sim::DialogMode::Free : sim::DialogMode::Guided;
  }

 private:
  Rng rng_;
};

}  // namespace cts::eval
