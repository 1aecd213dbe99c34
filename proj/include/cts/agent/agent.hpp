#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cts/agent/config.hpp"
#include "cts/agent/qnet.hpp"
#include "cts/eval/policy.hpp"
#include "cts/nn/checkpoint.hpp"

namespace cts::agent {

using QNet = CtsQNetwork<float>;

/// Q values of every candidate from one batched forward pass (eval mode).
std::vector<double> q_values(const QNet& net, const env::FeatureLayout& layout, const env::Observation& obs,
                             const std::vector<env::ActionInput>& candidates);

/// Greedy policy over a trained network; the mode head supplies the mode.
class AgentPolicy final : public eval::Policy {
 public:
  AgentPolicy(std::shared_ptr<const QNet> net, env::FeatureLayout layout);
  /// Non-owning view, for evaluation during training.
  AgentPolicy(const QNet& net, env::FeatureLayout layout);

  std::string name() const override { return "agent"; }
  std::size_t act(const env::Observation& obs, const std::vector<env::ActionInput>& candidates) override;
  std::optional<sim::DialogMode> predict_mode(const env::Observation& obs) override;
  eval::Decision decide(const env::Observation& obs, const std::vector<env::ActionInput>& candidates) override;

 private:
  std::shared_ptr<const QNet> owned_;
  const QNet* net_;
  env::FeatureLayout layout_;
};

/// A network with the configuration it was trained under.
struct AgentModel {
  std::shared_ptr<QNet> net;
  TrainerConfig config;
  std::string meta;  // checkpoint metadata (JSON)
};

/// Checkpoint with the network tensors and JSON metadata holding the
/// configuration, its fingerprint and `extra` fields.
nn::Checkpoint agent_checkpoint(const QNet& net, const TrainerConfig& config, const std::string& extra_json = "{}");
/// Throws CheckpointError if the file is not an agent checkpoint.
AgentModel agent_from_checkpoint(const nn::Checkpoint& checkpoint);
AgentModel load_agent(const std::string& path);

}  // namespace cts::agent
