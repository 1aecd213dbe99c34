#include "cts/agent/agent.hpp"

#include "json.hpp"

namespace cts::agent {

namespace {

QBatch<float> single(const env::FeatureLayout& layout, const env::Observation& obs,
                     const std::vector<env::ActionInput>& candidates) {
  QBatch<float> b;
  const auto sd = static_cast<Eigen::Index>(layout.state_dim()), ad = static_cast<Eigen::Index>(layout.action_dim());
  b.states.resize(sd, 1);
  env::flatten_state(obs, layout, b.states.data());
  b.actions.resize(ad, static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i)
    env::flatten_action(candidates[i], layout, b.actions.col(static_cast<Eigen::Index>(i)).data());
  b.offsets = {0, static_cast<Eigen::Index>(candidates.size())};
  return b;
}

}  // namespace

std::vector<double> q_values(const QNet& net, const env::FeatureLayout& layout, const env::Observation& obs,
                             const std::vector<env::ActionInput>& candidates) {
  if (candidates.empty()) throw InvalidParams("q_values needs at least one candidate");
  const auto out = net.forward(single(layout, obs, candidates));
  return {out.q.data(), out.q.data() + out.q.size()};
}

AgentPolicy::AgentPolicy(std::shared_ptr<const QNet> net, env::FeatureLayout layout)
    : owned_(std::move(net)), net_(owned_.get()), layout_(std::move(layout)) {}

AgentPolicy::AgentPolicy(const QNet& net, env::FeatureLayout layout) : net_(&net), layout_(std::move(layout)) {}

eval::Decision AgentPolicy::decide(const env::Observation& obs, const std::vector<env::ActionInput>& candidates) {
  const auto out = net_->forward(single(layout_, obs, candidates));
  eval::Decision d;
  Eigen::Index best = 0;
  out.q.maxCoeff(&best);
  d.action = static_cast<std::size_t>(best);
  d.mode = out.mode_logit(0) > 0.0f ? sim::DialogMode::Free : sim::DialogMode::Guided;
  return d;
}

std::size_t AgentPolicy::act(const env::Observation& obs, const std::vector<env::ActionInput>& candidates) {
  return decide(obs, candidates).action;
}

std::optional<sim::DialogMode> AgentPolicy::predict_mode(const env::Observation& obs) {
  // The mode head ignores candidates; a single ASK stands in for them.
  return decide(obs, {env::ActionInput{0, env::Embedding::Zero(static_cast<Eigen::Index>(layout_.embedding)), true}})
      .mode;
}

nn::Checkpoint agent_checkpoint(const QNet& net, const TrainerConfig& config, const std::string& extra_json) {
  nlohmann::ordered_json meta;
  meta["kind"] = "cts-agent";
  meta["state_dim"] = net.state_dim();
  meta["action_dim"] = net.action_dim();
  meta["fingerprint"] = config_fingerprint(config);
  meta["config"] = serialize_config(config);
  meta["extra"] = nlohmann::ordered_json::parse(extra_json);
  nn::Checkpoint c;
  c.meta = meta.dump();
  c.tensors = net.tensors();
  return c;
}

AgentModel agent_from_checkpoint(const nn::Checkpoint& c) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(c.meta);
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError("checkpoint metadata is not JSON");
  }
  if (meta.value("kind", "") != "cts-agent") throw CheckpointError("checkpoint does not hold an agent");
  AgentModel m;
  m.config = parse_config(meta.at("config").get<std::string>());
  m.meta = c.meta;
  m.net = std::make_shared<QNet>(meta.at("state_dim").get<std::size_t>(), meta.at("action_dim").get<std::size_t>(),
                                 m.config.net, 0);
  m.net->load_tensors(c.tensors);
  return m;
}

AgentModel load_agent(const std::string& path) { return agent_from_checkpoint(nn::load_checkpoint(path)); }

}  // namespace cts::agent
