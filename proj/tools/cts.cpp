// Command-line front end: tree tools, training, evaluation, chat and serving.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cts/agent/agent.hpp"
#include "cts/agent/config.hpp"
#include "cts/agent/trainer.hpp"
#include "cts/baseline/baseline.hpp"
#include "cts/env/environment.hpp"
#include "cts/eval/metrics.hpp"
#include "cts/eval/report.hpp"
#include "cts/graph/synth.hpp"
#include "cts/graph/tree_io.hpp"
#include "cts/nn/checkpoint.hpp"
#include "cts/service/http.hpp"
#include "cts/service/session.hpp"

namespace fs = std::filesystem;
using namespace cts;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

/// Where the world comes from and which policies can use it.
struct WorldOptions {
  std::string tree;
  std::string corpus;
  std::string embeddings;
  int dim = 256;
  std::string split = "train";
  std::string checkpoint;
  std::string classifier;
};

void add_world_options(CLI::App* cmd, WorldOptions& o) {
  cmd->add_option("--tree", o.tree, "Dialog tree file (defaults to the checkpoint's)");
  cmd->add_option("--corpus", o.corpus, "Utterance corpus file");
  cmd->add_option("--embeddings", o.embeddings, "Precomputed embeddings file");
  cmd->add_option("--dim", o.dim, "Built-in encoder dimension when no checkpoint is given");
  cmd->add_option("--split", o.split, "Corpus split: train, test, all or prototype");
  cmd->add_option("--checkpoint", o.checkpoint, "Agent checkpoint");
  cmd->add_option("--classifier", o.classifier, "Baseline mode-classifier checkpoint (trained if absent)");
}

/// Everything a policy needs, loaded once.
struct Loaded {
  env::World world;
  env::EnvConfig env;
  std::optional<agent::AgentModel> agent;
  env::FeatureLayout layout;
  std::shared_ptr<const env::ObservationBuilder> builder;
};

Loaded load(const WorldOptions& o) {
  Loaded l;
  std::string tree = o.tree, corpus = o.corpus, embeddings = o.embeddings;
  int dim = o.dim;
  l.env = agent::TrainerConfig{}.env;
  if (!o.checkpoint.empty()) {
    l.agent = agent::load_agent(o.checkpoint);
    const auto& c = l.agent->config;
    if (tree.empty()) tree = c.tree;
    if (corpus.empty()) corpus = c.corpus;
    if (embeddings.empty()) embeddings = c.embeddings;
    dim = c.embedding_dim;
    l.env = c.env;
  }
  if (tree.empty()) throw ConfigError("no tree given (use --tree or a checkpoint)");
  l.env.sim.split = graph::corpus_split_from_string(o.split);
  l.world = env::load_world(tree, corpus, embeddings, dim);
  l.builder = std::make_shared<env::ObservationBuilder>(l.world.tree, l.world.encoder, l.env.mask);
  l.layout = l.builder->layout();
  if (l.agent && (l.layout.state_dim() != l.agent->net->state_dim() ||
                  l.layout.action_dim() != l.agent->net->action_dim()))
    throw CheckpointError("checkpoint input sizes do not match the tree and encoder");
  return l;
}

baseline::ModeClassifier classifier_for(const Loaded& l, const WorldOptions& o, std::uint64_t seed) {
  if (!o.classifier.empty()) return baseline::ModeClassifier::from_checkpoint(nn::load_checkpoint(o.classifier));
  baseline::ClassifierConfig cfg;
  cfg.seed = seed;
  return baseline::ModeClassifier::train(l.world, l.env, cfg);
}

std::map<std::string, service::PolicyFactory> policy_factories(const Loaded& l, const WorldOptions& o,
                                                                std::uint64_t seed) {
  std::map<std::string, service::PolicyFactory> out;
  if (l.agent) {
    auto net = std::shared_ptr<const agent::QNet>(l.agent->net);
    const auto layout = l.layout;
    out["agent"] = [net, layout] { return std::make_unique<agent::AgentPolicy>(net, layout); };
  }
  const auto clf = classifier_for(l, o, seed);
  const auto tree = l.world.tree;
  const auto encoder = l.world.encoder;
  out["baseline"] = [tree, encoder, clf] { return std::make_unique<baseline::BaselinePolicy>(tree, encoder, clf); };
  return out;
}

int cmd_tree_validate(const std::string& file) {
  const auto tree = graph::load_tree(file);
  std::cout << "ok: " << tree.size() << " nodes, depth " << tree.max_depth() << "\n";
  return 0;
}

int cmd_tree_synth(int nodes, std::uint64_t seed, const std::string& out, std::string corpus_out) {
  graph::SynthParams p;
  p.node_count = nodes;
  const auto [tree, corpus] = graph::synthesize_tree(p, seed);
  graph::save_tree(tree, out);
  if (corpus_out.empty()) corpus_out = (fs::path(out).parent_path() / (fs::path(out).stem().string() + ".corpus.json")).string();
  write_file(corpus_out, graph::serialize_corpus(corpus));
  std::cout << "wrote " << out << " (" << tree.size() << " nodes, depth " << tree.max_depth() << ") and " << corpus_out
            << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<long> max_turns,
              const std::string& output_dir) {
  auto cfg = agent::load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (max_turns) cfg.max_turns = *max_turns;
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  agent::check_config(cfg);
  if (cfg.tree.empty()) throw ConfigError("[paths] tree is required");
  const auto world = env::load_world(cfg.tree, cfg.corpus, cfg.embeddings, cfg.embedding_dim);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_file(dir / "config.ini", agent::serialize_config(cfg));

  agent::Trainer trainer(world, cfg);
  std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
  const auto result = trainer.run(&log, [](const agent::TrainLogRow& row) {
    std::cerr << "turn " << row.turn << "  success " << row.metrics.success_combined << "  skip free/guided "
              << row.metrics.skip_free << "/" << row.metrics.skip_guided << "  eps " << row.epsilon << "\n";
  });
  nn::save_checkpoint(result.best, (dir / "best.ckpt").string());
  nn::save_checkpoint(agent::agent_checkpoint(trainer.online(), cfg, "{\"turn\":" + std::to_string(cfg.max_turns) + "}"),
                      (dir / "last.ckpt").string());
  std::cout << "best turn " << result.best_turn << ": success_combined " << result.best_metrics.success_combined
            << "; wrote " << (dir / "best.ckpt").string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string policy = "agent";
  std::vector<double> noise;
  int dialogs = 500;
  std::vector<std::string> ablate;
  bool ablate_given = false;
  std::string out = "eval_out";
  bool transcripts = false;
};

int cmd_eval(const WorldOptions& wo, const EvalArgs& a, std::uint64_t seed) {
  if (a.policy == "agent" && wo.checkpoint.empty()) throw ConfigError("--policy agent needs --checkpoint");
  auto l = load(wo);
  if (a.ablate_given) {
    const auto mask = env::ObsMask::without(a.ablate);
    if (l.agent && !(mask == l.env.mask))
      throw ConfigError("--ablate does not match the inputs the checkpoint was trained with");
    l.env.mask = mask;
  }
  std::unique_ptr<eval::Policy> policy;
  if (a.policy == "agent") {
    policy = std::make_unique<agent::AgentPolicy>(std::shared_ptr<const agent::QNet>(l.agent->net), l.layout);
  } else {
    policy = std::make_unique<baseline::BaselinePolicy>(l.world.tree, l.world.encoder, classifier_for(l, wo, seed));
  }
  eval::EvalOptions opts;
  opts.dialogs = a.dialogs;
  opts.seed = seed;
  opts.env = l.env;
  const auto levels = a.noise.empty() ? std::vector<double>{l.env.noise} : a.noise;
  std::vector<eval::ReportRow> rows;
  fs::create_directories(a.out);
  for (double n : levels) {
    opts.env.noise = n;
    const auto r = eval::run_evaluation(*policy, l.world, opts);
    rows.push_back({policy->name(), r.metrics});
    if (a.transcripts) {
      std::ostringstream sub;
      sub << "transcripts_noise_" << n;
      const auto dir = fs::path(a.out) / sub.str();
      fs::create_directories(dir);
      eval::write_transcripts(dir.string(), *l.world.tree, r.transcripts);
    }
  }
  eval::write_reports(a.out, rows);
  std::cout << eval::report_text(rows);
  return 0;
}

void print_reply(const service::ReplyBundle& r) {
  for (const auto& t : r.asked_node_texts) std::cout << "system> " << t << "\n";
  if (!r.skip_trace.empty()) {
    std::cout << "        [skipped";
    for (const auto& id : r.skip_trace) std::cout << " " << id;
    std::cout << "]\n";
  }
  if (r.mode_prediction) std::cout << "        [mode " << sim::to_string(*r.mode_prediction) << "]\n";
  if (!r.suggestions.empty()) {
    std::cout << "        suggestions:";
    for (const auto& s : r.suggestions) std::cout << " | " << s;
    std::cout << "\n";
  }
}

int cmd_chat(const WorldOptions& wo, std::string policy, std::uint64_t seed) {
  const auto l = load(wo);
  auto factories = policy_factories(l, wo, seed);
  if (policy.empty()) policy = factories.count("agent") ? "agent" : "baseline";
  if (!factories.count(policy)) throw service::UnknownPolicy("unknown policy '" + policy + "'");
  service::LiveDialog dialog(l.builder, factories.at(policy)(), l.env.sim.stop.max_turns);
  std::cout << "system> " << dialog.greeting() << "\n";
  std::string line;
  while (!dialog.done() && std::cout << "you> " << std::flush && std::getline(std::cin, line)) {
    try {
      print_reply(dialog.send(line));
    } catch (const service::EmptyMessage&) {
      continue;
    }
  }
  if (dialog.done()) std::cout << "[dialog finished]\n";
  return 0;
}

int cmd_serve(WorldOptions wo, std::optional<int> port, const std::string& host, int ttl, std::uint64_t seed) {
  if (wo.checkpoint.empty()) wo.checkpoint = env_or("CTS_CHECKPOINT", "");
  if (wo.tree.empty()) wo.tree = env_or("CTS_TREE", "");
  service::HttpConfig http;
  http.host = host;
  http.port = port ? *port : std::stoi(env_or("CTS_PORT", "8080"));
  http.cors_origin = env_or("CTS_CORS_ORIGIN", "*");
  const auto l = load(wo);
  service::ServiceConfig sc;
  sc.ttl = std::chrono::seconds(ttl);
  sc.max_turns = l.env.sim.stop.max_turns;
  service::SessionService svc(l.builder, policy_factories(l, wo, seed), sc, seed);
  std::cerr << "serving on " << http.host << ":" << http.port << "\n";
  if (!service::serve(svc, http)) throw Error("cannot listen on port " + std::to_string(http.port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conversational tree search"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Random seed");
  std::function<int()> run;

  auto* tree = app.add_subcommand("tree", "Tree tools");
  tree->require_subcommand(1);
  std::string tree_file;
  auto* validate = tree->add_subcommand("validate", "Check a tree file");
  validate->add_option("file", tree_file, "Tree file")->required();
  validate->callback([&] { run = [&] { return cmd_tree_validate(tree_file); }; });
  int nodes = 25;
  std::string synth_out, corpus_out;
  auto* synth = tree->add_subcommand("synth", "Generate a random tree and corpus");
  synth->add_option("--nodes", nodes, "Node count")->check(CLI::Range(1, 100000));
  synth->add_option("-o,--output", synth_out, "Tree output file")->required();
  synth->add_option("--corpus", corpus_out, "Corpus output file (default <stem>.corpus.json)");
  synth->callback([&] { run = [&] { return cmd_tree_synth(nodes, seed, synth_out, corpus_out); }; });

  std::string config_path, output_dir;
  std::optional<long> max_turns;
  auto* train = app.add_subcommand("train", "Train an agent");
  train->add_option("--config", config_path, "Config file")->required();
  train->add_option("--output-dir", output_dir, "Override [paths] output_dir");
  train->add_option("--max-turns", max_turns, "Override [trainer] max_turns");
  train->callback([&] {
    run = [&] {
      return cmd_train(config_path, app.count("--seed") ? std::optional<std::uint64_t>(seed) : std::nullopt,
                       max_turns, output_dir);
    };
  });

  WorldOptions eval_world;
  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "Evaluate a policy against the simulator");
  add_world_options(ev, eval_world);
  ev->add_option("--policy", eval_args.policy, "baseline or agent")->check(CLI::IsMember({"baseline", "agent"}));
  ev->add_option("--noise", eval_args.noise, "Noise level(s), comma separated")->delimiter(',');
  ev->add_option("--dialogs", eval_args.dialogs, "Dialogs per noise level")->check(CLI::PositiveNumber);
  auto* ablate = ev->add_option("--ablate", eval_args.ablate, "Disabled inputs, comma separated")->delimiter(',');
  ev->add_option("--out", eval_args.out, "Report directory");
  ev->add_flag("--transcripts", eval_args.transcripts, "Also write dialog transcripts");
  ev->callback([&] {
    eval_args.ablate_given = ablate->count() > 0;
    run = [&] { return cmd_eval(eval_world, eval_args, seed); };
  });

  WorldOptions chat_world;
  std::string chat_policy;
  auto* chat = app.add_subcommand("chat", "Talk to a policy in the terminal");
  add_world_options(chat, chat_world);
  chat->add_option("--policy", chat_policy, "agent or baseline");
  chat->callback([&] { run = [&] { return cmd_chat(chat_world, chat_policy, seed); }; });

  WorldOptions serve_world;
  std::optional<int> port;
  std::string host = "0.0.0.0";
  int ttl = 1800;
  auto* serve = app.add_subcommand("serve", "HTTP session service for the chat UI");
  add_world_options(serve, serve_world);
  serve->add_option("--port", port, "Port (default $CTS_PORT or 8080)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--ttl", ttl, "Idle session lifetime in seconds")->check(CLI::PositiveNumber);
  serve->callback([&] { run = [&] { return cmd_serve(serve_world, port, host, ttl, seed); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    return run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
