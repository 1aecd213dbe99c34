#include "cts/agent/config.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cts/common/error.hpp"
#include "cts/common/hash.hpp"

namespace cts::agent {

namespace {

namespace pt = boost::property_tree;

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    std::size_t used = 0;
    const long v = std::stol(item.substr(first), &used);
    if (v <= 0) throw ConfigError("layer widths must be positive");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::string join_list(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

std::vector<std::string> parse_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto a = item.find_first_not_of(" \t"), b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

/// Readers and writers of every key, in document order.
struct Key {
  const char* section;
  const char* name;
  std::function<std::string(const TrainerConfig&)> get;
  std::function<void(TrainerConfig&, const std::string&)> set;
};

template <typename T>
Key number(const char* section, const char* name, T TrainerConfig::*field) {
  return {section, name, [field](const TrainerConfig& c) { return fmt(static_cast<double>(c.*field)); },
          [field](TrainerConfig& c, const std::string& v) {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used != v.size()) throw ConfigError("trailing characters in '" + v + "'");
            c.*field = static_cast<T>(d);
          }};
}

template <typename T>
Key number_in(const char* section, const char* name, std::function<T&(TrainerConfig&)> ref) {
  return {section, name, [ref](const TrainerConfig& c) { return fmt(static_cast<double>(ref(const_cast<TrainerConfig&>(c)))); },
          [ref](TrainerConfig& c, const std::string& v) {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used != v.size()) throw ConfigError("trailing characters in '" + v + "'");
            ref(c) = static_cast<T>(d);
          }};
}

Key text(const char* section, const char* name, std::string TrainerConfig::*field) {
  return {section, name, [field](const TrainerConfig& c) { return c.*field; },
          [field](TrainerConfig& c, const std::string& v) { c.*field = v; }};
}

Key sizes(const char* section, const char* name, std::vector<std::size_t> NetProfile::*field) {
  return {section, name, [field](const TrainerConfig& c) { return join_sizes(c.net.*field); },
          [field](TrainerConfig& c, const std::string& v) { c.net.*field = parse_sizes(v); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> k = [] {
    using C = TrainerConfig;
    std::vector<Key> v;
    v.push_back(number("trainer", "max_turns", &C::max_turns));
    v.push_back(number("trainer", "batch", &C::batch));
    v.push_back(number("trainer", "train_freq", &C::train_freq));
    v.push_back(number("trainer", "train_start", &C::train_start));
    v.push_back(number("trainer", "target_update", &C::target_update));
    v.push_back(number("trainer", "epsilon_start", &C::epsilon_start));
    v.push_back(number("trainer", "epsilon_end", &C::epsilon_end));
    v.push_back(number("trainer", "exploration_fraction", &C::exploration_fraction));
    v.push_back(number("trainer", "lr", &C::lr));
    v.push_back(number("trainer", "max_grad_norm", &C::max_grad_norm));
    v.push_back(number("trainer", "lambda_intent", &C::lambda_intent));
    v.push_back(number_in<double>("trainer", "gamma", [](C& c) -> double& { return c.munchausen.gamma; }));
    v.push_back(number_in<double>("trainer", "munchausen_tau", [](C& c) -> double& { return c.munchausen.tau; }));
    v.push_back(number_in<double>("trainer", "munchausen_alpha", [](C& c) -> double& { return c.munchausen.alpha; }));
    v.push_back(number_in<double>("trainer", "munchausen_log_clip",
                                  [](C& c) -> double& { return c.munchausen.log_clip; }));
    v.push_back(number_in<double>("trainer", "q_clip", [](C& c) -> double& { return c.munchausen.q_clip; }));
    v.push_back({"trainer", "double_q",
                 [](const C& c) { return std::string(c.munchausen.double_q == DoubleQ::Target ? "target" : "online"); },
                 [](C& c, const std::string& s) {
                   if (s == "target")
                     c.munchausen.double_q = DoubleQ::Target;
                   else if (s == "online")
                     c.munchausen.double_q = DoubleQ::OnlineArgmax;
                   else
                     throw ConfigError("double_q must be 'target' or 'online'");
                 }});
    v.push_back(number("trainer", "per_alpha", &C::per_alpha));
    v.push_back(number("trainer", "per_beta", &C::per_beta));
    v.push_back(number("trainer", "buffer", &C::buffer));
    v.push_back({"trainer", "her", [](const C& c) { return std::string(c.her ? "true" : "false"); },
                 [](C& c, const std::string& s) { c.her = parse_bool(s); }});
    v.push_back(number("trainer", "eval_freq", &C::eval_freq));
    v.push_back(number("trainer", "eval_dialogs", &C::eval_dialogs));
    v.push_back({"trainer", "seed", [](const C& c) { return std::to_string(c.seed); },
                 [](C& c, const std::string& s) { c.seed = std::stoull(s); }});
    v.push_back({"net", "profile", [](const C& c) { return c.profile; },
                 [](C& c, const std::string& s) {
                   c.net = NetProfile::named(s);
                   c.profile = s;
                 }});
    v.push_back(sizes("net", "trunk", &NetProfile::trunk));
    v.push_back(sizes("net", "value", &NetProfile::value));
    v.push_back(sizes("net", "advantage", &NetProfile::advantage));
    v.push_back(sizes("net", "action", &NetProfile::action));
    v.push_back(sizes("net", "mode", &NetProfile::mode));
    v.push_back(number_in<double>("net", "dropout", [](C& c) -> double& { return c.net.dropout; }));
    v.push_back(number("obs", "embedding_dim", &C::embedding_dim));
    v.push_back({"obs", "disable", [](const C& c) { return join_list(c.env.mask.disabled()); },
                 [](C& c, const std::string& s) { c.env.mask = env::ObsMask::without(parse_list(s)); }});
    v.push_back(number_in<double>("noise", "level", [](C& c) -> double& { return c.env.noise; }));
    v.push_back({"noise", "isotropic", [](const C& c) { return std::string(c.env.isotropic_noise ? "true" : "false"); },
                 [](C& c, const std::string& s) { c.env.isotropic_noise = parse_bool(s); }});
    auto reward = [&v](const char* name, double sim::RewardConstants::*field) {
      v.push_back(number_in<double>("reward", name, [field](C& c) -> double& { return c.env.sim.reward.*field; }));
    };
    reward("guided_ask_after_skip", &sim::RewardConstants::guided_ask_after_skip);
    reward("guided_correct_skip", &sim::RewardConstants::guided_correct_skip);
    reward("guided_step", &sim::RewardConstants::guided_step);
    reward("free_step", &sim::RewardConstants::free_step);
    reward("free_offpath_ask", &sim::RewardConstants::free_offpath_ask);
    reward("free_goal_per_depth", &sim::RewardConstants::free_goal_per_depth);
    v.push_back(number_in<int>("sim", "max_turns", [](C& c) -> int& { return c.env.sim.stop.max_turns; }));
    v.push_back(number_in<int>("sim", "patience", [](C& c) -> int& { return c.env.sim.stop.patience; }));
    v.push_back(number_in<double>("sim", "free_probability", [](C& c) -> double& { return c.env.sim.free_probability; }));
    v.push_back({"sim", "split", [](const C& c) { return graph::to_string(c.env.sim.split); },
                 [](C& c, const std::string& s) { c.env.sim.split = graph::corpus_split_from_string(s); }});
    v.push_back(text("paths", "tree", &C::tree));
    v.push_back(text("paths", "corpus", &C::corpus));
    v.push_back(text("paths", "embeddings", &C::embeddings));
    v.push_back(text("paths", "output_dir", &C::output_dir));
    return v;
  }();
  return k;
}

}  // namespace

void check_config(const TrainerConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.max_turns > 0 && c.batch > 0 && c.train_freq > 0 && c.target_update > 0, "trainer counts must be positive");
  require(c.train_start >= 0 && c.eval_freq > 0 && c.eval_dialogs > 0, "trainer counts must be positive");
  require(c.epsilon_start >= c.epsilon_end && c.epsilon_end >= 0.0 && c.epsilon_start <= 1.0,
          "epsilon must decrease within [0, 1]");
  require(c.exploration_fraction > 0.0 && c.exploration_fraction <= 1.0, "exploration_fraction must lie in (0, 1]");
  require(c.lr > 0 && c.max_grad_norm > 0 && c.lambda_intent >= 0, "optimizer settings must be positive");
  require(c.munchausen.tau > 0 && c.munchausen.alpha >= 0 && c.munchausen.q_clip > 0, "munchausen settings out of range");
  require(c.munchausen.gamma >= 0 && c.munchausen.gamma <= 1, "gamma must lie in [0, 1]");
  require(c.per_alpha >= 0 && c.per_beta >= 0 && c.buffer > 0, "replay settings out of range");
  require(c.embedding_dim > 0 && c.env.noise >= 0, "observation settings out of range");
  require(!c.net.trunk.empty() && !c.net.action.empty(), "trunk and action encoder need layers");
  require(c.net.dropout >= 0 && c.net.dropout < 1, "dropout must lie in [0, 1)");
  require(c.env.sim.stop.max_turns > 0 && c.env.sim.stop.patience > 0, "stop rules must be positive");
  require(c.env.sim.free_probability >= 0 && c.env.sim.free_probability <= 1, "free_probability must lie in [0, 1]");
}

TrainerConfig parse_config(const std::string& document, const std::string& base_dir) {
  pt::ptree tree;
  std::istringstream in(document);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  std::map<std::string, const Key*> index;
  for (const auto& k : keys()) index[std::string(k.section) + "." + k.name] = &k;
  TrainerConfig c;
  // The profile sets all widths, so it goes first and explicit widths override it.
  if (auto p = tree.get_optional<std::string>("net.profile")) index.at("net.profile")->set(c, *p);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside a section");
    for (const auto& [name, value] : body) {
      const auto full = section + "." + name;
      const auto it = index.find(full);
      if (it == index.end()) throw ConfigError("unknown config key '" + full + "'");
      if (full == "net.profile") continue;
      try {
        it->second->set(c, value.data());
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ConfigError("bad value for '" + full + "': " + value.data());
      }
    }
  }
  if (!base_dir.empty())
    for (auto* p : {&c.tree, &c.corpus, &c.embeddings, &c.output_dir})
      if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (std::filesystem::path(base_dir) / *p).string();
  check_config(c);
  return c;
}

TrainerConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string serialize_config(const TrainerConfig& c) {
  std::ostringstream out;
  std::string section;
  for (const auto& k : keys()) {
    if (k.section != section) {
      if (!section.empty()) out << '\n';
      section = k.section;
      out << '[' << section << "]\n";
    }
    out << k.name << " = " << k.get(c) << '\n';
  }
  return out.str();
}

std::string config_fingerprint(const TrainerConfig& c) {
  auto copy = c;
  // Where files live does not change what is trained.
  copy.output_dir.clear();
  return hex64(fnv1a64(serialize_config(copy)));
}

}  // namespace cts::agent
