#include <fstream>
#include <functional>
#include <sstream>

#include "dirx/format.hpp"
#include "dirx/harness.hpp"

namespace dirx {

namespace {

struct Cursor {
  const std::string& source;
  int line;

  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError(source, line, message);
  }
};

template <typename T>
T number(const Cursor& at, std::string_view key, std::string_view value) {
  T out{};
  if (!parse_number(value, out)) {
    at.fail("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
  }
  return out;
}

bool boolean(const Cursor& at, std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  at.fail("invalid boolean '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

std::vector<std::uint64_t> seed_list(const Cursor& at, std::string_view value) {
  std::vector<std::uint64_t> out;
  for (auto field : split(value, ',')) out.push_back(number<std::uint64_t>(at, "seeds", field));
  return out;
}

void set_experiment(ExperimentConfig& config, const Cursor& at, std::string_view key,
                    std::string_view value) {
  if (key == "episodes") config.episodes = number<int>(at, key, value);
  else if (key == "seeds") config.seeds = seed_list(at, value);
  else if (key == "master_seed") config.master_seed = number<std::uint64_t>(at, key, value);
  else if (key == "optimism_audit") config.optimism_audit = boolean(at, key, value);
  else if (key == "bernstein_audit") config.bernstein_audit = boolean(at, key, value);
  else if (key == "output") config.output = std::string(value);
  else if (key == "workers") config.workers = number<int>(at, key, value);
  else at.fail("unknown key '" + std::string(key) + "' in [experiment]");
}

void set_environment(EnvironmentConfig& env, const Cursor& at, std::string_view key,
                     std::string_view value) {
  if (key == "type") {
    if (value != "gridworld" && value != "chain" && value != "random") {
      at.fail("unknown environment type '" + std::string(value) + "'");
    }
    env.type = std::string(value);
  } else if (key == "horizon") {
    env.horizon = number<int>(at, key, value);
  } else if (key == "rooms") {
    env.grid.rooms = number<int>(at, key, value);
  } else if (key == "room_size") {
    env.grid.room_size = number<int>(at, key, value);
  } else if (key == "noise") {
    env.grid.noise = number<double>(at, key, value);
  } else if (key == "reward_center") {
    env.grid.reward_center = number<double>(at, key, value);
  } else if (key == "reward_left") {
    env.grid.reward_left = number<double>(at, key, value);
  } else if (key == "reward_right") {
    env.grid.reward_right = number<double>(at, key, value);
  } else if (key == "length") {
    env.chain_length = number<int>(at, key, value);
  } else if (key == "slip") {
    env.slip = number<double>(at, key, value);
  } else if (key == "states") {
    env.states = number<int>(at, key, value);
  } else if (key == "actions") {
    env.actions = number<int>(at, key, value);
  } else if (key == "seed") {
    env.seed = number<std::uint64_t>(at, key, value);
  } else if (key == "reward_sparsity") {
    env.reward_sparsity = number<double>(at, key, value);
  } else {
    at.fail("unknown key '" + std::string(key) + "' in [environment]");
  }
}

void set_agent(AgentConfig& agent, const Cursor& at, std::string_view key,
               std::string_view value) {
  if (key == "variant") {
    try {
      agent.variant = parse_variant(std::string(value));
    } catch (const std::invalid_argument& e) {
      at.fail(std::string(e.what()) + " (key 'variant')");
    }
  } else if (key == "kappa") {
    agent.schedule.fixed_kappa = number<double>(at, key, value);
  } else if (key == "schedule") {
    if (value == "fixed") agent.schedule.mode = QuantileSchedule::Mode::fixed;
    else if (value == "theoretical") agent.schedule.mode = QuantileSchedule::Mode::theoretical;
    else at.fail("unknown schedule '" + std::string(value) + "'");
  } else if (key == "delta") {
    agent.schedule.delta = number<double>(at, key, value);
  } else if (key == "n0") {
    agent.n0 = number<int>(at, key, value);
  } else if (key == "pseudo_reward") {
    agent.pseudo_reward = number<double>(at, key, value);
  } else if (key == "B") {
    agent.B = number<int>(at, key, value);
  } else if (key == "clip") {
    agent.clip_rlsvi = boolean(at, key, value);
  } else {
    at.fail("unknown key '" + std::string(key) + "' in agent section '" + agent.name + "'");
  }
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " +
                         message),
      line_(line) {}

TabularMdp build_environment(const EnvironmentConfig& env) {
  if (env.type == "gridworld") {
    GridworldSpec spec = env.grid;
    spec.horizon = env.horizon;
    return build_gridworld(spec);
  }
  if (env.type == "chain") return build_chain(env.chain_length, env.horizon, env.slip);
  if (env.type == "random") {
    return build_random_mdp(env.states, env.actions, env.horizon, env.seed, env.reward_sparsity);
  }
  throw std::invalid_argument("unknown environment type '" + env.type + "'");
}

void ExperimentConfig::validate() const {
  if (episodes < 1) throw std::invalid_argument("episodes must be at least 1");
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    agents[i].validate();
    for (std::size_t j = 0; j < i; ++j) {
      if (agents[i].name == agents[j].name) {
        throw std::invalid_argument("duplicate agent name '" + agents[i].name + "'");
      }
    }
  }
}

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
  ExperimentConfig config;
  enum class Section { none, experiment, environment, agent } section = Section::none;
  std::vector<int> header_lines;
  std::vector<bool> has_variant;
  int line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    const Cursor at{source, line_no};
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') at.fail("unterminated section header");
      const std::string_view header = trim(line.substr(1, line.size() - 2));
      if (header == "experiment") {
        section = Section::experiment;
      } else if (header == "environment") {
        section = Section::environment;
      } else if (header.substr(0, 6) == "agent " && !trim(header.substr(6)).empty()) {
        section = Section::agent;
        AgentConfig agent;
        agent.name = std::string(trim(header.substr(6)));
        config.agents.push_back(agent);
        has_variant.push_back(false);
        header_lines.push_back(line_no);
      } else {
        at.fail("unknown section '" + std::string(header) + "'");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) at.fail("expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) at.fail("empty key");
    switch (section) {
      case Section::none: at.fail("key '" + std::string(key) + "' outside any section");
      case Section::experiment: set_experiment(config, at, key, value); break;
      case Section::environment: set_environment(config.environment, at, key, value); break;
      case Section::agent:
        set_agent(config.agents.back(), at, key, value);
        if (key == "variant") has_variant.back() = true;
        break;
    }
  }
  for (std::size_t i = 0; i < config.agents.size(); ++i) {
    if (!has_variant[i]) {
      throw ConfigError(source, header_lines[i],
                        "agent '" + config.agents[i].name + "' has no variant");
    }
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source, 0, e.what());
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open config file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

std::string to_config_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[experiment]\n"
      << "episodes = " << c.episodes << '\n'
      << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) out << (i ? "," : "") << c.seeds[i];
  out << '\n'
      << "master_seed = " << c.master_seed << '\n'
      << "optimism_audit = " << (c.optimism_audit ? "true" : "false") << '\n'
      << "bernstein_audit = " << (c.bernstein_audit ? "true" : "false") << '\n';
  if (!c.output.empty()) out << "output = " << c.output << '\n';
  out << "workers = " << c.workers << "\n\n";

  const auto& e = c.environment;
  out << "[environment]\n"
      << "type = " << e.type << '\n'
      << "horizon = " << e.horizon << '\n'
      << "rooms = " << e.grid.rooms << '\n'
      << "room_size = " << e.grid.room_size << '\n'
      << "noise = " << format_double(e.grid.noise) << '\n'
      << "reward_center = " << format_double(e.grid.reward_center) << '\n'
      << "reward_left = " << format_double(e.grid.reward_left) << '\n'
      << "reward_right = " << format_double(e.grid.reward_right) << '\n'
      << "length = " << e.chain_length << '\n'
      << "slip = " << format_double(e.slip) << '\n'
      << "states = " << e.states << '\n'
      << "actions = " << e.actions << '\n'
      << "seed = " << e.seed << '\n'
      << "reward_sparsity = " << format_double(e.reward_sparsity) << '\n';

  for (const auto& a : c.agents) {
    out << "\n[agent " << a.name << "]\n"
        << "variant = " << to_string(a.variant) << '\n'
        << "schedule = "
        << (a.schedule.mode == QuantileSchedule::Mode::fixed ? "fixed" : "theoretical") << '\n'
        << "kappa = " << format_double(a.schedule.fixed_kappa) << '\n'
        << "delta = " << format_double(a.schedule.delta) << '\n'
        << "n0 = " << a.n0 << '\n'
        << "pseudo_reward = " << format_double(a.pseudo_reward) << '\n'
        << "B = " << a.B << '\n'
        << "clip = " << (a.clip_rlsvi ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace dirx
