#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dirx/agents.hpp"
#include "dirx/environments.hpp"
#include "dirx/mdp.hpp"

namespace dirx {

inline constexpr const char* kVersion = "0.1.0";

/// Parse failure carrying the 1-based line it refers to (0 when global).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

struct EnvironmentConfig {
  std::string type = "gridworld";  // gridworld | chain | random
  GridworldSpec grid;
  int chain_length = 5;
  double slip = 0.1;
  int states = 3;
  int actions = 2;
  std::uint64_t seed = 0;
  double reward_sparsity = 0.0;
  int horizon = 30;
};

TabularMdp build_environment(const EnvironmentConfig& config);

struct ExperimentConfig {
  EnvironmentConfig environment;
  std::vector<AgentConfig> agents;
  int episodes = 1;
  std::vector<std::uint64_t> seeds{0};
  std::uint64_t master_seed = 0;
  bool optimism_audit = false;
  bool bernstein_audit = false;
  std::string output;
  int workers = 1;

  void validate() const;
};

/// Flat sectioned text:
///
///   [experiment]          episodes, seeds, master_seed, optimism_audit,
///                         bernstein_audit, output, workers
///   [environment]         type, horizon, rooms, room_size, noise,
///                         reward_center, reward_left, reward_right,
///                         length, slip, states, actions, seed, reward_sparsity
///   [agent <name>]        variant, kappa, schedule, delta, n0,
///                         pseudo_reward, B, clip
///
/// `#` starts a comment. Errors cite the offending line.
ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Canonical text form; parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const ExperimentConfig& config);

struct CellResult {
  std::string agent;
  std::uint64_t seed = 0;
  RegretRecord regret;
  std::int64_t optimistic_episodes = 0;
  std::int64_t audited_cells = 0;
  std::int64_t bernstein_violations = 0;
  std::optional<std::string> failure;

  double optimism_frequency() const;
};

struct RunResult {
  std::vector<CellResult> cells;
  double wall_clock_seconds = 0.0;

  bool ok() const;
};

struct CellOptions {
  int episodes = 1;
  bool optimism_audit = false;
  bool bernstein_audit = false;
  std::uint64_t environment_seed = 0;
};

/// One (agent, seed) episode loop: plan, roll the greedy policy in `mdp`,
/// observe all H transitions, append V*_1(s_1) - V^{π_t}_1(s_1).
/// Planning errors are caught and stored in CellResult::failure.
CellResult run_cell(const TabularMdp& mdp, const OptimalSolution& optimal, Agent& agent,
                    const CellOptions& options);

/// Seed of agent `name` for experiment seed `seed`.
std::uint64_t agent_seed(std::uint64_t master, const std::string& name, std::uint64_t seed);
std::uint64_t environment_seed(std::uint64_t master, const std::string& name, std::uint64_t seed);

/// Runs every (agent, seed) cell; cells are parallel over `workers` threads
/// and results come back in config order regardless of schedule.
RunResult run_experiment(const ExperimentConfig& config);

std::string results_csv_header();

/// Writes the regret CSV at `path` and a manifest at `path + ".manifest"`.
void write_results(const RunResult& result, const ExperimentConfig& config,
                   const std::string& path);

/// Parses a regret CSV back into records keyed by (agent, seed).
std::map<std::pair<std::string, std::uint64_t>, RegretRecord> read_results(const std::string& path);

}  // namespace dirx
