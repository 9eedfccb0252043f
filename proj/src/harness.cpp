#include "dirx/harness.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "dirx/format.hpp"

namespace dirx {

namespace {

const std::uint64_t kEnvironmentPurpose = hash_name("environment");

}  // namespace

double CellResult::optimism_frequency() const {
  return regret.size() == 0 ? 0.0
                            : static_cast<double>(optimistic_episodes) /
                                  static_cast<double>(regret.size());
}

bool RunResult::ok() const {
  for (const auto& c : cells) {
    if (c.failure) return false;
  }
  return true;
}

std::uint64_t agent_seed(std::uint64_t master, const std::string& name, std::uint64_t seed) {
  return derive_seed(master, {hash_name(name), seed});
}

std::uint64_t environment_seed(std::uint64_t master, const std::string& name, std::uint64_t seed) {
  return derive_seed(master, {hash_name(name), seed, kEnvironmentPurpose});
}

CellResult run_cell(const TabularMdp& mdp, const OptimalSolution& optimal, Agent& agent,
                    const CellOptions& options) {
  CellResult result;
  result.agent = agent.config().name;
  const int s1 = mdp.initial_state();
  const double v_star = optimal.values.v(0, s1);
  Stream env_stream(options.environment_seed);
  PlanningAudit audit;
  try {
    for (int t = 0; t < options.episodes; ++t) {
      agent.plan(t, options.bernstein_audit ? &audit : nullptr);
      if (options.optimism_audit && agent.values().v(0, s1) >= v_star) {
        ++result.optimistic_episodes;
      }
      const Policy policy = agent.policy();
      const Trajectory episode = sample_episode(mdp, policy, env_stream);
      for (const Step& step : episode) agent.observe(step);
      result.regret.append(v_star - evaluate_policy(mdp, policy).v(0, s1));
    }
  } catch (const std::exception& e) {
    result.failure = e.what();
  }
  result.audited_cells = audit.cells;
  result.bernstein_violations = audit.bernstein_violations;
  return result;
}

RunResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const TabularMdp mdp = build_environment(config.environment);
  const OptimalSolution optimal = optimal_values(mdp);
  const ModelInfo info = ModelInfo::from(mdp);

  struct Job {
    const AgentConfig* agent;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& agent : config.agents) {
    for (std::uint64_t seed : config.seeds) jobs.push_back({&agent, seed});
  }

  RunResult result;
  result.cells.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      AgentConfig cfg = *jobs[i].agent;
      cfg.seed = agent_seed(config.master_seed, cfg.name, jobs[i].seed);
      CellOptions options{config.episodes, config.optimism_audit, config.bernstein_audit,
                          environment_seed(config.master_seed, cfg.name, jobs[i].seed)};
      CellResult cell;
      try {
        auto agent = make_agent(cfg, info);
        cell = run_cell(mdp, optimal, *agent, options);
      } catch (const std::exception& e) {
        cell.agent = cfg.name;
        cell.failure = e.what();
      }
      cell.seed = jobs[i].seed;
      result.cells[i] = std::move(cell);
    }
  };
  const int threads = std::min<int>(config.workers, static_cast<int>(jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  result.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::string results_csv_header() { return "agent;seed;episode;gap;cumulative"; }

void write_results(const RunResult& result, const ExperimentConfig& config,
                   const std::string& path) {
  std::ofstream csv(path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot open results file '" + path + "' for writing");
  csv << results_csv_header() << '\n';
  for (const auto& cell : result.cells) {
    if (cell.failure) continue;
    const auto& gaps = cell.regret.per_episode_gap();
    const auto& cumulative = cell.regret.cumulative();
    for (std::size_t t = 0; t < gaps.size(); ++t) {
      csv << cell.agent << ';' << cell.seed << ';' << t + 1 << ';' << format_double(gaps[t]) << ';'
          << format_double(cumulative[t]) << '\n';
    }
  }
  if (!csv) throw std::runtime_error("failed writing results file '" + path + "'");

  const std::string manifest_path = path + ".manifest";
  std::ofstream manifest(manifest_path, std::ios::binary);
  if (!manifest) {
    throw std::runtime_error("cannot open manifest '" + manifest_path + "' for writing");
  }
  manifest << "# dirx " << kVersion << '\n' << to_config_text(config) << "\n# cells\n";
  for (const auto& cell : result.cells) {
    manifest << "# " << cell.agent << ';' << cell.seed << ';'
             << (cell.failure ? "failed: " + *cell.failure : std::string("ok"));
    if (config.optimism_audit) manifest << ";optimism=" << format_double(cell.optimism_frequency());
    if (config.bernstein_audit) {
      manifest << ";bernstein_violations=" << cell.bernstein_violations << '/'
               << cell.audited_cells;
    }
    manifest << '\n';
  }
  if (!manifest) throw std::runtime_error("failed writing manifest '" + manifest_path + "'");
}

std::map<std::pair<std::string, std::uint64_t>, RegretRecord> read_results(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results file '" + path + "'");
  std::map<std::pair<std::string, std::uint64_t>, RegretRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != results_csv_header()) {
        throw std::runtime_error(path + ":1: unexpected header");
      }
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split(line, ';');
    std::uint64_t seed = 0;
    double gap = 0.0;
    if (fields.size() != 5 || !parse_number(fields[1], seed) || !parse_number(fields[3], gap)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed row");
    }
    out[{std::string(fields[0]), seed}].append(gap);
  }
  return out;
}

}  // namespace dirx
