#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dirx/dirichlet.hpp"
#include "dirx/mdp.hpp"

namespace dirx {

class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Variant { bayes_ucbvi, incr_bayes_ucbvi, ucbvi, rlsvi, psrl };

const char* to_string(Variant v);
/// Throws std::invalid_argument naming the unknown variant.
Variant parse_variant(const std::string& name);
bool uses_pseudo_state(Variant v);

/// Quantile order per planning cell: a fixed kappa, or the schedule
/// kappa = 1 - C delta / (S A H (2n + 1)^3 n̄^{3/2}).
struct QuantileSchedule {
  enum class Mode { theoretical, fixed };
  Mode mode = Mode::fixed;
  double delta = 0.1;
  double fixed_kappa = 0.85;

  static double c_kappa();
  double kappa(std::int64_t n, std::int64_t n_bar, int S, int A, int H) const;
};

double theoretical_kappa(const QuantileSchedule& schedule, std::int64_t n, std::int64_t n_bar,
                         int S, int A, int H);

struct AgentConfig {
  std::string name;
  Variant variant = Variant::bayes_ucbvi;
  int n0 = 1;
  double pseudo_reward = 1.0;
  int B = 64;
  QuantileSchedule schedule;
  std::uint64_t seed = 0;
  bool clip_rlsvi = true;

  /// Throws std::invalid_argument on B < 1, n0 < 0 or a bad kappa/delta.
  void validate() const;
};

/// What an agent is told about the environment: dimensions and the reward
/// table (rewards are known; only transitions are learned).
struct ModelInfo {
  int H = 0;
  int S = 0;
  int A = 0;
  std::vector<Eigen::MatrixXd> rewards;  // H entries, S x A

  static ModelInfo from(const TabularMdp& mdp);
};

/// Visit and transition counts over the augmented next-state space
/// (index S is the pseudo-state; real transitions never land there).
class CountsTable {
 public:
  CountsTable(int H, int S, int A, int n0);

  int horizon() const { return H_; }
  int states() const { return S_; }
  int actions() const { return A_; }
  int n0() const { return n0_; }
  int pseudo_state() const { return S_; }

  std::int64_t visits(int h, int s, int a) const { return visits_[cell(h, s, a)]; }
  std::int64_t transitions(int h, int s, int a, int next) const;
  std::int64_t pseudo_visits(int h, int s, int a) const { return visits(h, s, a) + n0_; }
  /// Distinct real next states seen from (h, s, a), in first-seen order.
  const std::vector<int>& observed(int h, int s, int a) const { return observed_[cell(h, s, a)]; }

  /// n̄(. | s, a) over S + 1 coordinates.
  Eigen::VectorXi pseudo_counts(int h, int s, int a) const;
  /// p̄ = n̄(. | s, a) / n̄(s, a); requires n̄(s, a) > 0.
  Eigen::VectorXd pseudo_empirical(int h, int s, int a) const;
  /// p̂ over the S real states, uniform when unvisited.
  Eigen::VectorXd empirical(int h, int s, int a) const;

  void observe(int h, int s, int a, int next);

 private:
  std::size_t cell(int h, int s, int a) const;
  void check(int h, int s, int a) const;

  int H_, S_, A_, n0_;
  std::vector<std::int64_t> visits_;
  std::vector<Eigen::VectorXi> next_counts_;  // per cell, S entries
  std::vector<std::vector<int>> observed_;
};

/// Per-(h, s, a) Beta(1 + successes, 1 + failures) posteriors for PSRL.
class BetaRewardPosterior {
 public:
  BetaRewardPosterior(int H, int S, int A);
  void observe(int h, int s, int a, bool success);
  std::int64_t successes(int h, int s, int a) const { return successes_[cell(h, s, a)]; }
  std::int64_t failures(int h, int s, int a) const { return failures_[cell(h, s, a)]; }

 private:
  std::size_t cell(int h, int s, int a) const { return (static_cast<std::size_t>(h) * S_ + s) * A_ + a; }
  int S_, A_;
  std::vector<std::int64_t> successes_;
  std::vector<std::int64_t> failures_;
};

/// UCBVI bonus min(sqrt(1/n) + (H-h)/n, H-h) for 0-based stage h; H-h when n = 0.
double ucbvi_bonus(std::int64_t n, int H, int h);

/// Counters filled by instrumented Bayes-UCBVI planning.
struct PlanningAudit {
  std::int64_t cells = 0;
  std::int64_t bernstein_violations = 0;
};

/// Optimistic value iteration with Dirichlet posterior quantiles.
///
/// Each (h, s, a) draws B fresh weight vectors from Dir(n̄_h(. | s, a)) on a
/// substream derive_stream(stream_seed, {h, s, a}). Values are not clipped.
/// The returned table has S + 1 rows; row S is the pseudo-state with
/// V̄_h(s_0) = pseudo_reward (H - h).
ValueTable plan_bayes_ucbvi(const CountsTable& counts, const ModelInfo& info,
                            const QuantileSchedule& schedule, int B, double pseudo_reward,
                            std::uint64_t stream_seed, PlanningAudit* audit = nullptr);

/// Same recursion with quantiles taken over persistent bootstrap ensembles,
/// indexed (h * S + s) * A + a. No randomness is consumed.
ValueTable plan_incr_bayes_ucbvi(const std::vector<BootstrapEnsemble>& ensembles,
                                 const CountsTable& counts, const ModelInfo& info,
                                 const QuantileSchedule& schedule, double pseudo_reward);

/// r + p̂V̄ + bonus, values clipped to [0, H - h].
ValueTable plan_ucbvi(const CountsTable& counts, const ModelInfo& info);

/// r + p̂Ṽ + N(0, bonus^2) noise drawn per cell from derive_stream(stream_seed, {h, s, a}).
ValueTable plan_rlsvi(const CountsTable& counts, const ModelInfo& info, std::uint64_t stream_seed,
                      bool clip = true);

/// One draw of p ~ Dir(1/S + n_h(. | s, a)) over the real states, into `out`.
void sample_psrl_transition(const CountsTable& counts, int h, int s, int a, Stream& stream,
                            Eigen::VectorXd& out);

/// Exact planning in one model sampled from the transition posterior
/// Dir(1/S + n) and the Beta reward posteriors.
ValueTable plan_psrl(const CountsTable& counts, const BetaRewardPosterior& rewards,
                     const ModelInfo& info, std::uint64_t stream_seed);

/// Greedy action at (h, s), lowest index on ties.
int act(const ValueTable& table, int s, int h);

/// Greedy policy over the first `states` rows of a table.
Policy greedy_policy(const ValueTable& table, int states);

class Agent {
 public:
  Agent(AgentConfig config, ModelInfo info);
  virtual ~Agent() = default;

  const AgentConfig& config() const { return config_; }
  const ModelInfo& info() const { return info_; }
  const CountsTable& counts() const { return counts_; }
  const ValueTable& values() const { return *values_; }

  /// Builds the optimistic (or sampled) table used for the coming episode.
  void plan(int episode, PlanningAudit* audit = nullptr);
  int act(int h, int s) const { return dirx::act(*values_, s, h); }
  virtual void observe(const Step& step);

  Policy policy() const { return greedy_policy(*values_, info_.S); }

 protected:
  virtual ValueTable compute_plan(std::uint64_t stream_seed, PlanningAudit* audit) = 0;

  AgentConfig config_;
  ModelInfo info_;
  CountsTable counts_;

 private:
  std::unique_ptr<ValueTable> values_;
};

std::unique_ptr<Agent> make_agent(const AgentConfig& config, const ModelInfo& info);

}  // namespace dirx
