#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dirx/random.hpp"

namespace dirx {

/// Raised when tables disagree in shape or a probability row is invalid.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Finite episodic MDP with stage-dependent transitions and rewards.
///
/// Stages are stored 0-based (h = 0 .. H-1). transition(h, a) is an S x S
/// row-stochastic matrix indexed (s, s'); rewards(h) is S x A with entries
/// in [0, reward_bound] (1 for every environment; augmentation raises it to
/// admit the pseudo-state reward).
class TabularMdp {
 public:
  TabularMdp(int horizon, int states, int actions, std::vector<Eigen::MatrixXd> transitions,
             std::vector<Eigen::MatrixXd> rewards, int initial_state, double reward_bound = 1.0);

  int horizon() const { return horizon_; }
  int states() const { return states_; }
  int actions() const { return actions_; }
  int initial_state() const { return initial_state_; }

  const Eigen::MatrixXd& transition(int h, int a) const { return transitions_[h * actions_ + a]; }
  auto next_distribution(int h, int s, int a) const { return transition(h, a).row(s); }
  const Eigen::MatrixXd& rewards(int h) const { return rewards_[h]; }
  double reward(int h, int s, int a) const { return rewards_[h](s, a); }

 private:
  int horizon_;
  int states_;
  int actions_;
  int initial_state_;
  std::vector<Eigen::MatrixXd> transitions_;
  std::vector<Eigen::MatrixXd> rewards_;
};

/// Base MDP extended with an absorbing pseudo-state at index base states().
///
/// The pseudo-state pays pseudo_reward under every action and transitions to
/// itself; no real state reaches it, so base values are unchanged.
struct AugmentedMdp {
  TabularMdp mdp;
  int pseudo_state;
  double pseudo_reward;
};

/// Appends the pseudo-state; rewards of the result are bounded by max(1, pseudo_reward).
AugmentedMdp augment(const TabularMdp& base, double pseudo_reward = 2.0);

/// Deterministic Markov policy, one action per (stage, state).
class Policy {
 public:
  Policy(int horizon, int states) : actions_(Eigen::MatrixXi::Zero(horizon, states)) {}
  explicit Policy(Eigen::MatrixXi actions) : actions_(std::move(actions)) {}

  int horizon() const { return static_cast<int>(actions_.rows()); }
  int states() const { return static_cast<int>(actions_.cols()); }
  int operator()(int h, int s) const { return actions_(h, s); }
  int& operator()(int h, int s) { return actions_(h, s); }
  const Eigen::MatrixXi& table() const { return actions_; }

  bool operator==(const Policy& other) const { return actions_ == other.actions_; }

 private:
  Eigen::MatrixXi actions_;
};

/// Q/V tables for stages 0 .. H, where stage H is identically zero.
struct ValueTable {
  std::vector<Eigen::MatrixXd> q;  // H + 1 entries, each S x A
  Eigen::MatrixXd v;               // (H + 1) x S

  ValueTable(int horizon, int states, int actions);
  int horizon() const { return static_cast<int>(q.size()) - 1; }
};

struct VarianceTable {
  std::vector<Eigen::MatrixXd> qvar;
  Eigen::MatrixXd vvar;

  VarianceTable(int horizon, int states, int actions);
};

struct Step {
  int h;
  int state;
  int action;
  double reward;
  int next_state;

  bool operator==(const Step&) const = default;
};

using Trajectory = std::vector<Step>;

/// Per-episode regret gaps and their running sum. Append-only.
class RegretRecord {
 public:
  void append(double gap);

  const std::vector<double>& per_episode_gap() const { return gaps_; }
  const std::vector<double>& cumulative() const { return cumulative_; }
  std::size_t size() const { return gaps_.size(); }
  double total() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

  bool operator==(const RegretRecord&) const = default;

 private:
  std::vector<double> gaps_;
  std::vector<double> cumulative_;
};

ValueTable evaluate_policy(const TabularMdp& mdp, const Policy& policy);

struct OptimalSolution {
  ValueTable values;
  Policy policy;
};

/// Optimal Bellman recursion; ties go to the lowest action index.
OptimalSolution optimal_values(const TabularMdp& mdp);

/// Bellman recursion for the variance of the return under a policy.
VarianceTable variance_values(const TabularMdp& mdp, const Policy& policy);

Trajectory sample_episode(const TabularMdp& mdp, const Policy& policy, Stream& stream);

RegretRecord record_regret(RegretRecord record, double v_star, double v_pi);

/// Index of the largest entry, first index on ties.
template <typename Derived>
int argmax_lowest(const Eigen::DenseBase<Derived>& row) {
  int best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i) {
    if (row(i) > row(best)) best = static_cast<int>(i);
  }
  return best;
}

/// Variance of a value vector under a probability row.
template <typename P, typename V>
double weighted_variance(const Eigen::MatrixBase<P>& p, const Eigen::MatrixBase<V>& v) {
  const double mean = p.dot(v);
  return p.dot((v.array() - mean).square().matrix());
}

/// Draws an index from a discrete distribution by inversion.
template <typename Derived>
int sample_index(const Eigen::MatrixBase<Derived>& probs, Stream& stream) {
  const double u = stream.uniform01();
  double acc = 0.0;
  int last_positive = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs(i) <= 0.0) continue;
    acc += probs(i);
    last_positive = static_cast<int>(i);
    if (u < acc) return static_cast<int>(i);
  }
  return last_positive;
}

}  // namespace dirx
