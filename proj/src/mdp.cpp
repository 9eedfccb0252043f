#include "dirx/mdp.hpp"

#include <algorithm>
#include <cmath>

namespace dirx {

namespace {

constexpr double kInputRowTolerance = 1e-9;
constexpr double kRowTolerance = 1e-12;

void check_policy(const TabularMdp& mdp, const Policy& policy) {
  if (policy.horizon() != mdp.horizon() || policy.states() != mdp.states()) {
    throw StructuralError("policy shape " + std::to_string(policy.horizon()) + "x" +
                          std::to_string(policy.states()) + " does not match mdp " +
                          std::to_string(mdp.horizon()) + "x" + std::to_string(mdp.states()));
  }
  if ((policy.table().array() < 0).any() || (policy.table().array() >= mdp.actions()).any()) {
    throw StructuralError("policy contains an invalid action index");
  }
}

}  // namespace

TabularMdp::TabularMdp(int horizon, int states, int actions,
                       std::vector<Eigen::MatrixXd> transitions,
                       std::vector<Eigen::MatrixXd> rewards, int initial_state,
                       double reward_bound)
    : horizon_(horizon),
      states_(states),
      actions_(actions),
      initial_state_(initial_state),
      transitions_(std::move(transitions)),
      rewards_(std::move(rewards)) {
  if (horizon < 1 || states < 1 || actions < 1) {
    throw StructuralError("horizon, states and actions must be positive");
  }
  if (initial_state < 0 || initial_state >= states) {
    throw StructuralError("initial state out of range");
  }
  if (transitions_.size() != static_cast<std::size_t>(horizon) * actions) {
    throw StructuralError("expected H*A transition matrices");
  }
  if (rewards_.size() != static_cast<std::size_t>(horizon)) {
    throw StructuralError("expected H reward matrices");
  }
  for (auto& p : transitions_) {
    if (p.rows() != states || p.cols() != states) {
      throw StructuralError("transition matrix must be S x S");
    }
    if (!p.allFinite() || (p.array() < 0.0).any()) {
      throw StructuralError("transition probabilities must be finite and nonnegative");
    }
    for (Eigen::Index s = 0; s < p.rows(); ++s) {
      const double total = p.row(s).sum();
      if (std::abs(total - 1.0) > kInputRowTolerance) {
        throw StructuralError("transition row " + std::to_string(s) + " sums to " +
                              std::to_string(total));
      }
      // Rows already within the tight tolerance are left untouched so that
      // rebuilding from a normalized MDP reproduces it bit for bit.
      if (std::abs(total - 1.0) <= kRowTolerance) continue;
      p.row(s) /= total;
      if (std::abs(p.row(s).sum() - 1.0) > kRowTolerance) {
        throw StructuralError("transition row not normalizable");
      }
    }
  }
  for (const auto& r : rewards_) {
    if (r.rows() != states || r.cols() != actions) {
      throw StructuralError("reward matrix must be S x A");
    }
    if (!r.allFinite() || (r.array() < 0.0).any() || (r.array() > reward_bound).any()) {
      throw StructuralError("rewards must lie in [0, " + std::to_string(reward_bound) + "]");
    }
  }
}

AugmentedMdp augment(const TabularMdp& base, double pseudo_reward) {
  const int S = base.states();
  const int A = base.actions();
  const int H = base.horizon();
  std::vector<Eigen::MatrixXd> transitions;
  transitions.reserve(static_cast<std::size_t>(H) * A);
  for (int h = 0; h < H; ++h) {
    for (int a = 0; a < A; ++a) {
      Eigen::MatrixXd p = Eigen::MatrixXd::Zero(S + 1, S + 1);
      p.topLeftCorner(S, S) = base.transition(h, a);
      p(S, S) = 1.0;
      transitions.push_back(std::move(p));
    }
  }
  std::vector<Eigen::MatrixXd> rewards;
  rewards.reserve(H);
  for (int h = 0; h < H; ++h) {
    Eigen::MatrixXd r(S + 1, A);
    r.topRows(S) = base.rewards(h);
    r.row(S).setConstant(pseudo_reward);
    rewards.push_back(std::move(r));
  }
  return AugmentedMdp{TabularMdp(H, S + 1, A, std::move(transitions), std::move(rewards),
                                 base.initial_state(), std::max(1.0, pseudo_reward)),
                      S, pseudo_reward};
}

ValueTable::ValueTable(int horizon, int states, int actions)
    : q(horizon + 1, Eigen::MatrixXd::Zero(states, actions)),
      v(Eigen::MatrixXd::Zero(horizon + 1, states)) {}

VarianceTable::VarianceTable(int horizon, int states, int actions)
    : qvar(horizon + 1, Eigen::MatrixXd::Zero(states, actions)),
      vvar(Eigen::MatrixXd::Zero(horizon + 1, states)) {}

void RegretRecord::append(double gap) {
  gaps_.push_back(gap);
  cumulative_.push_back(total() + gap);
}

namespace {

// r + P next, summed over next states in index order. A fixed order keeps
// results bit-identical when zero columns are appended (augmentation).
Eigen::VectorXd backup(const TabularMdp& mdp, int h, int a, const Eigen::VectorXd& next) {
  const Eigen::MatrixXd& p = mdp.transition(h, a);
  Eigen::VectorXd out = mdp.rewards(h).col(a);
  for (Eigen::Index j = 0; j < p.cols(); ++j) out += p.col(j) * next(j);
  return out;
}

}  // namespace

ValueTable evaluate_policy(const TabularMdp& mdp, const Policy& policy) {
  check_policy(mdp, policy);
  const int H = mdp.horizon();
  const int S = mdp.states();
  const int A = mdp.actions();
  ValueTable table(H, S, A);
  for (int h = H - 1; h >= 0; --h) {
    const Eigen::VectorXd next = table.v.row(h + 1).transpose();
    for (int a = 0; a < A; ++a) {
      table.q[h].col(a) = backup(mdp, h, a, next);
    }
    for (int s = 0; s < S; ++s) table.v(h, s) = table.q[h](s, policy(h, s));
  }
  return table;
}

OptimalSolution optimal_values(const TabularMdp& mdp) {
  const int H = mdp.horizon();
  const int S = mdp.states();
  const int A = mdp.actions();
  OptimalSolution out{ValueTable(H, S, A), Policy(H, S)};
  for (int h = H - 1; h >= 0; --h) {
    const Eigen::VectorXd next = out.values.v.row(h + 1).transpose();
    for (int a = 0; a < A; ++a) {
      out.values.q[h].col(a) = backup(mdp, h, a, next);
    }
    for (int s = 0; s < S; ++s) {
      const int best = argmax_lowest(out.values.q[h].row(s));
      out.policy(h, s) = best;
      out.values.v(h, s) = out.values.q[h](s, best);
    }
  }
  return out;
}

VarianceTable variance_values(const TabularMdp& mdp, const Policy& policy) {
  const ValueTable values = evaluate_policy(mdp, policy);
  const int H = mdp.horizon();
  const int S = mdp.states();
  const int A = mdp.actions();
  VarianceTable table(H, S, A);
  for (int h = H - 1; h >= 0; --h) {
    const Eigen::VectorXd next_v = values.v.row(h + 1).transpose();
    const Eigen::VectorXd next_var = table.vvar.row(h + 1).transpose();
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const auto p = mdp.next_distribution(h, s, a).transpose();
        table.qvar[h](s, a) = std::max(0.0, weighted_variance(p, next_v)) + p.dot(next_var);
      }
      table.vvar(h, s) = table.qvar[h](s, policy(h, s));
    }
  }
  return table;
}

Trajectory sample_episode(const TabularMdp& mdp, const Policy& policy, Stream& stream) {
  check_policy(mdp, policy);
  Trajectory out;
  out.reserve(mdp.horizon());
  int s = mdp.initial_state();
  for (int h = 0; h < mdp.horizon(); ++h) {
    const int a = policy(h, s);
    const int next = sample_index(mdp.next_distribution(h, s, a), stream);
    out.push_back(Step{h, s, a, mdp.reward(h, s, a), next});
    s = next;
  }
  return out;
}

RegretRecord record_regret(RegretRecord record, double v_star, double v_pi) {
  record.append(v_star - v_pi);
  return record;
}

}  // namespace dirx
