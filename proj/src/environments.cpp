#include "dirx/environments.hpp"

#include <array>

namespace dirx {

namespace {

constexpr std::array<std::array<int, 2>, 4> kMoves{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

}  // namespace

GridLayout gridworld_layout(const GridworldSpec& spec) {
  if (spec.rooms < 1 || spec.rooms % 2 == 0) throw StructuralError("rooms must be odd");
  if (spec.room_size < 1 || spec.room_size % 2 == 0) throw StructuralError("room_size must be odd");
  GridLayout layout;
  const int n = spec.room_size;
  layout.height = n;
  layout.width = spec.rooms * n + (spec.rooms - 1);
  layout.cell_to_state = Eigen::MatrixXi::Constant(layout.height, layout.width, -1);
  const int mid = n / 2;
  int next = 0;
  std::vector<std::array<int, 2>> cells;
  for (int row = 0; row < layout.height; ++row) {
    for (int col = 0; col < layout.width; ++col) {
      const bool wall_column = col % (n + 1) == n;
      if (wall_column && row != mid) continue;
      layout.cell_to_state(row, col) = next++;
      cells.push_back({row, col});
    }
  }
  layout.state_to_cell.resize(next, 2);
  for (int s = 0; s < next; ++s) {
    layout.state_to_cell(s, 0) = cells[s][0];
    layout.state_to_cell(s, 1) = cells[s][1];
  }
  auto room_center = [&](int room) { return layout.cell_to_state(mid, room * (n + 1) + mid); };
  layout.start = room_center(spec.rooms / 2);
  layout.left_goal = room_center(0);
  layout.right_goal = room_center(spec.rooms - 1);
  return layout;
}

TabularMdp build_gridworld(const GridworldSpec& spec) {
  if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) throw StructuralError("noise must lie in [0, 1]");
  if (spec.horizon < 1) throw StructuralError("horizon must be positive");
  const GridLayout layout = gridworld_layout(spec);
  const int S = static_cast<int>(layout.state_to_cell.rows());
  constexpr int A = 4;

  auto target = [&](int s, int a) {
    const int row = layout.state_to_cell(s, 0) + kMoves[a][0];
    const int col = layout.state_to_cell(s, 1) + kMoves[a][1];
    if (row < 0 || row >= layout.height || col < 0 || col >= layout.width) return s;
    const int t = layout.cell_to_state(row, col);
    return t < 0 ? s : t;
  };

  std::vector<Eigen::MatrixXd> per_action(A, Eigen::MatrixXd::Zero(S, S));
  for (int a = 0; a < A; ++a) {
    for (int s = 0; s < S; ++s) {
      per_action[a](s, target(s, a)) += 1.0 - spec.noise;
      for (int d = 0; d < A; ++d) per_action[a](s, target(s, d)) += spec.noise / A;
    }
  }

  Eigen::VectorXd state_reward = Eigen::VectorXd::Zero(S);
  state_reward(layout.start) = spec.reward_center;
  state_reward(layout.left_goal) = spec.reward_left;
  state_reward(layout.right_goal) = spec.reward_right;
  const Eigen::MatrixXd reward = state_reward.replicate(1, A);

  std::vector<Eigen::MatrixXd> transitions;
  std::vector<Eigen::MatrixXd> rewards;
  for (int h = 0; h < spec.horizon; ++h) {
    for (int a = 0; a < A; ++a) transitions.push_back(per_action[a]);
    rewards.push_back(reward);
  }
  return TabularMdp(spec.horizon, S, A, std::move(transitions), std::move(rewards), layout.start);
}

TabularMdp build_chain(int length, int horizon, double slip) {
  if (length < 2) throw StructuralError("chain length must be at least 2");
  if (!(slip >= 0.0 && slip <= 1.0)) throw StructuralError("slip must lie in [0, 1]");
  const int S = length;
  auto clamp_state = [S](int s) { return s < 0 ? 0 : (s >= S ? S - 1 : s); };
  std::vector<Eigen::MatrixXd> per_action(2, Eigen::MatrixXd::Zero(S, S));
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < 2; ++a) {
      const int step = a == 0 ? -1 : 1;
      per_action[a](s, clamp_state(s + step)) += 1.0 - slip;
      per_action[a](s, clamp_state(s - step)) += slip;
    }
  }
  Eigen::MatrixXd reward(S, 2);
  for (int a = 0; a < 2; ++a) reward.col(a) = per_action[a].col(S - 1);

  std::vector<Eigen::MatrixXd> transitions;
  std::vector<Eigen::MatrixXd> rewards;
  for (int h = 0; h < horizon; ++h) {
    transitions.push_back(per_action[0]);
    transitions.push_back(per_action[1]);
    rewards.push_back(reward);
  }
  return TabularMdp(horizon, S, 2, std::move(transitions), std::move(rewards), 0);
}

TabularMdp build_random_mdp(int states, int actions, int horizon, std::uint64_t seed,
                            double reward_sparsity) {
  if (states < 1 || actions < 1 || horizon < 1) throw StructuralError("S, A, H must be positive");
  Stream stream(seed);
  std::vector<Eigen::MatrixXd> transitions;
  std::vector<Eigen::MatrixXd> rewards;
  for (int h = 0; h < horizon; ++h) {
    for (int a = 0; a < actions; ++a) {
      Eigen::MatrixXd p(states, states);
      for (int s = 0; s < states; ++s) {
        for (int t = 0; t < states; ++t) p(s, t) = standard_exponential(stream);
        p.row(s) /= p.row(s).sum();
      }
      transitions.push_back(std::move(p));
    }
    Eigen::MatrixXd r(states, actions);
    for (int s = 0; s < states; ++s) {
      for (int a = 0; a < actions; ++a) {
        const double value = stream.uniform01();
        r(s, a) = stream.uniform01() < reward_sparsity ? 0.0 : value;
      }
    }
    rewards.push_back(std::move(r));
  }
  return TabularMdp(horizon, states, actions, std::move(transitions), std::move(rewards), 0);
}

}  // namespace dirx
