#pragma once

#include <cstdint>

#include "dirx/mdp.hpp"

namespace dirx {

/// Rooms laid out left to right, joined by one door cell at the midpoint of
/// each shared wall. Defaults give 5 * 25 + 4 = 129 states.
struct GridworldSpec {
  int rooms = 5;
  int room_size = 5;
  double noise = 0.1;
  int horizon = 30;
  double reward_center = 0.01;
  double reward_left = 0.1;
  double reward_right = 1.0;
};

enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

/// Cell coordinates of each state, plus the inverse lookup; exposed so tests
/// can build permutations such as the left-right mirror.
struct GridLayout {
  int width = 0;
  int height = 0;
  Eigen::MatrixXi cell_to_state;  // height x width, -1 for walls
  Eigen::MatrixXi state_to_cell;  // S x 2 (row, col)
  int start = 0;
  int left_goal = 0;
  int right_goal = 0;
};

GridLayout gridworld_layout(const GridworldSpec& spec);
TabularMdp build_gridworld(const GridworldSpec& spec);

/// Chain 0 .. length-1 with actions left (0) / right (1); the move reverses
/// with probability slip and ends reflect. The reward of (s, a) is the
/// probability of landing on the right end, so it is collected on arrival.
TabularMdp build_chain(int length, int horizon, double slip);

/// Rows ~ Dir(1, ..., 1), rewards Uniform[0, 1] zeroed with probability
/// reward_sparsity. Start state 0.
TabularMdp build_random_mdp(int states, int actions, int horizon, std::uint64_t seed,
                            double reward_sparsity = 0.0);

}  // namespace dirx
