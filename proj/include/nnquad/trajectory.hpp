#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "nnquad/types.hpp"

namespace nnquad {

/// Desired or planned trajectory sampled every dt; states need not be feasible.
struct DesiredTrajectory {
  std::vector<StateVec> states;
  double dt = 0.01;

  int horizon() const { return static_cast<int>(states.size()) - 1; }
};

/// CSV layout: t, x, y, z, vx, vy, vz, phi, theta, psi, wx, wy, wz, and
/// optionally u1..u4 (one fewer input row than states; the last row repeats
/// the final input so every row has the same width).
void WriteTrajectoryCsv(const std::filesystem::path& path, const DesiredTrajectory& traj,
                        const std::vector<InputVec>* inputs = nullptr);

struct LoadedTrajectory {
  DesiredTrajectory traj;
  std::optional<std::vector<InputVec>> inputs;  // N entries when u1..u4 present
};

/// Throws kIoError on a malformed file (missing columns, fewer than two rows,
/// non-uniform time step).
LoadedTrajectory ReadTrajectoryCsv(const std::filesystem::path& path);

std::vector<std::string> StateColumnNames();

}  // namespace nnquad
