#include "nnquad/trajectory.hpp"

#include <cmath>

#include "nnquad/csv.hpp"
#include "nnquad/errors.hpp"

namespace nnquad {

std::vector<std::string> StateColumnNames() {
  return {"x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi", "wx", "wy", "wz"};
}

void WriteTrajectoryCsv(const std::filesystem::path& path, const DesiredTrajectory& traj,
                        const std::vector<InputVec>* inputs) {
  if (inputs && inputs->size() + 1 != traj.states.size()) {
    throw Error(ErrorCode::kLengthMismatch, "trajectory needs one more state than inputs");
  }
  CsvTable table;
  table.header.push_back("t");
  for (auto& c : StateColumnNames()) table.header.push_back(c);
  if (inputs) table.header.insert(table.header.end(), {"u1", "u2", "u3", "u4"});
  for (size_t n = 0; n < traj.states.size(); ++n) {
    std::vector<double> row;
    row.push_back(static_cast<double>(n) * traj.dt);
    for (int i = 0; i < kStateDim; ++i) row.push_back(traj.states[n](i));
    if (inputs) {
      const InputVec& u = (*inputs)[std::min(n, inputs->size() - 1)];
      for (int i = 0; i < kInputDim; ++i) row.push_back(u(i));
    }
    table.rows.push_back(std::move(row));
  }
  WriteCsv(path, table);
}

LoadedTrajectory ReadTrajectoryCsv(const std::filesystem::path& path) {
  const CsvTable table = ReadCsv(path);
  const int tcol = table.RequireColumn("t");
  std::vector<int> cols;
  for (auto& c : StateColumnNames()) cols.push_back(table.RequireColumn(c));
  if (table.rows.size() < 2) {
    throw Error(ErrorCode::kIoError, path.string() + ": trajectory needs at least two rows");
  }
  LoadedTrajectory out;
  out.traj.dt = table.rows[1][static_cast<size_t>(tcol)] - table.rows[0][static_cast<size_t>(tcol)];
  if (!(out.traj.dt > 0.0)) throw Error(ErrorCode::kIoError, path.string() + ": time must increase");
  for (size_t n = 0; n < table.rows.size(); ++n) {
    const auto& row = table.rows[n];
    const double expected = table.rows[0][static_cast<size_t>(tcol)] + static_cast<double>(n) * out.traj.dt;
    if (std::abs(row[static_cast<size_t>(tcol)] - expected) > 1e-6 * std::max(1.0, std::abs(expected))) {
      throw Error(ErrorCode::kIoError,
                  path.string() + ": non-uniform time step at row " + std::to_string(n + 2));
    }
    StateVec x;
    for (int i = 0; i < kStateDim; ++i) x(i) = row[static_cast<size_t>(cols[static_cast<size_t>(i)])];
    out.traj.states.push_back(x);
  }
  if (table.Column("u1") >= 0) {
    std::vector<int> ucols = {table.RequireColumn("u1"), table.RequireColumn("u2"),
                              table.RequireColumn("u3"), table.RequireColumn("u4")};
    std::vector<InputVec> inputs;
    for (size_t n = 0; n + 1 < table.rows.size(); ++n) {
      InputVec u;
      for (int i = 0; i < kInputDim; ++i) u(i) = table.rows[n][static_cast<size_t>(ucols[static_cast<size_t>(i)])];
      inputs.push_back(u);
    }
    out.inputs = std::move(inputs);
  }
  return out;
}

}  // namespace nnquad
