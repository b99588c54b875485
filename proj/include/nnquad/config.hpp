#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nnquad/control.hpp"
#include "nnquad/harness.hpp"
#include "nnquad/scp.hpp"
#include "nnquad/sysid.hpp"

namespace nnquad {

struct IniEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct IniSection {
  std::string name;
  int line = 0;
  std::vector<IniEntry> entries;
};

/// Flat INI: [section] headers, key = value lines, '#' or ';' comments.
/// Sections may repeat. Entries before the first header are an error.
struct IniDocument {
  std::string source;
  std::vector<IniSection> sections;
};

/// Throws kConfigError with "source:line: message".
IniDocument ParseIni(const std::string& text, const std::string& source);

/// Everything a pipeline run needs. Unset sections keep the defaults below.
struct RunConfig {
  std::uint64_t seed = 1;  // master seed; every stage seed derives from it

  PhysicalParams plant;
  PdGains pd;
  LqrWeights lqr;
  InputLimits limits;
  NoiseConfig noise{.thrust_std = 2e-3, .torque_std = 2e-6};  // rotor noise; exact sensors

  TrainConfig train;
  DatasetOptions dataset;

  ExcitationConfig excitation;
  ManeuverEnvelope envelope;
  double corpus_seconds = 2400.0;  // default suite length; 0 with no [maneuver] means no flights
  std::vector<ManeuverSpec> maneuvers;  // explicit suite

  // Bounded effort and squared tracking for the 20 s task.
  ScpConfig scp{.max_penalty_rounds = 2, .max_inner_iters = 25, .squared_tracking = true};

  // Sinusoid-yaw evaluation task.
  double task_amplitude = 0.5;
  double task_frequency = 0.2;
  double task_duration = 20.0;
  double task_yaw_total = 6.283185307179586;
  bool ground_truth_ablation = true;

  std::vector<std::string> sources;  // config files read, in order

  /// Maneuvers to fly: the explicit suite, else the default one (may be empty).
  std::vector<ManeuverSpec> Suite() const;
  /// Throws kConfigError on out-of-range values.
  void Validate() const;
};

/// Applies a parsed document on top of `cfg`. Unknown sections or keys and
/// unparsable values throw kConfigError naming the key and line. Each
/// [maneuver] section appends one entry to the explicit suite.
void ApplyIni(const IniDocument& doc, RunConfig& cfg);

RunConfig LoadRunConfig(const std::filesystem::path& path);

/// Stage seeds derived from the master seed.
enum class SeedStream : std::uint32_t { kCollect = 1, kSplit, kTrainTrans, kTrainRot, kFlight };
std::uint64_t DeriveSeed(std::uint64_t master, SeedStream stream);

/// INI text reproducing `cfg` (written next to every run's outputs).
std::string DumpRunConfig(const RunConfig& cfg);

}  // namespace nnquad
