#include "nnquad/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "nnquad/csv.hpp"
#include "nnquad/errors.hpp"

namespace nnquad {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string Where(const IniDocument& doc, int line) {
  return doc.source + ":" + std::to_string(line) + ": ";
}

struct Field {
  std::string key;
  std::function<bool(const std::string&)> set;  // false when the value does not parse
  std::function<std::string()> get;
};

bool ParseDouble(const std::string& text, double& out) {
  const char* b = text.data();
  const char* e = b + text.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

template <typename Int>
bool ParseInt(const std::string& text, Int& out) {
  const char* b = text.data();
  const char* e = b + text.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

bool ParseBool(const std::string& text, bool& out) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") {
    out = true;
    return true;
  }
  if (text == "false" || text == "0" || text == "no" || text == "off") {
    out = false;
    return true;
  }
  return false;
}

Field Real(const std::string& key, double& ref) {
  return {key, [&ref](const std::string& v) { return ParseDouble(v, ref); },
          [&ref] { return FormatDouble(ref); }};
}

Field Integer(const std::string& key, int& ref) {
  return {key, [&ref](const std::string& v) { return ParseInt(v, ref); },
          [&ref] { return std::to_string(ref); }};
}

Field Unsigned(const std::string& key, std::uint64_t& ref) {
  return {key, [&ref](const std::string& v) { return ParseInt(v, ref); },
          [&ref] { return std::to_string(ref); }};
}

Field Flag(const std::string& key, bool& ref) {
  return {key, [&ref](const std::string& v) { return ParseBool(v, ref); },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

Field Diagonal(const std::string& key, Mat3& m, int i) {
  return {key, [&m, i](const std::string& v) { return ParseDouble(v, m(i, i)); },
          [&m, i] { return FormatDouble(m(i, i)); }};
}

Field Component(const std::string& key, Vec3& v3, int i) {
  return {key, [&v3, i](const std::string& v) { return ParseDouble(v, v3(i)); },
          [&v3, i] { return FormatDouble(v3(i)); }};
}

struct Section {
  std::string name;
  std::vector<Field> fields;
};

std::vector<Section> Bind(RunConfig& c) {
  std::vector<Section> out;
  out.push_back({"experiment",
                 {Unsigned("seed", c.seed), Real("amplitude", c.task_amplitude),
                  Real("frequency", c.task_frequency), Real("duration", c.task_duration),
                  Real("yaw_total", c.task_yaw_total),
                  Flag("ground_truth_ablation", c.ground_truth_ablation)}});
  out.push_back({"plant",
                 {Real("mass", c.plant.mass), Component("inertia_x", c.plant.inertia_diag, 0),
                  Component("inertia_y", c.plant.inertia_diag, 1),
                  Component("inertia_z", c.plant.inertia_diag, 2), Real("g", c.plant.g),
                  Real("u1_max", c.plant.u1_max), Real("torque_max", c.plant.torque_max),
                  Integer("substeps", c.plant.substeps), Real("tilt_cmd_max", c.limits.tilt_cmd_max),
                  Real("rate_cmd_max", c.limits.rate_cmd_max)}});
  out.push_back({"pd",
                 {Diagonal("kp_roll", c.pd.kp, 0), Diagonal("kp_pitch", c.pd.kp, 1),
                  Diagonal("kp_yaw", c.pd.kp, 2), Diagonal("kd_roll", c.pd.kd, 0),
                  Diagonal("kd_pitch", c.pd.kd, 1), Diagonal("kd_yaw", c.pd.kd, 2)}});
  out.push_back({"lqr",
                 {Real("q_pos", c.lqr.q_pos), Real("q_vel", c.lqr.q_vel), Real("q_att", c.lqr.q_att),
                  Real("q_yaw", c.lqr.q_yaw), Real("q_rate", c.lqr.q_rate),
                  Real("r_thrust", c.lqr.r_thrust), Real("r_att", c.lqr.r_att),
                  Real("r_rate", c.lqr.r_rate)}});
  out.push_back({"noise",
                 {Real("sensor_pos_std", c.noise.sensor_pos_std),
                  Real("sensor_vel_std", c.noise.sensor_vel_std),
                  Real("sensor_att_std", c.noise.sensor_att_std),
                  Real("sensor_rate_std", c.noise.sensor_rate_std),
                  Real("thrust_std", c.noise.thrust_std), Real("torque_std", c.noise.torque_std)}});
  out.push_back({"collect",
                 {Real("corpus_seconds", c.corpus_seconds),
                  Real("excitation_thrust_std", c.excitation.thrust_std),
                  Real("excitation_tilt_std", c.excitation.tilt_std),
                  Real("excitation_time_constant", c.excitation.time_constant),
                  Real("max_frequency", c.envelope.max_frequency),
                  Real("max_accel", c.envelope.max_accel),
                  Real("max_yaw_rate", c.envelope.max_yaw_rate)}});
  Field targets{"targets",
                [&c](const std::string& v) {
                  if (v == "true_accel") c.dataset.targets = TargetMode::kTrueAccel;
                  else if (v == "finite_difference") c.dataset.targets = TargetMode::kFiniteDifference;
                  else return false;
                  return true;
                },
                [&c] {
                  return std::string(c.dataset.targets == TargetMode::kTrueAccel ? "true_accel"
                                                                                 : "finite_difference");
                }};
  out.push_back({"train",
                 {Integer("passes", c.train.passes), Integer("hidden_units", c.train.hidden_units),
                  Real("l2_reg", c.train.l2_reg), Real("init_std", c.train.init_std),
                  Real("learning_rate", c.train.rprop.delta0),
                  Real("momentum", c.train.nominal_momentum),
                  Real("eta_plus", c.train.rprop.eta_plus), Real("eta_minus", c.train.rprop.eta_minus),
                  Real("delta_min", c.train.rprop.delta_min),
                  Real("delta_max", c.train.rprop.delta_max),
                  Real("train_frac", c.dataset.train_frac), Real("val_frac", c.dataset.val_frac),
                  targets}});
  ScpConfig& s = c.scp;
  out.push_back({"scp",
                 {Real("feas_tol", s.feas_tol), Real("penalty_init", s.penalty_init),
                  Real("penalty_mult", s.penalty_mult), Integer("max_penalty_rounds", s.max_penalty_rounds),
                  Real("trust_state", s.trust_state), Real("trust_input", s.trust_input),
                  Real("trust_expand", s.trust_expand), Real("trust_shrink", s.trust_shrink),
                  Real("trust_max_factor", s.trust_max_factor),
                  Real("trust_min_factor", s.trust_min_factor),
                  Real("improvement_accept_ratio", s.improvement_accept_ratio),
                  Integer("max_inner_iters", s.max_inner_iters), Real("stall_tol", s.stall_tol),
                  Flag("squared_tracking", s.squared_tracking),
                  Flag("feedback_projection", s.feedback_projection),
                  Real("projection_state_weight", s.projection_state_weight),
                  Real("projection_input_weight", s.projection_input_weight),
                  Real("qp_gap_tol", s.qp_gap_tol), Real("qp_newton_tol", s.qp_newton_tol),
                  Real("qp_barrier_mult", s.qp_barrier_mult), Integer("qp_max_newton", s.qp_max_newton)}});
  return out;
}

std::vector<Field> BindManeuver(ManeuverSpec& m) {
  Field kind{"kind",
             [&m](const std::string& v) {
               try {
                 m.kind = ParseManeuverKind(v);
               } catch (const Error&) {
                 return false;
               }
               return true;
             },
             [&m] { return std::string(ManeuverKindName(m.kind)); }};
  return {kind, Real("amplitude", m.amplitude), Real("frequency", m.frequency),
          Real("duration", m.duration), Real("yaw_rate", m.yaw_rate), Unsigned("seed", m.seed)};
}

void ApplyFields(const IniDocument& doc, const IniSection& sec, std::vector<Field>& fields) {
  for (const IniEntry& e : sec.entries) {
    Field* f = nullptr;
    for (auto& cand : fields) {
      if (cand.key == e.key) f = &cand;
    }
    if (!f) {
      throw Error(ErrorCode::kConfigError,
                  Where(doc, e.line) + "unknown key '" + e.key + "' in [" + sec.name + "]");
    }
    if (!f->set(e.value)) {
      throw Error(ErrorCode::kConfigError, Where(doc, e.line) + "bad value '" + e.value +
                                               "' for key '" + e.key + "' in [" + sec.name + "]");
    }
  }
}

}  // namespace

IniDocument ParseIni(const std::string& text, const std::string& source) {
  IniDocument doc;
  doc.source = source;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = Trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s[0] == '[') {
      if (s.back() != ']' || s.size() < 3) {
        throw Error(ErrorCode::kConfigError, Where(doc, line) + "malformed section header '" + s + "'");
      }
      doc.sections.push_back({Trim(s.substr(1, s.size() - 2)), line, {}});
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfigError, Where(doc, line) + "expected 'key = value', got '" + s + "'");
    }
    if (doc.sections.empty()) {
      throw Error(ErrorCode::kConfigError, Where(doc, line) + "key outside of any section");
    }
    std::string key = Trim(s.substr(0, eq));
    std::string value = Trim(s.substr(eq + 1));
    const auto hash = value.find(" #");
    if (hash != std::string::npos) value = Trim(value.substr(0, hash));
    if (key.empty()) throw Error(ErrorCode::kConfigError, Where(doc, line) + "empty key");
    for (const auto& prev : doc.sections.back().entries) {
      if (prev.key == key) {
        throw Error(ErrorCode::kConfigError, Where(doc, line) + "duplicate key '" + key + "'");
      }
    }
    doc.sections.back().entries.push_back({key, value, line});
  }
  return doc;
}

void ApplyIni(const IniDocument& doc, RunConfig& cfg) {
  std::vector<Section> bound = Bind(cfg);
  bool explicit_suite = false;
  for (const IniSection& sec : doc.sections) {
    if (sec.name == "maneuver") {
      if (!explicit_suite) {
        cfg.maneuvers.clear();
        explicit_suite = true;
      }
      ManeuverSpec spec;
      std::vector<Field> fields = BindManeuver(spec);
      ApplyFields(doc, sec, fields);
      cfg.maneuvers.push_back(spec);
      continue;
    }
    Section* target = nullptr;
    for (auto& b : bound) {
      if (b.name == sec.name) target = &b;
    }
    if (!target) {
      throw Error(ErrorCode::kConfigError, Where(doc, sec.line) + "unknown section [" + sec.name + "]");
    }
    ApplyFields(doc, sec, target->fields);
  }
  cfg.limits.u1_max = cfg.plant.u1_max;
  cfg.limits.torque_max = cfg.plant.torque_max;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  ApplyIni(ParseIni(ss.str(), path.string()), cfg);
  cfg.sources.push_back(path.string());
  cfg.Validate();
  return cfg;
}

std::vector<ManeuverSpec> RunConfig::Suite() const {
  if (!maneuvers.empty()) return maneuvers;
  if (corpus_seconds <= 0.0) return {};
  return DefaultSuite(corpus_seconds);
}

void RunConfig::Validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfigError, what); };
  plant.Validate();
  train.Validate();
  scp.Validate();
  if (!(corpus_seconds >= 0.0)) fail("collect.corpus_seconds must be >= 0");
  if (!(dataset.train_frac > 0.0 && dataset.val_frac >= 0.0 &&
        dataset.train_frac + dataset.val_frac <= 1.0)) {
    fail("train.train_frac/val_frac must be a valid split");
  }
  if (!(task_duration > 0.0 && task_frequency >= 0.0 && task_amplitude >= 0.0)) {
    fail("experiment task needs duration > 0 and non-negative amplitude/frequency");
  }
  if (!(limits.tilt_cmd_max > 0.0 && limits.rate_cmd_max > 0.0)) fail("plant command limits must be > 0");
  for (double v : {noise.sensor_pos_std, noise.sensor_vel_std, noise.sensor_att_std,
                   noise.sensor_rate_std, noise.thrust_std, noise.torque_std}) {
    if (!(v >= 0.0)) fail("noise standard deviations must be >= 0");
  }
  for (size_t i = 0; i < maneuvers.size(); ++i) {
    if (!(maneuvers[i].duration > 0.0)) fail("maneuver " + std::to_string(i + 1) + ": duration must be > 0");
  }
}

std::uint64_t DeriveSeed(std::uint64_t master, SeedStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string DumpRunConfig(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::ostringstream os;
  bool first = true;
  for (auto& sec : Bind(copy)) {
    os << (first ? "" : "\n") << "[" << sec.name << "]\n";
    first = false;
    for (auto& f : sec.fields) os << f.key << " = " << f.get() << "\n";
  }
  for (ManeuverSpec m : cfg.maneuvers) {
    os << "\n[maneuver]\n";
    for (auto& f : BindManeuver(m)) os << f.key << " = " << f.get() << "\n";
  }
  return os.str();
}

}  // namespace nnquad
