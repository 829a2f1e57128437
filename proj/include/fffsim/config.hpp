#pragma once

// Simulation configuration: materials, process and coarsening parameters,
// scenario description, and the JSON config file reader/writer.
//
// Lengths are stored in SI (m) and temperatures in degrees Celsius. The config
// file uses mm, mm/s and degrees Celsius; conversion happens at load/save only.

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace fffsim {

/// Thermal property triple of one medium.
struct Material {
  double density = 0.0;        // kg/m^3
  double specific_heat = 0.0;  // J/(kg K)
  double conductivity = 0.0;   // W/(m K)

  double volumetric_capacity() const { return density * specific_heat; }

  bool operator==(const Material&) const = default;
};

inline Material pla() { return {1240.0, 1800.0, 0.13}; }
inline Material air() { return {1.41, 716.0, 0.023}; }

struct ProcessParameters {
  double print_speed = 30e-3;          // m/s
  double layer_height = 0.2e-3;        // m
  double filament_width = 0.5e-3;      // m
  double element_length = 0.5e-3;      // m, travel direction
  double nozzle_temperature = 210.0;   // C
  double activation_temperature = 175.0;  // C, measured deposition temperature
  double ambient_temperature = 25.0;   // C, also the convection sink temperature
  double bed_temperature = 60.0;       // C
  double convection_coefficient = 25.0;  // W/(m^2 K)

  bool operator==(const ProcessParameters&) const = default;
};

struct CoarseningParameters {
  int max_levels = 3;
  int factor = 2;
  int quiet_layers_per_remesh = 1;
  double epsilon = 0.01;
  double denominator_floor = 1.0;  // C, guards the relative error denominator

  bool operator==(const CoarseningParameters&) const = default;
};

enum class GeometryKind { block, bridge };
enum class InfillPattern { dense, rectilinear };
enum class ActivationMode { quiet, hybrid, adaptive };

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const Point3&) const = default;
};

/// Two pillars at both x-ends spanning the full y-extent, topped by a deck.
struct BridgeShape {
  double pillar_width = 4e-3;   // m, along x
  double pillar_height = 4e-3;  // m

  bool operator==(const BridgeShape&) const = default;
};

struct ScenarioSpec {
  GeometryKind geometry = GeometryKind::block;
  double width = 14e-3;   // m, along x
  double length = 14e-3;  // m, along y
  double height = 16e-3;  // m
  double infill_density = 1.0;
  InfillPattern infill_pattern = InfillPattern::dense;
  ActivationMode activation_mode = ActivationMode::adaptive;
  int perimeter_cells = 1;
  std::vector<Point3> probes;
  BridgeShape bridge;

  bool operator==(const ScenarioSpec&) const = default;
};

struct SolverOptions {
  double quiet_scale = 1e-9;
  bool lumped_capacitance = false;
  double tolerance = 1e-10;
  int max_iterations = 10000;
  double dwell_time = 0.0;  // s of cooling after the last deposition

  bool operator==(const SolverOptions&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Time to deposit a single element of length `element_length` at `print_speed`.
inline double compute_time_step(double element_length, double print_speed) {
  if (!(element_length > 0.0) || !(print_speed > 0.0))
    throw std::invalid_argument("compute_time_step: length and speed must be positive");
  return element_length / print_speed;
}

namespace detail {

inline int cell_count(double extent, double cell, const std::string& field) {
  double ratio = extent / cell;
  double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-6 * std::max(1.0, n))
    throw ConfigError(field, "must be a positive multiple of the element size");
  return static_cast<int>(n);
}

}  // namespace detail

struct SimulationConfig {
  Material polymer = pla();
  Material air_medium = air();
  ProcessParameters process;
  CoarseningParameters coarsening;
  ScenarioSpec scenario;
  SolverOptions solver;

  double time_step() const {
    return compute_time_step(process.element_length, process.print_speed);
  }
  int cells_x() const {
    return detail::cell_count(scenario.width, process.element_length, "scenario.width_mm");
  }
  int cells_y() const {
    return detail::cell_count(scenario.length, process.filament_width, "scenario.length_mm");
  }
  int total_layers() const {
    return detail::cell_count(scenario.height, process.layer_height, "scenario.height_mm");
  }

  bool operator==(const SimulationConfig&) const = default;
};

/// Thermocouple-style probe placement: x = 4/7 w, y = 4/7 l at z = h/10, 2h/5, 3h/5.
inline std::vector<Point3> default_probes(const ScenarioSpec& s) {
  double x = 4.0 / 7.0 * s.width;
  double y = 4.0 / 7.0 * s.length;
  return {{x, y, s.height / 10.0}, {x, y, 2.0 * s.height / 5.0}, {x, y, 3.0 * s.height / 5.0}};
}

inline void validate(const SimulationConfig& c) {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(field, "must be positive");
  };
  auto finite = [](double v, const char* field) {
    if (!std::isfinite(v)) throw ConfigError(field, "must be finite");
  };

  positive(c.polymer.density, "materials.polymer.density_kg_m3");
  positive(c.polymer.specific_heat, "materials.polymer.specific_heat_J_kgK");
  positive(c.polymer.conductivity, "materials.polymer.conductivity_W_mK");
  positive(c.air_medium.density, "materials.air.density_kg_m3");
  positive(c.air_medium.specific_heat, "materials.air.specific_heat_J_kgK");
  positive(c.air_medium.conductivity, "materials.air.conductivity_W_mK");

  const auto& p = c.process;
  positive(p.print_speed, "process.print_speed_mm_s");
  positive(p.layer_height, "process.layer_height_mm");
  positive(p.filament_width, "process.filament_width_mm");
  positive(p.element_length, "process.element_length_mm");
  finite(p.nozzle_temperature, "process.nozzle_temperature_C");
  finite(p.activation_temperature, "process.activation_temperature_C");
  finite(p.ambient_temperature, "process.ambient_temperature_C");
  finite(p.bed_temperature, "process.bed_temperature_C");
  if (p.activation_temperature > p.nozzle_temperature)
    throw ConfigError("process.activation_temperature_C", "must not exceed the nozzle temperature");
  if (!(p.convection_coefficient >= 0.0) || !std::isfinite(p.convection_coefficient))
    throw ConfigError("process.convection_coefficient_W_m2K", "must be non-negative");

  const auto& k = c.coarsening;
  if (k.max_levels < 0) throw ConfigError("coarsening.max_levels", "must be >= 0");
  if (k.factor < 2) throw ConfigError("coarsening.factor", "must be >= 2");
  if (k.quiet_layers_per_remesh < 1)
    throw ConfigError("coarsening.quiet_layers_per_remesh", "must be >= 1");
  if (!(k.epsilon > 0.0) || !std::isfinite(k.epsilon))
    throw ConfigError("coarsening.epsilon", "must be positive");
  positive(k.denominator_floor, "coarsening.denominator_floor_C");

  const auto& s = c.scenario;
  positive(s.width, "scenario.width_mm");
  positive(s.length, "scenario.length_mm");
  positive(s.height, "scenario.height_mm");
  if (!(s.infill_density > 0.0) || !(s.infill_density <= 1.0))
    throw ConfigError("scenario.infill_density", "must lie in (0, 1]");
  if ((s.infill_density == 1.0) != (s.infill_pattern == InfillPattern::dense))
    throw ConfigError("scenario.infill_pattern", "dense pattern iff infill density is 1");
  if (s.perimeter_cells < 0) throw ConfigError("scenario.perimeter_cells", "must be >= 0");
  (void)c.cells_x();
  (void)c.cells_y();
  (void)c.total_layers();
  for (const auto& q : s.probes) {
    if (!(q.x >= 0.0 && q.x <= s.width && q.y >= 0.0 && q.y <= s.length && q.z >= 0.0 &&
          q.z <= s.height))
      throw ConfigError("scenario.probes_mm", "probe outside the bounding box");
  }
  if (s.geometry == GeometryKind::bridge) {
    positive(s.bridge.pillar_width, "scenario.bridge.pillar_width_mm");
    positive(s.bridge.pillar_height, "scenario.bridge.pillar_height_mm");
    detail::cell_count(s.bridge.pillar_width, p.element_length, "scenario.bridge.pillar_width_mm");
    detail::cell_count(s.bridge.pillar_height, p.layer_height, "scenario.bridge.pillar_height_mm");
    if (!(2.0 * s.bridge.pillar_width < s.width))
      throw ConfigError("scenario.bridge.pillar_width_mm", "pillars must leave a gap");
    if (!(s.bridge.pillar_height < s.height))
      throw ConfigError("scenario.bridge.pillar_height_mm", "deck must have positive thickness");
  }

  positive(c.solver.quiet_scale, "solver.quiet_scale");
  if (c.solver.quiet_scale >= 1.0) throw ConfigError("solver.quiet_scale", "must be below 1");
  positive(c.solver.tolerance, "solver.tolerance");
  if (c.solver.max_iterations < 1) throw ConfigError("solver.max_iterations", "must be >= 1");
  if (!(c.solver.dwell_time >= 0.0)) throw ConfigError("solver.dwell_s", "must be >= 0");
}

namespace detail {

using nlohmann::json;

// Decimal mm value whose conversion back to m reproduces `meters` exactly.
inline double to_mm(double meters) {
  double mm = meters * 1000.0;
  if (mm / 1000.0 == meters) return mm;
  double up = mm, down = mm;
  for (int i = 0; i < 64; ++i) {
    up = std::nextafter(up, INFINITY);
    if (up / 1000.0 == meters) return up;
    down = std::nextafter(down, -INFINITY);
    if (down / 1000.0 == meters) return down;
  }
  return mm;
}

inline double from_mm(double mm) { return mm / 1000.0; }

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + key, "wrong value type");
  }
}

inline const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  if (!root.contains(key)) return empty;
  if (!root.at(key).is_object()) throw ConfigError(key, "must be an object");
  return root.at(key);
}

inline Material read_material(const json& j, Material fallback, const std::string& path) {
  return {get_or(j, "density_kg_m3", fallback.density, path),
          get_or(j, "specific_heat_J_kgK", fallback.specific_heat, path),
          get_or(j, "conductivity_W_mK", fallback.conductivity, path)};
}

template <class E>
E parse_enum(const json& j, const char* key, E fallback, const std::string& path,
             std::initializer_list<std::pair<const char*, E>> names) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError(path + key, "must be a string");
  auto text = j.at(key).get<std::string>();
  for (const auto& [name, value] : names)
    if (text == name) return value;
  throw ConfigError(path + key, "unknown value '" + text + "'");
}

inline const char* name_of(GeometryKind g) { return g == GeometryKind::block ? "block" : "bridge"; }
inline const char* name_of(InfillPattern p) {
  return p == InfillPattern::dense ? "dense" : "rectilinear";
}

}  // namespace detail

inline const char* mode_name(ActivationMode m) {
  switch (m) {
    case ActivationMode::quiet: return "quiet";
    case ActivationMode::hybrid: return "hybrid";
    case ActivationMode::adaptive: return "adaptive";
  }
  return "?";
}

inline ActivationMode parse_mode(const std::string& text) {
  if (text == "quiet") return ActivationMode::quiet;
  if (text == "hybrid") return ActivationMode::hybrid;
  if (text == "adaptive") return ActivationMode::adaptive;
  throw ConfigError("scenario.activation_mode", "unknown value '" + text + "'");
}

/// Builds and validates a configuration from a parsed JSON tree. Missing keys
/// take the default PLA/air and process values.
inline SimulationConfig config_from_json(const nlohmann::json& root) {
  using detail::from_mm;
  using detail::get_or;
  if (!root.is_object()) throw ConfigError("<root>", "config must be a JSON object");

  SimulationConfig c;
  const auto& mats = detail::section(root, "materials");
  if (mats.contains("polymer"))
    c.polymer = detail::read_material(mats.at("polymer"), c.polymer, "materials.polymer.");
  if (mats.contains("air"))
    c.air_medium = detail::read_material(mats.at("air"), c.air_medium, "materials.air.");

  const auto& pj = detail::section(root, "process");
  auto& p = c.process;
  const std::string pp = "process.";
  p.print_speed = from_mm(get_or(pj, "print_speed_mm_s", detail::to_mm(p.print_speed), pp));
  p.layer_height = from_mm(get_or(pj, "layer_height_mm", detail::to_mm(p.layer_height), pp));
  p.filament_width =
      from_mm(get_or(pj, "filament_width_mm", detail::to_mm(p.filament_width), pp));
  // element length follows the filament width unless given explicitly
  p.element_length = pj.contains("element_length_mm")
                         ? from_mm(get_or(pj, "element_length_mm", 0.0, pp))
                         : p.filament_width;
  p.nozzle_temperature = get_or(pj, "nozzle_temperature_C", p.nozzle_temperature, pp);
  p.activation_temperature = get_or(pj, "activation_temperature_C", p.activation_temperature, pp);
  p.ambient_temperature = get_or(pj, "ambient_temperature_C", p.ambient_temperature, pp);
  p.bed_temperature = get_or(pj, "bed_temperature_C", p.bed_temperature, pp);
  p.convection_coefficient =
      get_or(pj, "convection_coefficient_W_m2K", p.convection_coefficient, pp);

  const auto& kj = detail::section(root, "coarsening");
  auto& k = c.coarsening;
  const std::string kp = "coarsening.";
  k.max_levels = get_or(kj, "max_levels", k.max_levels, kp);
  k.factor = get_or(kj, "factor", k.factor, kp);
  k.quiet_layers_per_remesh = get_or(kj, "quiet_layers_per_remesh", k.quiet_layers_per_remesh, kp);
  k.epsilon = get_or(kj, "epsilon", k.epsilon, kp);
  k.denominator_floor = get_or(kj, "denominator_floor_C", k.denominator_floor, kp);

  const auto& sj = detail::section(root, "scenario");
  auto& s = c.scenario;
  const std::string sp = "scenario.";
  s.geometry = detail::parse_enum(sj, "geometry", s.geometry, sp,
                                  {{"block", GeometryKind::block}, {"bridge", GeometryKind::bridge}});
  s.width = from_mm(get_or(sj, "width_mm", detail::to_mm(s.width), sp));
  s.length = from_mm(get_or(sj, "length_mm", detail::to_mm(s.length), sp));
  s.height = from_mm(get_or(sj, "height_mm", detail::to_mm(s.height), sp));
  s.infill_density = get_or(sj, "infill_density", s.infill_density, sp);
  s.infill_pattern = detail::parse_enum(
      sj, "infill_pattern",
      s.infill_density < 1.0 ? InfillPattern::rectilinear : InfillPattern::dense, sp,
      {{"dense", InfillPattern::dense}, {"rectilinear", InfillPattern::rectilinear}});
  s.activation_mode = detail::parse_enum(sj, "activation_mode", s.activation_mode, sp,
                                         {{"quiet", ActivationMode::quiet},
                                          {"hybrid", ActivationMode::hybrid},
                                          {"adaptive", ActivationMode::adaptive}});
  s.perimeter_cells = get_or(sj, "perimeter_cells", s.perimeter_cells, sp);
  if (sj.contains("bridge")) {
    const auto& bj = sj.at("bridge");
    const std::string bp = "scenario.bridge.";
    s.bridge.pillar_width =
        from_mm(get_or(bj, "pillar_width_mm", detail::to_mm(s.bridge.pillar_width), bp));
    s.bridge.pillar_height =
        from_mm(get_or(bj, "pillar_height_mm", detail::to_mm(s.bridge.pillar_height), bp));
  }
  if (sj.contains("probes_mm")) {
    const auto& arr = sj.at("probes_mm");
    if (!arr.is_array()) throw ConfigError("scenario.probes_mm", "must be an array");
    for (const auto& e : arr) {
      if (!e.is_array() || e.size() != 3 || !e[0].is_number() || !e[1].is_number() ||
          !e[2].is_number())
        throw ConfigError("scenario.probes_mm", "each probe must be [x, y, z]");
      s.probes.push_back({from_mm(e[0].get<double>()), from_mm(e[1].get<double>()),
                          from_mm(e[2].get<double>())});
    }
  } else {
    s.probes = default_probes(s);
  }

  const auto& vj = detail::section(root, "solver");
  auto& v = c.solver;
  const std::string vp = "solver.";
  v.quiet_scale = get_or(vj, "quiet_scale", v.quiet_scale, vp);
  v.lumped_capacitance = get_or(vj, "lumped_capacitance", v.lumped_capacitance, vp);
  v.tolerance = get_or(vj, "tolerance", v.tolerance, vp);
  v.max_iterations = get_or(vj, "max_iterations", v.max_iterations, vp);
  v.dwell_time = get_or(vj, "dwell_s", v.dwell_time, vp);

  validate(c);
  return c;
}

inline nlohmann::json config_to_json(const SimulationConfig& c) {
  using detail::to_mm;
  nlohmann::json j;
  auto mat = [](const Material& m) {
    return nlohmann::json{{"density_kg_m3", m.density},
                          {"specific_heat_J_kgK", m.specific_heat},
                          {"conductivity_W_mK", m.conductivity}};
  };
  j["materials"] = {{"polymer", mat(c.polymer)}, {"air", mat(c.air_medium)}};
  const auto& p = c.process;
  j["process"] = {{"print_speed_mm_s", to_mm(p.print_speed)},
                  {"layer_height_mm", to_mm(p.layer_height)},
                  {"filament_width_mm", to_mm(p.filament_width)},
                  {"element_length_mm", to_mm(p.element_length)},
                  {"nozzle_temperature_C", p.nozzle_temperature},
                  {"activation_temperature_C", p.activation_temperature},
                  {"ambient_temperature_C", p.ambient_temperature},
                  {"bed_temperature_C", p.bed_temperature},
                  {"convection_coefficient_W_m2K", p.convection_coefficient}};
  const auto& k = c.coarsening;
  j["coarsening"] = {{"max_levels", k.max_levels},
                     {"factor", k.factor},
                     {"quiet_layers_per_remesh", k.quiet_layers_per_remesh},
                     {"epsilon", k.epsilon},
                     {"denominator_floor_C", k.denominator_floor}};
  const auto& s = c.scenario;
  nlohmann::json probes = nlohmann::json::array();
  for (const auto& q : s.probes) probes.push_back({to_mm(q.x), to_mm(q.y), to_mm(q.z)});
  j["scenario"] = {{"geometry", detail::name_of(s.geometry)},
                   {"width_mm", to_mm(s.width)},
                   {"length_mm", to_mm(s.length)},
                   {"height_mm", to_mm(s.height)},
                   {"infill_density", s.infill_density},
                   {"infill_pattern", detail::name_of(s.infill_pattern)},
                   {"activation_mode", mode_name(s.activation_mode)},
                   {"perimeter_cells", s.perimeter_cells},
                   {"probes_mm", probes},
                   {"bridge",
                    {{"pillar_width_mm", to_mm(s.bridge.pillar_width)},
                     {"pillar_height_mm", to_mm(s.bridge.pillar_height)}}}};
  const auto& v = c.solver;
  j["solver"] = {{"quiet_scale", v.quiet_scale},
                 {"lumped_capacitance", v.lumped_capacitance},
                 {"tolerance", v.tolerance},
                 {"max_iterations", v.max_iterations},
                 {"dwell_s", v.dwell_time}};
  return j;
}

inline SimulationConfig parse_config(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<file>", std::string("parse error: ") + e.what());
  }
  return config_from_json(root);
}

inline SimulationConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

inline void save_config(const SimulationConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << config_to_json(c).dump(2) << '\n';
}

}  // namespace fffsim
