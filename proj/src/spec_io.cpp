#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "wpt/sim.hpp"

namespace wpt::sim {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Cuts a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

json parse_scalar(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) throw InvalidArgument("empty value in spec file");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"')
      throw InvalidArgument("unterminated string in spec file: " + s);
    return json(s.substr(1, s.size() - 2));
  }
  if (s == "true") return json(true);
  if (s == "false") return json(false);
  if (s.find_first_not_of("0123456789") == std::string::npos) {
    try {
      return json(static_cast<std::uint64_t>(std::stoull(s)));
    } catch (...) {
      throw InvalidArgument("integer out of range in spec file: " + s);
    }
  }
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw InvalidArgument("");
    return json(v);
  } catch (...) {
    throw InvalidArgument("cannot parse value in spec file: " + s);
  }
}

json parse_value(const std::string& raw) {
  const std::string s = trim(raw);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw InvalidArgument("unterminated array in spec file: " + s);
    json arr = json::array();
    const std::string inner = s.substr(1, s.size() - 2);
    std::string item;
    std::stringstream ss(inner);
    while (std::getline(ss, item, ',')) {
      if (trim(item).empty()) continue;
      arr.push_back(parse_scalar(item));
    }
    return arr;
  }
  return parse_scalar(s);
}

// Minimal TOML subset: comments, [section] headers, key = value with
// strings, booleans, numbers, flat arrays, and dotted keys.
json toml_to_json(const std::string& text) {
  json root = json::object();
  std::string section;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw InvalidArgument("bad section header at line " + std::to_string(lineno));
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw InvalidArgument("empty section header at line " + std::to_string(lineno));
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("expected key = value at line " + std::to_string(lineno));
    std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw InvalidArgument("empty key at line " + std::to_string(lineno));
    const json value = parse_value(t.substr(eq + 1));
    json* target = &root;
    if (!section.empty()) target = &root[section];
    const size_t dot = key.find('.');
    if (dot != std::string::npos) {
      target = &(*target)[key.substr(0, dot)];
      key = key.substr(dot + 1);
    }
    (*target)[key] = value;
  }
  return root;
}

const char* mode_name(ChannelMode mode) {
  return mode == ChannelMode::kNormalized ? "normalized" : "pathloss";
}

ChannelMode mode_from_name(const std::string& name) {
  if (name == "normalized") return ChannelMode::kNormalized;
  if (name == "pathloss") return ChannelMode::kPathLoss;
  throw InvalidArgument("unknown channel mode: " + name);
}

ExperimentSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("spec must be a JSON object");
  ExperimentSpec s;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "name") {
        s.name = value.get<std::string>();
      } else if (key == "kind") {
        s.kind = kind_from_name(value.get<std::string>());
      } else if (key == "sweep") {
        s.sweep = value.get<std::vector<double>>();
      } else if (key == "sizes") {
        s.sizes = value.get<std::vector<int>>();
      } else if (key == "trials") {
        s.trials = value.get<int>();
      } else if (key == "seed") {
        s.seed = value.get<std::uint64_t>();
      } else if (key == "num_sensors") {
        s.num_sensors = value.get<int>();
      } else if (key == "num_fc_antennas") {
        s.num_fc_antennas = value.get<int>();
      } else if (key == "param_var") {
        s.param_var = value.get<double>();
      } else if (key == "sense_var") {
        s.sense_var = value.get<double>();
      } else if (key == "rx_noise") {
        s.rx_noise = value.get<double>();
      } else if (key == "fc_power") {
        s.fc_power = value.get<double>();
      } else if (key == "harvest_eff") {
        s.harvest_eff = value.get<double>();
      } else if (key == "circuit_energy") {
        s.circuit_energy = value.get<double>();
      } else if (key == "target_mse") {
        s.target_mse = value.get<double>();
      } else if (key == "mode") {
        s.mode = mode_from_name(value.get<std::string>());
      } else if (key == "threads") {
        s.threads = value.get<int>();
      } else if (key == "geometry") {
        if (!value.is_object()) throw InvalidArgument("geometry must be a table");
        for (const auto& [gk, gv] : value.items()) {
          if (gk == "half_width")
            s.geometry.half_width = gv.get<double>();
          else if (gk == "min_distance")
            s.geometry.min_distance = gv.get<double>();
          else
            throw InvalidArgument("unknown geometry key: " + gk);
        }
      } else {
        throw InvalidArgument("unknown spec key: " + key);
      }
    } catch (const json::exception& e) {
      throw InvalidArgument("bad value for spec key '" + key + "': " + e.what());
    }
  }
  return s;
}

json spec_json(const ExperimentSpec& s) {
  json j;
  j["name"] = s.name;
  j["kind"] = kind_name(s.kind);
  j["sweep"] = s.sweep;
  j["sizes"] = s.sizes;
  j["trials"] = s.trials;
  j["seed"] = s.seed;
  j["num_sensors"] = s.num_sensors;
  j["num_fc_antennas"] = s.num_fc_antennas;
  j["param_var"] = s.param_var;
  j["sense_var"] = s.sense_var;
  j["rx_noise"] = s.rx_noise;
  j["fc_power"] = s.fc_power;
  j["harvest_eff"] = s.harvest_eff;
  j["circuit_energy"] = s.circuit_energy;
  j["target_mse"] = s.target_mse;
  j["mode"] = mode_name(s.mode);
  j["geometry"] = {{"half_width", s.geometry.half_width},
                   {"min_distance", s.geometry.min_distance}};
  return j;
}

}  // namespace

const char* kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kMseVsIteration: return "mse-vs-iteration";
    case ExperimentKind::kMseVsNumSensors: return "mse-vs-ns";
    case ExperimentKind::kPowerVsIteration: return "power-vs-iteration";
    case ExperimentKind::kPowerVsGamma: return "power-vs-gamma";
    case ExperimentKind::kTradeoff: return "tradeoff";
    case ExperimentKind::kPowerControlTable: return "power-control-table";
    case ExperimentKind::kCustom: return "custom";
  }
  throw InvalidArgument("unhandled experiment kind");
}

ExperimentKind kind_from_name(const std::string& name) {
  if (name == "mse-vs-iteration") return ExperimentKind::kMseVsIteration;
  if (name == "mse-vs-ns") return ExperimentKind::kMseVsNumSensors;
  if (name == "power-vs-iteration") return ExperimentKind::kPowerVsIteration;
  if (name == "power-vs-gamma") return ExperimentKind::kPowerVsGamma;
  if (name == "tradeoff") return ExperimentKind::kTradeoff;
  if (name == "power-control-table") return ExperimentKind::kPowerControlTable;
  if (name == "custom") return ExperimentKind::kCustom;
  throw InvalidArgument("unknown experiment kind: " + name);
}

ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open spec file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto ends_with = [&](const char* suffix) {
    const std::string suf(suffix);
    return path.size() >= suf.size() && path.compare(path.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (ends_with(".json")) return spec_from_json_text(text);
  if (ends_with(".toml")) return spec_from_json(toml_to_json(text));
  throw InvalidArgument("spec files must end in .json or .toml: " + path);
}

ExperimentSpec spec_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("invalid JSON spec: ") + e.what());
  }
  return spec_from_json(j);
}

std::string spec_to_json_text(const ExperimentSpec& spec) {
  return spec_json(spec).dump(2);
}

}  // namespace wpt::sim
