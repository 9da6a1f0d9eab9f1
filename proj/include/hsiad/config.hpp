#ifndef HSIAD_CONFIG_HPP
#define HSIAD_CONFIG_HPP

// JSON (de)serialization of parameter records. Readers are strict: unknown
// keys and wrongly typed values are rejected with the offending key named.
// Missing keys keep their defaults.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string>

#include "json.hpp"

#include "hsiad/aetnet.hpp"
#include "hsiad/detectors.hpp"
#include "hsiad/error.hpp"
#include "hsiad/maskgen.hpp"
#include "hsiad/msgms.hpp"
#include "hsiad/synth.hpp"

namespace hsiad {

using Json = nlohmann::json;

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Reads fields out of one JSON object and remembers which keys were consumed.
class StrictObject {
 public:
  StrictObject(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  /// Throws if the object holds a key no reader asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

// NetworkConfig

inline Json to_json(const NetworkConfig& c) {
  return {{"channels", c.channels},   {"heads", c.heads},   {"window_partition", c.window_partition},
          {"mlp_ratio", c.mlp_ratio}, {"height", c.height}, {"width", c.width},
          {"bands", c.bands}};
}

inline void read_into(const Json& j, NetworkConfig& c, const std::string& where = "network") {
  StrictObject o(j, where);
  o.get("channels", c.channels);
  o.get("heads", c.heads);
  o.get("window_partition", c.window_partition);
  o.get("mlp_ratio", c.mlp_ratio);
  o.get("height", c.height);
  o.get("width", c.width);
  o.get("bands", c.bands);
  o.finish();
  validate(c);
}

// MaskParams

inline Json to_json(const MaskParams& p) {
  return {{"grid_k", p.grid_k},     {"n_min", p.n_min},     {"n_max", p.n_max},
          {"area_min", p.area_min}, {"area_max", p.area_max}, {"merge_prob", p.merge_prob}};
}

inline void read_into(const Json& j, MaskParams& p, const std::string& where = "mask") {
  StrictObject o(j, where);
  o.get("grid_k", p.grid_k);
  o.get("n_min", p.n_min);
  o.get("n_max", p.n_max);
  o.get("area_min", p.area_min);
  o.get("area_max", p.area_max);
  o.get("merge_prob", p.merge_prob);
  o.finish();
  validate_mask_params(p);
}

// SynthParams

inline Json to_json(const SynthParams& p) {
  return {{"endmember_count", p.endmember_count},
          {"anomaly_count", p.anomaly_count},
          {"area_min", p.area_min},
          {"area_max", p.area_max},
          {"contrast", p.contrast},
          {"noise_sigma", p.noise_sigma},
          {"height", p.height},
          {"width", p.width},
          {"bands", p.bands},
          {"library_seed", p.library_seed}};
}

inline void read_into(const Json& j, SynthParams& p, const std::string& where = "synth") {
  StrictObject o(j, where);
  o.get("endmember_count", p.endmember_count);
  o.get("anomaly_count", p.anomaly_count);
  o.get("area_min", p.area_min);
  o.get("area_max", p.area_max);
  o.get("contrast", p.contrast);
  o.get("noise_sigma", p.noise_sigma);
  o.get("height", p.height);
  o.get("width", p.width);
  o.get("bands", p.bands);
  o.get("library_seed", p.library_seed);
  o.finish();
  validate(p);
}

// MsgmsConfig

inline Json to_json(const MsgmsConfig& c) { return {{"stability_c", c.stability_c}, {"scales", c.scales}}; }

inline void read_into(const Json& j, MsgmsConfig& c, const std::string& where = "msgms") {
  StrictObject o(j, where);
  o.get("stability_c", c.stability_c);
  o.get("scales", c.scales);
  o.finish();
  if (c.scales < 1 || !(c.stability_c > 0.0)) throw ConfigError(where + ": scales >= 1 and stability_c > 0 required");
}

// DualWindow

inline Json to_json(const DualWindow& d) { return {{"inner", d.inner}, {"outer", d.outer}}; }

inline void read_into(const Json& j, DualWindow& d, const std::string& where = "window") {
  StrictObject o(j, where);
  o.get("inner", d.inner);
  o.get("outer", d.outer);
  o.finish();
  validate(d);
}

}  // namespace hsiad

#endif  // HSIAD_CONFIG_HPP
