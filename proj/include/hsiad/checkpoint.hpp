#ifndef HSIAD_CHECKPOINT_HPP
#define HSIAD_CHECKPOINT_HPP

// Parameter checkpoints: a JSON manifest (format, version, network config,
// tensor table with byte offsets) next to a little-endian float32 payload.
//   <stem>.json
//   <stem>.bin

#include <filesystem>
#include <string>

#include "hsiad/aetnet.hpp"
#include "hsiad/config.hpp"
#include "hsiad/io.hpp"

namespace hsiad {

inline constexpr const char* kCheckpointFormat = "hsiad-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline fs::path checkpoint_stem(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".json" || ext == ".bin") {
    fs::path s = p;
    s.replace_extension();
    return s;
  }
  return p;
}

inline void save_checkpoint(const NetParams& params, const fs::path& path) {
  const fs::path stem = checkpoint_stem(path);
  Json tensors = Json::array();
  for (const auto& s : params.specs) {
    tensors.push_back({{"name", s.name}, {"shape", s.shape}, {"offset", s.offset * 4}, {"count", s.count}});
  }
  const Json manifest = {{"format", kCheckpointFormat},
                         {"version", kCheckpointVersion},
                         {"dtype", "f32le"},
                         {"payload", with_suffix(stem, ".bin").filename().string()},
                         {"config", to_json(params.config)},
                         {"tensors", tensors}};
  const std::string text = manifest.dump(2) + "\n";
  detail::write_file(with_suffix(stem, ".json"), text.data(), text.size());
  const auto bytes = encode_f32le(params.values);
  detail::write_file(with_suffix(stem, ".bin"), bytes.data(), bytes.size());
}

/// Loads and checks the tensor table against the layout implied by the embedded config.
inline NetParams load_checkpoint(const fs::path& path) {
  const fs::path stem = checkpoint_stem(path);
  const fs::path manifest_path = with_suffix(stem, ".json");
  if (!fs::exists(manifest_path)) throw IoError("missing checkpoint manifest " + manifest_path.string());
  const Json m = read_json_file(manifest_path);
  NetworkConfig cfg;
  try {
    if (m.at("format").get<std::string>() != kCheckpointFormat) throw FormatError("not a checkpoint");
    if (m.at("version").get<int>() != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version " + std::to_string(m.at("version").get<int>()));
    }
    if (m.value("dtype", "f32le") != "f32le") throw FormatError("unsupported checkpoint dtype");
    read_into(m.at("config"), cfg, "checkpoint.config");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed checkpoint manifest " + manifest_path.string() + ": " + e.what());
  }
  NetParams params = zero_params(cfg);
  const Json& tensors = m.at("tensors");
  if (!tensors.is_array() || tensors.size() != params.specs.size()) {
    throw FormatError("checkpoint tensor table does not match the network layout");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& s = params.specs[i];
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != s.name || t.at("shape").get<std::vector<int>>() != s.shape ||
        t.at("offset").get<std::size_t>() != s.offset * 4 || t.at("count").get<std::size_t>() != s.count) {
      throw FormatError("checkpoint tensor '" + t.at("name").get<std::string>() + "' does not match layout");
    }
  }
  const fs::path payload = stem.parent_path() / m.at("payload").get<std::string>();
  const auto bytes = detail::read_file(payload);
  if (bytes.size() != params.values.size() * 4) {
    throw SizeMismatchError("checkpoint payload " + payload.string() + " holds " + std::to_string(bytes.size() / 4) +
                            " values, expected " + std::to_string(params.values.size()));
  }
  const auto decoded = decode_f32le(bytes.data(), params.values.size());
  params.values.assign(decoded.begin(), decoded.end());
  return params;
}

/// Parameters rounded through float32, i.e. what a save/load round trip yields.
inline NetParams round_to_f32(NetParams p) {
  for (double& v : p.values) v = double(float(v));
  return p;
}

}  // namespace hsiad

#endif  // HSIAD_CHECKPOINT_HPP
