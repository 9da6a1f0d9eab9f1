#ifndef HSIAD_IO_HPP
#define HSIAD_IO_HPP

// Cube files: <stem>.json header + <stem>.raw payload of little-endian float32
// values in band-sequential order. Binary PGM (P5, maxval 255) for ground
// truth, mask previews and score visualizations.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hsiad/cube.hpp"
#include "hsiad/error.hpp"

namespace hsiad {

namespace fs = std::filesystem;

namespace detail {

inline std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

inline std::vector<char> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const fs::path& p, const void* data, std::size_t n) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out.write(static_cast<const char*>(data), std::streamsize(n));
  if (!out) throw IoError("short write to " + p.string());
}

}  // namespace detail

/// Strips a trailing .json / .raw / .pgm so either the stem or a member file may be passed.
inline fs::path cube_stem(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".json" || ext == ".raw" || ext == ".pgm") {
    fs::path s = p;
    s.replace_extension();
    return s;
  }
  return p;
}

inline fs::path with_suffix(const fs::path& stem, const char* ext) {
  return fs::path(stem.string() + ext);
}

/// Little-endian float32 encoding of a double array.
inline std::vector<char> encode_f32le(std::span<const double> values) {
  std::vector<char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = static_cast<float>(values[i]);
    const std::uint32_t u = detail::to_little_endian(std::bit_cast<std::uint32_t>(f));
    std::memcpy(bytes.data() + 4 * i, &u, 4);
  }
  return bytes;
}

inline std::vector<double> decode_f32le(const char* bytes, std::size_t count) {
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u;
    std::memcpy(&u, bytes + 4 * i, 4);
    v[i] = static_cast<double>(std::bit_cast<float>(detail::to_little_endian(u)));
  }
  return v;
}

inline void save_cube(const HsiCube& cube, const fs::path& path) {
  const fs::path stem = cube_stem(path);
  nlohmann::json header = {{"height", cube.height()},
                           {"width", cube.width()},
                           {"bands", cube.bands()},
                           {"dtype", "f32le"},
                           {"layout", "bsq"}};
  const std::string text = header.dump(2) + "\n";
  detail::write_file(with_suffix(stem, ".json"), text.data(), text.size());
  const auto bytes = encode_f32le(cube.values());
  detail::write_file(with_suffix(stem, ".raw"), bytes.data(), bytes.size());
}

inline HsiCube load_cube(const fs::path& path) {
  const fs::path stem = cube_stem(path);
  const fs::path header_path = with_suffix(stem, ".json");
  const fs::path raw_path = with_suffix(stem, ".raw");
  if (!fs::exists(header_path)) throw IoError("missing cube header " + header_path.string());
  if (!fs::exists(raw_path)) throw IoError("missing cube payload " + raw_path.string());

  const auto text = detail::read_file(header_path);
  int h = 0, w = 0, b = 0;
  try {
    const auto header = nlohmann::json::parse(text.begin(), text.end());
    h = header.at("height").get<int>();
    w = header.at("width").get<int>();
    b = header.at("bands").get<int>();
    if (header.value("dtype", "f32le") != "f32le") throw FormatError("unsupported dtype");
    if (header.value("layout", "bsq") != "bsq") throw FormatError("unsupported layout");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed cube header " + header_path.string() + ": " + e.what());
  }
  if (h < 1 || w < 1 || b < 1) {
    throw FormatError("cube header " + header_path.string() + " declares non-positive size");
  }
  const auto bytes = detail::read_file(raw_path);
  const std::size_t expected = std::size_t(h) * w * b;
  if (bytes.size() != expected * 4) {
    throw SizeMismatchError("payload " + raw_path.string() + " holds " +
                            std::to_string(bytes.size() / 4) + " values, header declares " +
                            std::to_string(expected));
  }
  return HsiCube(h, w, b, decode_f32le(bytes.data(), expected));
}

struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
};

inline void write_pgm(const fs::path& path, const GrayImage& img) {
  std::ostringstream os;
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::string data = os.str();
  data.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  detail::write_file(path, data.data(), data.size());
}

inline GrayImage read_pgm(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      tok += bytes[pos++];
    }
    return tok;
  };
  if (next_token() != "P5") throw FormatError(path.string() + " is not a binary PGM");
  GrayImage img;
  try {
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    if (std::stoi(next_token()) != 255) throw FormatError("only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw FormatError("malformed PGM header in " + path.string());
  }
  ++pos;  // single whitespace byte after maxval
  const std::size_t n = std::size_t(img.width) * img.height;
  if (img.width < 1 || img.height < 1 || bytes.size() < pos + n) {
    throw SizeMismatchError("PGM payload too short in " + path.string());
  }
  img.pixels.assign(bytes.begin() + std::ptrdiff_t(pos), bytes.begin() + std::ptrdiff_t(pos + n));
  return img;
}

inline void save_ground_truth(const GroundTruthMap& gt, const fs::path& path) {
  GrayImage img{gt.height(), gt.width(), {}};
  img.pixels.reserve(gt.size());
  for (auto v : gt.labels()) img.pixels.push_back(v ? 255 : 0);
  write_pgm(path, img);
}

inline GroundTruthMap load_ground_truth(const fs::path& path) {
  auto img = read_pgm(path);
  std::vector<std::uint8_t> labels(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), labels.begin(),
                 [](std::uint8_t p) { return std::uint8_t(p >= 128 ? 1 : 0); });
  return GroundTruthMap(img.height, img.width, std::move(labels));
}

/// 8-bit visualization of one band, min-max scaled over that band.
inline GrayImage to_gray(const HsiCube& cube, int band = 0) {
  auto v = cube.band(band);
  auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  GrayImage img{cube.height(), cube.width(), std::vector<std::uint8_t>(v.size(), 0)};
  if (*mx > *mn) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      img.pixels[i] = std::uint8_t(std::lround((v[i] - *mn) / (*mx - *mn) * 255.0));
    }
  }
  return img;
}

}  // namespace hsiad

#endif  // HSIAD_IO_HPP
