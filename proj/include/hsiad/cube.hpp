#ifndef HSIAD_CUBE_HPP
#define HSIAD_CUBE_HPP

// Hyperspectral cube data model and the per-cube preprocessing primitives:
// band selection, whole-cube linear normalization, corner cropping and the
// 16 rigid square transforms used for augmentation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hsiad/error.hpp"

namespace hsiad {

/// H x W x B real cube stored band-sequential: index = (b * H + y) * W + x.
/// Immutable once constructed; every operation returns a new cube.
class HsiCube {
 public:
  HsiCube() = default;

  HsiCube(int height, int width, int bands, std::vector<double> values)
      : height_(height), width_(width), bands_(bands), values_(std::move(values)) {
    if (height < 1 || width < 1 || bands < 1) {
      throw InvalidArgument("cube dimensions must be positive, got " +
                            std::to_string(height) + "x" + std::to_string(width) +
                            "x" + std::to_string(bands));
    }
    const std::size_t expected = std::size_t(height) * width * bands;
    if (values_.size() != expected) {
      throw SizeMismatchError("cube payload holds " + std::to_string(values_.size()) +
                              " values, expected " + std::to_string(expected));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw ValidationError("non-finite cube value at index " + std::to_string(i), i);
      }
    }
  }

  static HsiCube filled(int height, int width, int bands, double value) {
    return HsiCube(height, width, bands,
                   std::vector<double>(std::size_t(height) * width * bands, value));
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int bands() const noexcept { return bands_; }
  std::size_t pixel_count() const noexcept { return std::size_t(height_) * width_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const double> values() const noexcept { return values_; }

  std::span<const double> band(int b) const noexcept {
    return std::span<const double>(values_).subspan(std::size_t(b) * pixel_count(),
                                                     pixel_count());
  }

  double at(int b, int y, int x) const noexcept {
    return values_[(std::size_t(b) * height_ + y) * width_ + x];
  }

  std::vector<double> spectrum(int y, int x) const {
    std::vector<double> s(bands_);
    for (int b = 0; b < bands_; ++b) s[b] = at(b, y, x);
    return s;
  }

  bool same_shape(const HsiCube& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && bands_ == other.bands_;
  }

  friend bool operator==(const HsiCube&, const HsiCube&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int bands_ = 0;
  std::vector<double> values_;
};

inline std::string shape_string(const HsiCube& c) {
  return std::to_string(c.height()) + "x" + std::to_string(c.width()) + "x" +
         std::to_string(c.bands());
}

inline void require_same_shape(const HsiCube& a, const HsiCube& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InvalidArgument(std::string(what) + ": shape mismatch " + shape_string(a) +
                          " vs " + shape_string(b));
  }
}

/// Binary anomaly map, 1 = target.
class GroundTruthMap {
 public:
  GroundTruthMap() = default;

  GroundTruthMap(int height, int width, std::vector<std::uint8_t> labels)
      : height_(height), width_(width), labels_(std::move(labels)) {
    if (height < 1 || width < 1) throw InvalidArgument("ground truth dimensions must be positive");
    if (labels_.size() != std::size_t(height) * width) {
      throw SizeMismatchError("ground truth holds " + std::to_string(labels_.size()) +
                              " labels, expected " + std::to_string(std::size_t(height) * width));
    }
    std::size_t targets = 0;
    for (auto& v : labels_) {
      v = v ? 1 : 0;
      targets += v;
    }
    if (2 * targets >= labels_.size()) {
      throw InvalidArgument("anomaly fraction must stay below one half");
    }
  }

  static GroundTruthMap background(int height, int width) {
    return GroundTruthMap(height, width, std::vector<std::uint8_t>(std::size_t(height) * width, 0));
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  bool is_target(std::size_t i) const noexcept { return labels_[i] != 0; }
  bool is_target(int y, int x) const noexcept { return labels_[std::size_t(y) * width_ + x] != 0; }

  std::size_t target_count() const noexcept {
    return std::size_t(std::count(labels_.begin(), labels_.end(), std::uint8_t{1}));
  }

  friend bool operator==(const GroundTruthMap&, const GroundTruthMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> labels_;
};

/// Keeps the first `n` bands.
inline HsiCube select_bands(const HsiCube& cube, int n) {
  if (n < 1 || n > cube.bands()) {
    throw InvalidArgument("select_bands: n=" + std::to_string(n) + " outside [1, " +
                          std::to_string(cube.bands()) + "]");
  }
  auto v = cube.values();
  return HsiCube(cube.height(), cube.width(), n,
                 std::vector<double>(v.begin(), v.begin() + std::ptrdiff_t(n) * cube.pixel_count()));
}

/// Result of a whole-cube affine rescale: out = in * scale + offset.
struct Normalized {
  HsiCube cube;
  bool degenerate = false;  // input was constant; cube is all zeros
  double scale = 0.0;
  double offset = 0.0;

  /// Maps normalized values back to the input range. Not meaningful when degenerate.
  HsiCube invert() const {
    std::vector<double> v(cube.values().begin(), cube.values().end());
    for (double& x : v) x = (x - offset) / scale;
    return HsiCube(cube.height(), cube.width(), cube.bands(), std::move(v));
  }
};

/// Linearly maps the global [min, max] of the cube onto [lo, hi].
inline Normalized normalize_range(const HsiCube& cube, double lo, double hi) {
  auto v = cube.values();
  auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  Normalized out;
  if (!(*mx > *mn)) {
    out.cube = HsiCube::filled(cube.height(), cube.width(), cube.bands(), 0.0);
    out.degenerate = true;
    return out;
  }
  const double span = *mx - *mn;
  out.scale = (hi - lo) / span;
  out.offset = lo - *mn * out.scale;
  std::vector<double> r(v.size());
  const double mnv = *mn;
  for (std::size_t i = 0; i < v.size(); ++i) {
    r[i] = lo + (v[i] - mnv) / span * (hi - lo);
  }
  return {HsiCube(cube.height(), cube.width(), cube.bands(), std::move(r)), false, out.scale,
          out.offset};
}

inline Normalized normalize_unit(const HsiCube& cube) { return normalize_range(cube, 0.0, 1.0); }

inline Normalized normalize_symmetric(const HsiCube& cube) {
  return normalize_range(cube, -0.1, 0.1);
}

/// Spatial sub-window [y0, y0+h) x [x0, x0+w), all bands.
inline HsiCube crop(const HsiCube& cube, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || h < 1 || w < 1 || y0 + h > cube.height() || x0 + w > cube.width()) {
    throw InvalidArgument("crop window outside cube");
  }
  std::vector<double> v(std::size_t(h) * w * cube.bands());
  std::size_t k = 0;
  for (int b = 0; b < cube.bands(); ++b)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) v[k++] = cube.at(b, y0 + y, x0 + x);
  return HsiCube(h, w, cube.bands(), std::move(v));
}

/// The four size x size corner crops: top-left, top-right, bottom-left, bottom-right.
inline std::array<HsiCube, 4> crop_four(const HsiCube& cube, int size) {
  if (size < 1 || cube.height() < size || cube.width() < size) {
    throw InvalidArgument("crop_four: cube " + shape_string(cube) + " smaller than " +
                          std::to_string(size));
  }
  const int dy = cube.height() - size;
  const int dx = cube.width() - size;
  return {crop(cube, 0, 0, size, size), crop(cube, 0, dx, size, size),
          crop(cube, dy, 0, size, size), crop(cube, dy, dx, size, size)};
}

/// Counter-clockwise quarter turns followed by optional horizontal
/// (left-right) and vertical (top-bottom) mirroring.
struct RigidTransform {
  int quarter_turns = 0;
  bool flip_horizontal = false;
  bool flip_vertical = false;

  friend bool operator==(const RigidTransform&, const RigidTransform&) = default;
};

template <class Rng>
RigidTransform draw_rigid_transform(Rng& rng) {
  std::uniform_int_distribution<int> turns(0, 3);
  std::bernoulli_distribution coin(0.5);
  RigidTransform t;
  t.quarter_turns = turns(rng);
  t.flip_horizontal = coin(rng);
  t.flip_vertical = coin(rng);
  return t;
}

/// Source pixel (sy, sx) feeding output pixel (y, x) of an n x n transform.
inline std::pair<int, int> rigid_source(const RigidTransform& t, int n, int y, int x) {
  if (t.flip_vertical) y = n - 1 - y;
  if (t.flip_horizontal) x = n - 1 - x;
  for (int q = 0; q < (t.quarter_turns % 4 + 4) % 4; ++q) {
    // undo one CCW turn: out[y][x] = in[x][n-1-y]
    const int sy = x;
    const int sx = n - 1 - y;
    y = sy;
    x = sx;
  }
  return {y, x};
}

inline HsiCube apply_rigid_transform(const HsiCube& cube, const RigidTransform& t) {
  if (cube.height() != cube.width()) {
    throw InvalidArgument("rigid transform requires a square cube, got " + shape_string(cube));
  }
  const int n = cube.height();
  std::vector<double> v(cube.size());
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      auto [sy, sx] = rigid_source(t, n, y, x);
      for (int b = 0; b < cube.bands(); ++b) {
        v[(std::size_t(b) * n + y) * n + x] = cube.at(b, sy, sx);
      }
    }
  }
  return HsiCube(n, n, cube.bands(), std::move(v));
}

template <class Rng>
HsiCube random_rotate_flip(const HsiCube& cube, Rng& rng) {
  if (cube.height() != cube.width()) {
    throw InvalidArgument("random_rotate_flip requires a square cube, got " + shape_string(cube));
  }
  return apply_rigid_transform(cube, draw_rigid_transform(rng));
}

}  // namespace hsiad

#endif  // HSIAD_CUBE_HPP
