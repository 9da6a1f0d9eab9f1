#ifndef HSIAD_MASKGEN_HPP
#define HSIAD_MASKGEN_HPP

// Random Mask: irregular 4-connected regions grown from seed pixels in
// randomly chosen grid patches, then filled with zeros (CutOut) or with the
// co-located pixels of a donor cube (CutMix).

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "hsiad/cube.hpp"
#include "hsiad/error.hpp"

namespace hsiad {

struct Pixel {
  int y = 0;
  int x = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

struct MaskParams {
  int grid_k = 8;
  int n_min = 1;
  int n_max = 32;
  int area_min = 3;
  int area_max = 20;
  double merge_prob = 0.5;
};

/// Throws InvalidArgument on a hard violation; returns soft warnings.
inline std::vector<std::string> validate_mask_params(const MaskParams& p) {
  if (p.grid_k < 1) throw InvalidArgument("mask grid_k must be >= 1");
  if (p.n_min < 0 || p.n_min > p.n_max) throw InvalidArgument("mask n range must satisfy 0 <= n_min <= n_max");
  const int patches = p.grid_k * p.grid_k;
  if (p.n_max > patches) {
    throw InvalidArgument("mask n_max=" + std::to_string(p.n_max) + " exceeds grid_k^2=" +
                          std::to_string(patches));
  }
  if (p.area_min < 1 || p.area_min > p.area_max) {
    throw InvalidArgument("mask area range must satisfy 1 <= area_min <= area_max");
  }
  if (!(p.merge_prob > 0.0 && p.merge_prob <= 1.0)) {
    throw InvalidArgument("mask merge_prob must lie in (0, 1]");
  }
  std::vector<std::string> warnings;
  if (p.n_max == patches) {
    warnings.push_back("mask n_max equals grid_k^2; every patch may receive a region");
  }
  return warnings;
}

/// Binary map with 1 = kept, 0 = masked, plus the regions that produced it.
struct MaskMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;
  std::vector<std::vector<Pixel>> regions;

  static MaskMap all_kept(int h, int w) {
    return MaskMap{h, w, std::vector<std::uint8_t>(std::size_t(h) * w, 1), {}};
  }

  bool kept(int y, int x) const { return bits[std::size_t(y) * width + x] != 0; }

  std::size_t masked_count() const {
    return std::size_t(std::count(bits.begin(), bits.end(), std::uint8_t{0}));
  }
};

/// Grows a 4-connected region of exactly `area` pixels from `start`.
///
/// Each sweep visits the current frontier (free 4-neighbours of the region)
/// in row-major order and merges every candidate with probability
/// `merge_prob`; rejected candidates stay eligible on the next sweep. Pixels
/// flagged in `occupied` (size h*w) are never taken.
template <class Rng>
std::vector<Pixel> grow_region(Pixel start, int area, int h, int w,
                               const std::vector<std::uint8_t>& occupied, Rng& rng,
                               double merge_prob = 0.5) {
  if (start.y < 0 || start.y >= h || start.x < 0 || start.x >= w) {
    throw InvalidArgument("grow_region: start pixel outside bounds");
  }
  if (area < 1) throw InvalidArgument("grow_region: area must be >= 1");
  if (occupied.size() != std::size_t(h) * w) throw InvalidArgument("grow_region: occupancy size mismatch");
  if (occupied[std::size_t(start.y) * w + start.x]) {
    throw GrowthFailure("grow_region: start pixel already occupied");
  }

  std::vector<std::uint8_t> in_region(std::size_t(h) * w, 0);
  std::vector<Pixel> region{start};
  in_region[std::size_t(start.y) * w + start.x] = 1;
  std::bernoulli_distribution merge(merge_prob);
  std::vector<Pixel> frontier;
  std::vector<std::uint8_t> seen(std::size_t(h) * w, 0);

  while (int(region.size()) < area) {
    frontier.clear();
    std::fill(seen.begin(), seen.end(), 0);
    for (const Pixel& p : region) {
      const Pixel nbrs[4] = {{p.y - 1, p.x}, {p.y + 1, p.x}, {p.y, p.x - 1}, {p.y, p.x + 1}};
      for (const Pixel& q : nbrs) {
        if (q.y < 0 || q.y >= h || q.x < 0 || q.x >= w) continue;
        const std::size_t i = std::size_t(q.y) * w + q.x;
        if (in_region[i] || occupied[i] || seen[i]) continue;
        seen[i] = 1;
        frontier.push_back(q);
      }
    }
    if (frontier.empty()) {
      throw GrowthFailure("grow_region: free component holds only " +
                          std::to_string(region.size()) + " pixels, requested " +
                          std::to_string(area));
    }
    std::sort(frontier.begin(), frontier.end());
    for (const Pixel& q : frontier) {
      if (!merge(rng)) continue;
      region.push_back(q);
      in_region[std::size_t(q.y) * w + q.x] = 1;
      if (int(region.size()) == area) break;
    }
  }
  return region;
}

inline constexpr int kStartRetries = 8;

template <class Rng>
MaskMap generate_mask_map(int h, int w, const MaskParams& params, Rng& rng) {
  validate_mask_params(params);
  if (h < 1 || w < 1 || h % params.grid_k != 0 || w % params.grid_k != 0) {
    throw InvalidArgument("mask size " + std::to_string(h) + "x" + std::to_string(w) +
                          " not divisible by grid_k=" + std::to_string(params.grid_k));
  }
  const int k = params.grid_k;
  const int ph = h / k;
  const int pw = w / k;

  std::uniform_int_distribution<int> count_dist(params.n_min, params.n_max);
  const int n = count_dist(rng);

  // partial Fisher-Yates: first n entries become a uniform sample without replacement
  std::vector<int> patches(std::size_t(k) * k);
  std::iota(patches.begin(), patches.end(), 0);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> pick(i, int(patches.size()) - 1);
    std::swap(patches[i], patches[pick(rng)]);
  }

  MaskMap mask = MaskMap::all_kept(h, w);
  std::vector<std::uint8_t> occupied(std::size_t(h) * w, 0);
  std::uniform_int_distribution<int> area_dist(params.area_min, params.area_max);
  std::uniform_int_distribution<int> py(0, ph - 1), px(0, pw - 1);

  for (int r = 0; r < n; ++r) {
    const int patch = patches[r];
    const int oy = (patch / k) * ph;
    const int ox = (patch % k) * pw;
    const int area = area_dist(rng);
    std::vector<Pixel> region;
    for (int attempt = 0; attempt < kStartRetries && region.empty(); ++attempt) {
      const Pixel start{oy + py(rng), ox + px(rng)};
      if (occupied[std::size_t(start.y) * w + start.x]) continue;
      try {
        region = grow_region(start, area, h, w, occupied, rng, params.merge_prob);
      } catch (const GrowthFailure&) {
        region.clear();
      }
    }
    if (region.empty()) {
      throw GrowthFailure("generate_mask_map: region " + std::to_string(r) + " of area " +
                          std::to_string(area) + " failed after " +
                          std::to_string(kStartRetries) + " start pixels");
    }
    for (const Pixel& p : region) {
      occupied[std::size_t(p.y) * w + p.x] = 1;
      mask.bits[std::size_t(p.y) * w + p.x] = 0;
    }
    mask.regions.push_back(std::move(region));
  }
  return mask;
}

enum class FillMode { CutOut, CutMix };

struct FillSpec {
  FillMode mode = FillMode::CutOut;
  const HsiCube* donor = nullptr;  // required for CutMix
};

/// out = cube * M + fill * (1 - M), full spectrum replaced at each masked pixel.
inline HsiCube apply_mask(const HsiCube& cube, const MaskMap& mask, const FillSpec& fill) {
  if (mask.height != cube.height() || mask.width != cube.width()) {
    throw InvalidArgument("apply_mask: mask " + std::to_string(mask.height) + "x" +
                          std::to_string(mask.width) + " does not match cube " + shape_string(cube));
  }
  if (fill.mode == FillMode::CutMix) {
    if (fill.donor == nullptr) throw InvalidArgument("apply_mask: CutMix requires a donor cube");
    require_same_shape(cube, *fill.donor, "apply_mask donor");
  }
  std::vector<double> v(cube.values().begin(), cube.values().end());
  const std::size_t hw = cube.pixel_count();
  for (std::size_t i = 0; i < hw; ++i) {
    if (mask.bits[i]) continue;
    for (int b = 0; b < cube.bands(); ++b) {
      const std::size_t idx = std::size_t(b) * hw + i;
      v[idx] = fill.mode == FillMode::CutOut ? 0.0 : fill.donor->values()[idx];
    }
  }
  return HsiCube(cube.height(), cube.width(), cube.bands(), std::move(v));
}

}  // namespace hsiad

#endif  // HSIAD_MASKGEN_HPP
