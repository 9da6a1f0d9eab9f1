#ifndef HSIAD_SYNTH_HPP
#define HSIAD_SYNTH_HPP

// Offline scene generator: linear-mixture backgrounds with smooth abundance
// fields plus implanted anomaly blobs grown with the mask growth procedure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "hsiad/cube.hpp"
#include "hsiad/maskgen.hpp"
#include "hsiad/rng.hpp"

namespace hsiad {

struct SynthParams {
  int endmember_count = 4;
  int anomaly_count = 3;
  int area_min = 3;
  int area_max = 20;
  double contrast = 0.15;
  double noise_sigma = 0.01;
  int height = 64;
  int width = 64;
  int bands = 30;
  // Background endmembers are drawn from this seed so scenes can share a library.
  std::uint64_t library_seed = 0;
};

inline void validate(const SynthParams& p) {
  if (p.height < 3 || p.width < 3 || p.bands < 1) throw InvalidArgument("synth size must be at least 3x3x1");
  if (p.endmember_count < 1) throw InvalidArgument("synth endmember_count must be >= 1");
  if (p.anomaly_count < 0) throw InvalidArgument("synth anomaly_count must be >= 0");
  if (p.area_min < 1 || p.area_min > p.area_max) throw InvalidArgument("synth area range invalid");
  if (!(p.contrast > 0.0)) throw InvalidArgument("synth contrast must be > 0");
  if (!(p.noise_sigma >= 0.0)) throw InvalidArgument("synth noise_sigma must be >= 0");
  if (2 * std::int64_t(p.anomaly_count) * p.area_max >= std::int64_t(p.height) * p.width) {
    throw InvalidArgument("synth anomalies could cover half the scene");
  }
}

struct Scene {
  HsiCube cube;
  GroundTruthMap truth;
  std::vector<std::vector<Pixel>> blobs;
};

namespace detail {

/// Smooth positive spectrum: baseline plus a few Gaussian bumps over the band axis.
template <class R>
std::vector<double> smooth_spectrum(int bands, R& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(bands, 0.25 + 0.4 * u(rng));
  const double slope = (u(rng) - 0.5) * 0.3;
  for (int b = 0; b < bands; ++b) s[b] += slope * b / std::max(1, bands - 1);
  for (int k = 0; k < 3; ++k) {
    const double amp = (u(rng) - 0.5) * 0.4;
    const double centre = u(rng) * bands;
    const double width = bands * (0.08 + 0.2 * u(rng)) + 0.5;
    for (int b = 0; b < bands; ++b) {
      const double t = (b - centre) / width;
      s[b] += amp * std::exp(-0.5 * t * t);
    }
  }
  for (double& v : s) v = std::clamp(v, 0.02, 1.5);
  return s;
}

}  // namespace detail

inline std::vector<std::vector<double>> endmember_library(int count, int bands, std::uint64_t seed) {
  Rng rng = make_rng(seed, {tag(Stream::Library)});
  std::vector<std::vector<double>> lib;
  for (int e = 0; e < count; ++e) lib.push_back(detail::smooth_spectrum(bands, rng));
  return lib;
}

inline Scene synth_scene(const SynthParams& p, std::uint64_t seed) {
  validate(p);
  const int h = p.height, w = p.width, nb = p.bands;
  const std::size_t hw = std::size_t(h) * w;
  const auto library = endmember_library(p.endmember_count, nb, p.library_seed);
  Rng rng = make_rng(seed, {tag(Stream::Synth)});
  std::uniform_real_distribution<double> u(0.0, 1.0);

  // smooth abundance fields, softmax-normalized into convex weights per pixel
  std::vector<double> weights(hw * p.endmember_count);
  for (int e = 0; e < p.endmember_count; ++e) {
    double fy[3], fx[3], ph[3], amp[3];
    for (int j = 0; j < 3; ++j) {
      fy[j] = (u(rng) * 2.0 - 1.0) * 1.8;
      fx[j] = (u(rng) * 2.0 - 1.0) * 1.8;
      ph[j] = u(rng) * 2.0 * std::numbers::pi;
      amp[j] = 0.5 + u(rng);
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double f = 0.0;
        for (int j = 0; j < 3; ++j) {
          f += amp[j] * std::sin(2.0 * std::numbers::pi * (fy[j] * y / h + fx[j] * x / w) + ph[j]);
        }
        weights[(std::size_t(y) * w + x) * p.endmember_count + e] = std::exp(1.5 * f);
      }
    }
  }
  std::vector<double> v(hw * nb, 0.0);
  for (std::size_t i = 0; i < hw; ++i) {
    double total = 0.0;
    for (int e = 0; e < p.endmember_count; ++e) total += weights[i * p.endmember_count + e];
    for (int e = 0; e < p.endmember_count; ++e) {
      const double a = weights[i * p.endmember_count + e] / total;
      for (int b = 0; b < nb; ++b) v[std::size_t(b) * hw + i] += a * library[e][b];
    }
  }

  // anomalies: disjoint 4-connected blobs, each with its own pure spectrum
  Scene scene;
  std::vector<std::uint8_t> occupied(hw, 0);
  std::uniform_int_distribution<int> area_dist(p.area_min, p.area_max);
  std::uniform_int_distribution<int> ry(0, h - 1), rx(0, w - 1);
  for (int a = 0; a < p.anomaly_count; ++a) {
    const int area = area_dist(rng);
    std::vector<Pixel> blob;
    for (int attempt = 0; attempt < kStartRetries && blob.empty(); ++attempt) {
      const Pixel start{ry(rng), rx(rng)};
      if (occupied[std::size_t(start.y) * w + start.x]) continue;
      try {
        blob = grow_region(start, area, h, w, occupied, rng);
      } catch (const GrowthFailure&) {
        blob.clear();
      }
    }
    if (blob.empty()) throw GrowthFailure("synth_scene: anomaly blob " + std::to_string(a) + " does not fit");
    // extra endmember, offset by `contrast` along a random band oscillation;
    // a flat offset would sit almost inside the span of the background mixtures
    auto spectrum = detail::smooth_spectrum(nb, rng);
    const double cycles = 2.0 + 3.0 * u(rng);
    const double phase = u(rng) * 2.0 * std::numbers::pi;
    for (int b = 0; b < nb; ++b) {
      spectrum[b] += p.contrast * std::cos(2.0 * std::numbers::pi * cycles * b / nb + phase);
    }
    for (const Pixel& px : blob) {
      const std::size_t i = std::size_t(px.y) * w + px.x;
      occupied[i] = 1;
      for (int b = 0; b < nb; ++b) v[std::size_t(b) * hw + i] = spectrum[b];
    }
    scene.blobs.push_back(std::move(blob));
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  for (double& x : v) {
    x += p.noise_sigma * noise(rng);
    x = static_cast<double>(static_cast<float>(x));  // storage precision
  }
  scene.cube = HsiCube(h, w, nb, std::move(v));
  scene.truth = GroundTruthMap(h, w, std::move(occupied));
  return scene;
}

}  // namespace hsiad

#endif  // HSIAD_SYNTH_HPP
