#include <gtest/gtest.h>

#include <queue>
#include <set>

#include "hsiad/maskgen.hpp"
#include "hsiad/rng.hpp"

using namespace hsiad;

namespace {

bool four_connected(const std::vector<Pixel>& region) {
  if (region.empty()) return false;
  std::set<std::pair<int, int>> cells;
  for (const auto& p : region) cells.insert({p.y, p.x});
  std::set<std::pair<int, int>> seen{{region[0].y, region[0].x}};
  std::queue<std::pair<int, int>> q;
  q.push({region[0].y, region[0].x});
  while (!q.empty()) {
    auto [y, x] = q.front();
    q.pop();
    const std::pair<int, int> nb[4] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
    for (const auto& n : nb)
      if (cells.count(n) && seen.insert(n).second) q.push(n);
  }
  return seen.size() == cells.size();
}

/// Straight re-statement of the growth rule: each sweep offers the free
/// 4-neighbours of the region in row-major order, each accepted with a fair coin.
std::set<std::pair<int, int>> oracle_grow(int sy, int sx, int area, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::set<std::pair<int, int>> region{{sy, sx}};
  while (int(region.size()) < area) {
    std::set<std::pair<int, int>> frontier;  // ordered (y, x) = row-major
    for (auto [y, x] : region) {
      const std::pair<int, int> nb[4] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (auto n : nb)
        if (n.first >= 0 && n.first < h && n.second >= 0 && n.second < w && !region.count(n)) frontier.insert(n);
    }
    for (auto n : frontier) {
      if (!coin(rng)) continue;
      region.insert(n);
      if (int(region.size()) == area) break;
    }
  }
  return region;
}

}  // namespace

TEST(GrowRegion, AreaOneIsStart) {
  std::vector<std::uint8_t> occ(64 * 64, 0);
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng(s);
    const auto r = grow_region({10, 20}, 1, 64, 64, occ, rng);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0], (Pixel{10, 20}));
  }
}

TEST(GrowRegion, CornerStartStaysInBounds) {
  std::vector<std::uint8_t> occ(64 * 64, 0);
  Rng rng(3);
  const auto r = grow_region({0, 0}, 3, 64, 64, occ, rng);
  ASSERT_EQ(r.size(), 3u);
  for (const auto& p : r) {
    EXPECT_GE(p.y, 0);
    EXPECT_GE(p.x, 0);
  }
  EXPECT_TRUE(four_connected(r));
}

TEST(GrowRegion, MatchesStepwiseOracle) {
  std::vector<std::uint8_t> occ(64 * 64, 0);
  for (std::uint64_t seed : {1ull, 2ull, 42ull, 1234ull}) {
    Rng rng(seed);
    const auto r = grow_region({30, 31}, 20, 64, 64, occ, rng);
    ASSERT_EQ(r.size(), 20u);
    EXPECT_TRUE(four_connected(r));
    std::set<std::pair<int, int>> got;
    for (const auto& p : r) got.insert({p.y, p.x});
    EXPECT_EQ(got, oracle_grow(30, 31, 20, 64, 64, seed)) << "seed " << seed;
    Rng again(seed);
    EXPECT_EQ(grow_region({30, 31}, 20, 64, 64, occ, again), r);
  }
}

TEST(GrowRegion, RespectsOccupiedAndFailsWhenEnclosed) {
  // start at (1,1) fenced in by an occupied ring: only 1 free pixel
  std::vector<std::uint8_t> occ(8 * 8, 0);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x)
      if (y != 1 || x != 1) occ[y * 8 + x] = 1;
  Rng rng(0);
  EXPECT_THROW(grow_region({1, 1}, 2, 8, 8, occ, rng), GrowthFailure);
  EXPECT_THROW(grow_region({0, 0}, 1, 8, 8, occ, rng), GrowthFailure);
  EXPECT_THROW(grow_region({8, 0}, 1, 8, 8, occ, rng), InvalidArgument);

  std::vector<std::uint8_t> half(8 * 8, 0);
  for (int y = 0; y < 8; ++y) half[y * 8 + 4] = 1;
  const auto r = grow_region({3, 2}, 20, 8, 8, half, rng);
  for (const auto& p : r) EXPECT_LT(p.x, 4);
}

TEST(MaskParams, BoundsAndWarning) {
  MaskParams p;
  EXPECT_TRUE(validate_mask_params(p).empty());
  p.n_max = 64;
  EXPECT_EQ(validate_mask_params(p).size(), 1u);
  p.n_max = 65;
  EXPECT_THROW(validate_mask_params(p), InvalidArgument);
  p = MaskParams{};
  p.area_min = 0;
  EXPECT_THROW(validate_mask_params(p), InvalidArgument);
  p = MaskParams{};
  p.n_min = 5;
  p.n_max = 4;
  EXPECT_THROW(validate_mask_params(p), InvalidArgument);
  Rng rng(0);
  EXPECT_THROW(generate_mask_map(60, 64, MaskParams{}, rng), InvalidArgument);
}

TEST(MaskMap, PaperParametersInvariants) {
  const MaskParams p;
  for (std::uint64_t s = 0; s < 300; ++s) {
    Rng rng = make_rng(s, {77});
    const MaskMap m = generate_mask_map(64, 64, p, rng);
    ASSERT_GE(m.regions.size(), 1u);
    ASSERT_LE(m.regions.size(), 32u);
    std::size_t area_sum = 0;
    std::set<std::pair<int, int>> all;
    for (const auto& r : m.regions) {
      ASSERT_GE(r.size(), 3u);
      ASSERT_LE(r.size(), 20u);
      ASSERT_TRUE(four_connected(r));
      for (const auto& px : r) ASSERT_TRUE(all.insert({px.y, px.x}).second) << "regions overlap";
      area_sum += r.size();
    }
    ASSERT_EQ(m.masked_count(), area_sum);
    for (const auto& [y, x] : all) ASSERT_FALSE(m.kept(y, x));
  }
}

TEST(MaskMap, StartPixelsInDistinctPatches) {
  const MaskParams p;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng = make_rng(s, {78});
    const MaskMap m = generate_mask_map(64, 64, p, rng);
    std::set<int> patches;
    for (const auto& r : m.regions) patches.insert((r[0].y / 8) * 8 + r[0].x / 8);
    EXPECT_EQ(patches.size(), m.regions.size());
  }
}

TEST(MaskMap, FullyForcedSinglePixel) {
  MaskParams p;
  p.n_min = p.n_max = 1;
  p.area_min = p.area_max = 1;
  Rng rng(5);
  EXPECT_EQ(generate_mask_map(64, 64, p, rng).masked_count(), 1u);
}

TEST(MaskMap, Deterministic) {
  Rng a(11), b(11);
  const MaskMap ma = generate_mask_map(64, 64, MaskParams{}, a);
  const MaskMap mb = generate_mask_map(64, 64, MaskParams{}, b);
  EXPECT_EQ(ma.bits, mb.bits);
}

TEST(ApplyMask, CutOutCutMixAndIdentity) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::vector<double> a(8 * 8 * 3), d(8 * 8 * 3);
  for (auto& v : a) v = u(rng);
  for (auto& v : d) v = u(rng);
  const HsiCube cube(8, 8, 3, a), donor(8, 8, 3, d);

  EXPECT_EQ(apply_mask(cube, MaskMap::all_kept(8, 8), {FillMode::CutOut, nullptr}), cube);

  MaskMap one = MaskMap::all_kept(8, 8);
  one.bits[2 * 8 + 5] = 0;
  const HsiCube co = apply_mask(cube, one, {FillMode::CutOut, nullptr});
  for (int b = 0; b < 3; ++b)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) EXPECT_EQ(co.at(b, y, x), (y == 2 && x == 5) ? 0.0 : cube.at(b, y, x));
  EXPECT_EQ(apply_mask(co, one, {FillMode::CutOut, nullptr}), co);

  // elementwise X*M + I*(1-M)
  Rng mr(9);
  MaskParams p;
  p.grid_k = 4;
  p.n_max = 8;
  p.area_max = 6;
  const MaskMap m = generate_mask_map(8, 8, p, mr);
  const HsiCube cm = apply_mask(cube, m, {FillMode::CutMix, &donor});
  for (int b = 0; b < 3; ++b)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const double mk = m.kept(y, x) ? 1.0 : 0.0;
        EXPECT_EQ(cm.at(b, y, x), cube.at(b, y, x) * mk + donor.at(b, y, x) * (1.0 - mk));
      }

  EXPECT_THROW(apply_mask(cube, m, {FillMode::CutMix, nullptr}), InvalidArgument);
  const HsiCube small = HsiCube::filled(8, 8, 2, 0.0);
  EXPECT_THROW(apply_mask(cube, m, {FillMode::CutMix, &small}), InvalidArgument);
  EXPECT_THROW(apply_mask(cube, MaskMap::all_kept(4, 8), {FillMode::CutOut, nullptr}), InvalidArgument);
}
