#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "v2x_isac/scene.hpp"

using namespace v2x_isac;

TEST(MinParallelDistance, MatchesOffsetOverHalfAngleTangent) {
  EXPECT_NEAR(min_parallel_distance(1.8, deg_to_rad(45.0)), 1.8 / std::tan(kPi / 8.0), 1e-12);
  EXPECT_NEAR(min_parallel_distance(1.8, deg_to_rad(45.0)), 4.3456, 1e-4);
  EXPECT_NEAR(min_parallel_distance(3.2, deg_to_rad(22.5)), 16.0875, 1e-4);
}

TEST(MinParallelDistance, WideBeamGivesZeroAndInvalidInputThrows) {
  EXPECT_EQ(min_parallel_distance(1.8, kPi), 0.0);
  EXPECT_EQ(min_parallel_distance(1.8, 1.5 * kPi), 0.0);
  EXPECT_THROW(min_parallel_distance(1.8, 0.0), std::invalid_argument);
  EXPECT_THROW(min_parallel_distance(0.0, 0.5), std::invalid_argument);
}

TEST(SystemConfig, DerivedMinimumDistancesUseNarrowestBeam) {
  SystemConfig c;
  EXPECT_NEAR(c.r_Cmin(), 4.3456, 1e-4);
  EXPECT_NEAR(c.r_Imin(), 16.0875, 1e-4);
  c.r_Imin_override = 20.0;
  EXPECT_EQ(c.r_Imin(), 20.0);
  EXPECT_NO_THROW(c.validate());
  c.r_Rmax = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(SamplePpp, CountHasPoissonMeanAndVariance) {
  const double rate = 0.02;
  const double lo = 10.0;
  const double hi = 1010.0;
  const int reps = 20000;
  double sum = 0.0;
  double sum2 = 0.0;
  double pos_sum = 0.0;
  std::size_t pos_n = 0;
  for (int i = 0; i < reps; ++i) {
    Rng rng = Rng::substream(42, static_cast<std::uint64_t>(i));
    auto pts = sample_ppp(rate, lo, hi, rng);
    ASSERT_TRUE(std::is_sorted(pts.begin(), pts.end()));
    for (double p : pts) {
      ASSERT_GE(p, lo);
      ASSERT_LE(p, hi);
      pos_sum += p;
      ++pos_n;
    }
    sum += static_cast<double>(pts.size());
    sum2 += static_cast<double>(pts.size() * pts.size());
  }
  const double mean = sum / reps;
  const double var = sum2 / reps - mean * mean;
  const double expected = rate * (hi - lo);
  EXPECT_NEAR(mean, expected, 0.05 * expected);
  EXPECT_NEAR(var, expected, 0.05 * expected);
  // Conditionally uniform positions.
  EXPECT_NEAR(pos_sum / static_cast<double>(pos_n), (lo + hi) / 2.0, 5.0);
}

TEST(SamplePpp, EdgeCases) {
  Rng rng(1);
  EXPECT_TRUE(sample_ppp(0.0, 0.0, 100.0, rng).empty());
  EXPECT_TRUE(sample_ppp(1.0, 5.0, 5.0, rng).empty());
  EXPECT_THROW(sample_ppp(1.0, 10.0, 5.0, rng), std::invalid_argument);
  EXPECT_THROW(sample_ppp(-1.0, 0.0, 5.0, rng), std::invalid_argument);
}

TEST(SamplePpp, SameSeedSameDraws) {
  Rng a = Rng::substream(7, 3);
  Rng b = Rng::substream(7, 3);
  EXPECT_EQ(sample_ppp(0.05, 0.0, 500.0, a), sample_ppp(0.05, 0.0, 500.0, b));
  Rng c = Rng::substream(7, 4);
  Rng d = Rng::substream(7, 3);
  EXPECT_NE(sample_ppp(0.05, 0.0, 500.0, c), sample_ppp(0.05, 0.0, 500.0, d));
}

TEST(NearestInWindow, ClosedBounds) {
  const std::vector<double> pts{5.0, 10.0, 250.0};
  EXPECT_EQ(nearest_in_window(pts, 5.0, 200.0), 5.0);
  EXPECT_EQ(nearest_in_window(pts, std::nextafter(5.0, 6.0), 200.0), 10.0);
  EXPECT_EQ(nearest_in_window(pts, 0.0, 5.0), 5.0);
  EXPECT_FALSE(nearest_in_window(pts, 11.0, 200.0).has_value());
  EXPECT_FALSE(nearest_in_window({}, 0.0, 1.0).has_value());
}

TEST(RemoveOverlaps, GreedyLeftToRight) {
  EXPECT_EQ(remove_overlaps({0.0, 3.0, 5.0, 9.4, 10.0}, 4.5), (std::vector<double>{0.0, 5.0, 10.0}));
  EXPECT_EQ(remove_overlaps({0.0, 4.5}, 4.5), (std::vector<double>{0.0, 4.5}));
  EXPECT_TRUE(remove_overlaps({}, 4.5).empty());
}

TEST(RemoveOverlaps, HardCoreGapAndThinnedDensity) {
  // Kept points form a renewal process with spacing L + Exp(lambda), so the
  // surviving density is 1 / (L + 1 / lambda).
  const double lambda = 0.02;
  const double L = 4.5;
  std::size_t kept = 0;
  double window = 0.0;
  for (int i = 0; i < 500; ++i) {
    Rng rng = Rng::substream(9, static_cast<std::uint64_t>(i));
    auto pts = remove_overlaps(sample_ppp(lambda, 0.0, 2000.0, rng), L);
    for (std::size_t k = 1; k < pts.size(); ++k) ASSERT_GE(pts[k] - pts[k - 1], L);
    kept += pts.size();
    window += 2000.0;
  }
  const double density = static_cast<double>(kept) / window;
  EXPECT_NEAR(density, 1.0 / (L + 1.0 / lambda), 0.02 * density);
  EXPECT_LT(density, lambda);
}

TEST(LineScene, WindowsMatchConfiguration) {
  SystemConfig c;
  for (int i = 0; i < 200; ++i) {
    Rng rng = Rng::substream(11, static_cast<std::uint64_t>(i));
    const LineScene s = build_line_scene(c, rng);
    for (double r : s.radar_targets) {
      EXPECT_GE(r, c.r_Rmin);
      EXPECT_LE(r, c.r_Rmax);
    }
    for (double r : s.rsus) EXPECT_GE(r, c.r_Cmin());
    for (double r : s.interferers) EXPECT_GE(r, c.r_Imin());
  }
}

class RtSceneTest : public ::testing::Test {
 protected:
  SystemConfig cfg;
  RtScene build(std::uint64_t i) const {
    Rng rng = Rng::substream(21, i);
    return build_rt_scene(cfg, rng);
  }
};

TEST_F(RtSceneTest, VehiclesDoNotOverlapAndSitInTheirLanes) {
  for (std::uint64_t i = 0; i < 50; ++i) {
    const RtScene s = build(i);
    for (std::size_t a = 0; a < s.vehicles.size(); ++a) {
      const auto& va = s.vehicles[a];
      const double y = va.lane == Lane::kSame ? cfg.same_lane_y : cfg.opposite_lane_y;
      EXPECT_NEAR((va.rect.ymin + va.rect.ymax) / 2.0, y, 1e-12);
      EXPECT_NEAR(va.rect.xmax - va.rect.xmin, cfg.vehicle_length, 1e-12);
      for (std::size_t b = a + 1; b < s.vehicles.size(); ++b) {
        EXPECT_FALSE(va.rect.overlaps(s.vehicles[b].rect)) << "vehicles " << a << " and " << b;
      }
    }
  }
}

TEST_F(RtSceneTest, BuildingsLineTheStreetAndLeaveCrossStreetGaps) {
  const double y_lo = cfg.street_y_min;
  const double y_hi = cfg.street_y_min + cfg.street_width;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const RtScene s = build(i);
    ASSERT_FALSE(s.buildings.empty());
    for (const auto& b : s.buildings) {
      EXPECT_TRUE(b.rect.ymax <= y_lo + 1e-12 || b.rect.ymin >= y_hi - 1e-12);
      EXPECT_EQ(b.height, cfg.building_height);
      for (double c : s.perpendicular_streets) {
        EXPECT_FALSE(b.rect.xmin < c + cfg.street_width / 2.0 - 1e-9 && b.rect.xmax > c - cfg.street_width / 2.0 + 1e-9);
      }
    }
  }
}

TEST_F(RtSceneTest, InterfererThinningWithinThreeSigma) {
  std::size_t opposite = 0;
  std::size_t marked = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const RtScene s = build(i);
    opposite += s.sampled_opposite_lane;
    marked += s.sampled_interferers;
  }
  const double n = static_cast<double>(opposite);
  const double sigma = std::sqrt(n * cfg.p_I * (1.0 - cfg.p_I));
  EXPECT_NEAR(static_cast<double>(marked), n * cfg.p_I, 3.0 * sigma);
}

TEST_F(RtSceneTest, RsusAndNextVehicle) {
  const RtScene s = build(3);
  for (const auto& r : s.rsu_nodes) {
    EXPECT_GE(r.x - cfg.radar_tx.x, cfg.r_Cmin());
    EXPECT_EQ(r.y, cfg.rsu_y);
    EXPECT_EQ(r.z, cfg.rsu_height);
  }
  auto ahead = s.next_vehicle_ahead();
  ASSERT_TRUE(ahead.has_value());
  for (const auto& v : s.vehicles) {
    if (v.lane == Lane::kSame) EXPECT_GE(v.position, s.vehicles[*ahead].position);
  }
}

TEST_F(RtSceneTest, DeterministicAndJsonRoundTrip) {
  const RtScene a = build(5);
  const RtScene b = build(5);
  EXPECT_EQ(scene_to_json(a).dump(), scene_to_json(b).dump());
  const RtScene c = scene_from_json(scene_to_json(a));
  EXPECT_EQ(scene_to_json(c).dump(), scene_to_json(a).dump());
  EXPECT_NE(scene_to_json(build(6)).dump(), scene_to_json(a).dump());
}
