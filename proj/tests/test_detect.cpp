#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "s2l/detect.hpp"
#include "support.hpp"

using namespace s2l;
using namespace s2l::detect;

namespace {

DetectorMaps single_pixel_maps(int w, int h, int x, int y, float score, RBox box) {
  DetectorMaps m;
  m.score = {w, h, std::vector<float>(static_cast<std::size_t>(w) * h, 0.0f)};
  m.geo = {w, h, std::vector<RBox>(static_cast<std::size_t>(w) * h)};
  m.score.values[static_cast<std::size_t>(y) * w + x] = score;
  m.geo.values[static_cast<std::size_t>(y) * w + x] = box;
  return m;
}

Quad from_rect(const oracle::Rect& r) { return Quad::axis_aligned(r.x0, r.y0, r.x1, r.y1, r.score); }

}  // namespace

TEST(DecodeRbox, ZeroScoreGivesNothing) {
  auto m = single_pixel_maps(16, 16, 10, 10, 0.0f, {2, 3, 2, 3, 0});
  EXPECT_TRUE(decode_rbox(m.score, m.geo, 0.5).empty());
}

TEST(DecodeRbox, AxisAlignedCorners) {
  auto m = single_pixel_maps(16, 16, 10, 10, 0.9f, {2, 3, 2, 3, 0});
  const auto quads = decode_rbox(m.score, m.geo, 0.8);
  ASSERT_EQ(quads.size(), 1u);
  const std::array<Point, 4> expect{Point{7, 8}, Point{13, 8}, Point{13, 12}, Point{7, 12}};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(quads[0].pts[i].x, expect[i].x, 1e-12);
    EXPECT_NEAR(quads[0].pts[i].y, expect[i].y, 1e-12);
  }
  EXPECT_FLOAT_EQ(static_cast<float>(quads[0].score), 0.9f);
}

TEST(DecodeRbox, RotatedCornersMatchExplicitRotation) {
  const double a = std::numbers::pi / 6;
  auto m = single_pixel_maps(16, 16, 10, 10, 0.9f, {2, 3, 2, 3, static_cast<float>(a)});
  const auto quads = decode_rbox(m.score, m.geo, 0.8);
  ASSERT_EQ(quads.size(), 1u);
  const double af = static_cast<float>(a);
  const std::array<std::pair<double, double>, 4> rel{{{-3, -2}, {3, -2}, {3, 2}, {-3, 2}}};
  for (std::size_t i = 0; i < 4; ++i) {
    const double rx = 10 + rel[i].first * std::cos(af) - rel[i].second * std::sin(af);
    const double ry = 10 + rel[i].first * std::sin(af) + rel[i].second * std::cos(af);
    EXPECT_NEAR(quads[0].pts[i].x, rx, 1e-9);
    EXPECT_NEAR(quads[0].pts[i].y, ry, 1e-9);
  }
}

TEST(DecodeRbox, ScaleAndThresholdProperties) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<float> u(0, 1), d(0.5f, 6), ang(-1.5f, 1.5f);
  const int w = 12, h = 9;
  DetectorMaps m;
  m.score = {w, h, std::vector<float>(w * h)};
  m.geo = {w, h, std::vector<RBox>(w * h)};
  for (int i = 0; i < w * h; ++i) {
    m.score.values[i] = u(rng);
    m.geo.values[i] = {d(rng), d(rng), d(rng), d(rng), ang(rng)};
  }
  const auto all = decode_rbox(m.score, m.geo, 0.0, 4);
  EXPECT_EQ(all.size(), static_cast<std::size_t>(w * h));
  EXPECT_TRUE(decode_rbox(m.score, m.geo, 1.01).empty());
  // Each quad contains its generating location.
  std::size_t k = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x, ++k) {
      std::vector<oracle::Pt> poly;
      for (const auto& p : all[k].pts) poly.push_back({p.x, p.y});
      EXPECT_TRUE(oracle::inside_polygon(poly, {4.0 * x, 4.0 * y}));
    }
}

TEST(DecodeRbox, DimensionMismatchThrows) {
  auto m = single_pixel_maps(4, 4, 1, 1, 1.0f, {1, 1, 1, 1, 0});
  m.geo.width = 5;
  EXPECT_THROW(decode_rbox(m.score, m.geo, 0.5), Error);
}

TEST(Iou, Basics) {
  const auto a = Quad::axis_aligned(0, 0, 1, 1);
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, Quad::axis_aligned(5, 5, 6, 6)), 0.0);
  // Intersection 0.5, union 1.5.
  EXPECT_NEAR(iou(a, Quad::axis_aligned(0.5, 0, 1.5, 1)), 1.0 / 3.0, 1e-12);
  EXPECT_THROW(iou(a, Quad::axis_aligned(0, 0, 0, 1)), Error);
}

TEST(Iou, SymmetricBoundedAndMatchesRectFormula) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> c(0, 20), s(0.5, 10);
  for (int i = 0; i < 300; ++i) {
    const oracle::Rect r1{c(rng), c(rng), 0, 0, 1}, r2{c(rng), c(rng), 0, 0, 1};
    const oracle::Rect a{r1.x0, r1.y0, r1.x0 + s(rng), r1.y0 + s(rng), 1};
    const oracle::Rect b{r2.x0, r2.y0, r2.x0 + s(rng), r2.y0 + s(rng), 1};
    const double v = iou(from_rect(a), from_rect(b));
    EXPECT_NEAR(v, iou(from_rect(b), from_rect(a)), 1e-12);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_NEAR(v, oracle::rect_iou(a, b), 1e-9);
  }
}

TEST(Iou, RotatedSquareAgainstKnownOverlap) {
  // Unit square against itself rotated 45 degrees about its center: the
  // intersection is a regular octagon of area 2(sqrt2 - 1).
  Quad sq = Quad::axis_aligned(-0.5, -0.5, 0.5, 0.5);
  Quad rot;
  const double r = std::sqrt(0.5);
  rot.pts = {Point{0, -r}, Point{r, 0}, Point{0, r}, Point{-r, 0}};
  const double inter = 2 * (std::sqrt(2.0) - 1);
  EXPECT_NEAR(iou(sq, rot), inter / (2 - inter), 1e-12);
}

TEST(Nms, EmptyAndDuplicates) {
  EXPECT_TRUE(locality_aware_nms({}, 0.2).empty());
  const auto a = Quad::axis_aligned(2, 2, 8, 6, 0.9);
  const auto b = Quad::axis_aligned(2, 2, 8, 6, 0.8);
  const auto out = locality_aware_nms({a, b}, 0.2);
  ASSERT_EQ(out.size(), 1u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(out[0].pts[i].x, a.pts[i].x, 1e-12);
    EXPECT_NEAR(out[0].pts[i].y, a.pts[i].y, 1e-12);
  }
}

TEST(Nms, WeightedMergeRule) {
  const auto a = Quad::axis_aligned(0, 0, 10, 10, 0.75);
  const auto b = Quad::axis_aligned(2, 0, 12, 10, 0.25);
  const auto m = weighted_merge(a, b);
  EXPECT_NEAR(m.pts[0].x, 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(m.score, 0.75);
  const auto e = weighted_merge(Quad::axis_aligned(0, 0, 10, 10, 0.5), Quad::axis_aligned(2, 0, 12, 10, 0.5));
  EXPECT_NEAR(e.pts[0].x, 1.0, 1e-12);
}

TEST(Nms, MatchesBruteForceOracle) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> c(0, 30), s(2, 12), sc(0.01, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<oracle::Rect> rects;
    std::vector<Quad> quads;
    for (int i = 0; i < 8; ++i) {
      const double x = c(rng), y = c(rng);
      rects.push_back({x, y, x + s(rng), y + s(rng), sc(rng)});
      quads.push_back(from_rect(rects.back()));
    }
    const auto expect = oracle::locality_nms(rects, 0.5);
    const auto got = locality_aware_nms(quads, 0.5);
    ASSERT_EQ(got.size(), expect.size()) << "trial " << trial;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_NEAR(got[i].pts[0].x, expect[i].x0, 1e-9);
      EXPECT_NEAR(got[i].pts[0].y, expect[i].y0, 1e-9);
      EXPECT_NEAR(got[i].pts[2].x, expect[i].x1, 1e-9);
      EXPECT_NEAR(got[i].pts[2].y, expect[i].y1, 1e-9);
      EXPECT_DOUBLE_EQ(got[i].score, expect[i].score);
    }
  }
}

TEST(Nms, OutputPairwiseBelowThresholdAndIdempotent) {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> c(0, 30), s(2, 12), sc(0.01, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Quad> quads;
    for (int i = 0; i < 10; ++i) {
      const double x = c(rng), y = c(rng);
      quads.push_back(Quad::axis_aligned(x, y, x + s(rng), y + s(rng), sc(rng)));
    }
    const auto once = locality_aware_nms(quads, 0.3);
    for (std::size_t i = 0; i < once.size(); ++i)
      for (std::size_t j = i + 1; j < once.size(); ++j) EXPECT_LT(iou(once[i], once[j]), 0.3);
    const auto twice = locality_aware_nms(once, 0.3);
    ASSERT_EQ(twice.size(), once.size());
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_DOUBLE_EQ(twice[i].score, once[i].score);
  }
}

TEST(Raster, RoundTripAndValidation) {
  const auto dir = s2l::testing::scratch_dir("raster");
  auto m = single_pixel_maps(5, 3, 2, 1, 0.5f, {1, 2, 3, 4, 0.25f});
  m.scale = 4;
  write_raster(dir / "m.maps", raster_from_maps(m));
  const auto back = maps_from_raster(read_raster(dir / "m.maps"));
  EXPECT_EQ(back.scale, 4);
  EXPECT_EQ(back.score.values, m.score.values);
  EXPECT_EQ(back.geo.at(2, 1).left, 4.0f);
  EXPECT_EQ(back.geo.at(2, 1).angle, 0.25f);

  Raster bad = raster_from_maps(m);
  bad.values[0] = 2.0f;
  EXPECT_THROW(maps_from_raster(bad), Error);
  bad = raster_from_maps(m);
  bad.channels = 5;
  bad.values.resize(5 * 3 * 5);
  EXPECT_THROW(maps_from_raster(bad), Error);

  std::ofstream(dir / "junk.maps") << "not a raster";
  EXPECT_THROW(read_raster(dir / "junk.maps"), Error);
  std::filesystem::remove_all(dir);
}

TEST(FixtureBackend, FindsMapsNextToImageOrInDir) {
  const auto dir = s2l::testing::scratch_dir("backend");
  const auto sign = s2l::testing::make_sign({"GOA"});
  const auto path = s2l::testing::write_sign(dir, "goa", sign);
  FixtureBackend local;
  EXPECT_EQ(local.predict(sign.image, path).score.values, sign.maps.score.values);

  const auto other = s2l::testing::scratch_dir("backend-maps");
  std::filesystem::rename(dir / "goa.png.maps", other / "goa.png.maps");
  EXPECT_THROW(local.predict(sign.image, path), Error);
  FixtureBackend remote(other);
  EXPECT_EQ(remote.predict(sign.image, path).geo.width, sign.maps.geo.width);
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(other);
}
