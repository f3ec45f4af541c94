#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "handcloud/fusion.hpp"
#include "handcloud/metrics.hpp"
#include "handcloud/templates.hpp"
#include "oracles.hpp"

using namespace handcloud;

namespace {

CameraModel front_camera(int w = 640, int h = 480) {
  CameraModel cam;
  cam.fx = cam.fy = 600;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  cam.width = w;
  cam.height = h;
  return cam;
}

struct HandRig {
  PointCloud dense;
  std::vector<DepthMap> maps;
};

const HandRig& hand_rig() {
  static const HandRig rig = [] {
    HandRig r;
    r.dense = sample_mesh_surface(hand_surface_mesh(), 200000, 1);
    for (const auto& cam : ring_rig(centroid(r.dense.points), 400.0)) r.maps.push_back(render_depth(r.dense.points, cam));
    return r;
  }();
  return rig;
}

}  // namespace

TEST(SegmentDepth, Examples) {
  DepthMap map(front_camera(4, 2));
  map.depth = {300, 400, 500, 2000, 0, 250, 700, 699};
  EXPECT_EQ(segment_depth(map, 200, 2500).depth, map.depth);
  std::fill(map.depth.begin(), map.depth.end(), 2000.0);
  EXPECT_EQ(segment_depth(map, 200, 700).valid_count(), 0u);
  map.depth = {300, 400, 500, 2000, 0, 250, 700, 699};
  const std::size_t expect = static_cast<std::size_t>(
      std::count_if(map.depth.begin(), map.depth.end(), [](double d) { return d >= 260 && d <= 699.5; }));
  EXPECT_EQ(segment_depth(map, 260, 699.5).valid_count(), expect);
  EXPECT_THROW(segment_depth(map, 500, 400), Error);
}

TEST(Backproject, PrincipalRayAndUnitTangent) {
  const CameraModel cam = front_camera();
  DepthMap map(cam);
  map.at(320, 240) = 400;
  PointCloud c = backproject(map);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.points[0], (Point3{0, 0, 400}));
  map.at(320, 240) = 0;
  EXPECT_THROW(backproject(map), Error);
  DepthMap wide(front_camera(1280, 480));
  wide.camera.cx = 320;
  wide.at(920, 240) = 400;
  c = backproject(wide);
  EXPECT_NEAR(c.points[0].x, 400.0, 1e-12);
  EXPECT_NEAR(c.points[0].z, 400.0, 1e-12);
}

TEST(Backproject, RenderRoundTrip) {
  // height field in front of the camera, free of self-occlusion
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-80, 80);
  std::vector<Point3> pts;
  for (int i = 0; i < 300000; ++i) {
    const double x = u(gen), y = u(gen);
    pts.push_back({x, y, 400 + 20 * std::sin(x / 20) * std::cos(y / 25)});
  }
  const PointCloud back = backproject(render_depth(pts, front_camera()));
  EXPECT_LT(chamfer_distance(PointCloud(pts), back), 1.0);
}

TEST(MergeViews, Cardinality) {
  std::mt19937_64 gen(2);
  const PointCloud a(oracle::random_points(10, gen)), b(oracle::random_points(20, gen));
  const std::vector<PointCloud> one = {a};
  EXPECT_TRUE(merge_views(one) == a);
  const std::vector<PointCloud> two = {a, b};
  EXPECT_EQ(merge_views(two).size(), 30u);
  const std::vector<PointCloud> none = {PointCloud{}, PointCloud{}};
  EXPECT_THROW(merge_views(none), Error);
}

TEST(MergeViews, FourViewsBeatAnySingleView) {
  const HandRig& rig = hand_rig();
  const PointCloud truth = sample_mesh_surface(hand_surface_mesh(), 20000, 2);
  std::vector<PointCloud> views;
  for (const auto& m : rig.maps) views.push_back(backproject(m));
  const double merged = chamfer_distance(truth, merge_views(views));
  for (const auto& v : views) EXPECT_LT(merged, chamfer_distance(truth, v));
}

TEST(RemoveOutliers, FarPointRemoved) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Point3> pts;
  while (pts.size() < 100) {
    const Point3 p{n(gen) * 4, n(gen) * 4, n(gen) * 4};
    if (norm(p) <= 10.0) pts.push_back(p);
  }
  pts.push_back({500, 0, 0});
  const PointCloud out = remove_outliers(PointCloud(pts), 8, 2.0);
  EXPECT_EQ(out.size(), 100u);
  for (const auto& p : out.points) EXPECT_LT(norm(p), 11.0);
}

namespace {

// Mean fraction removed at alpha = 3 over 20 clusters of 2000 points.
double removal_rate(bool gaussian) {
  double total = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::mt19937_64 gen(s);
    std::normal_distribution<double> n(0.0, 5.0);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::vector<Point3> pts;
    while (pts.size() < 2000) {
      const Point3 p = gaussian ? Point3{n(gen), n(gen), n(gen)} : Point3{u(gen), u(gen), u(gen)};
      if (gaussian || norm(p) <= 10.0) pts.push_back(p);
    }
    total += 1.0 - static_cast<double>(remove_outliers(PointCloud(pts), 8, 3.0).size()) / 2000.0;
  }
  return total / 20.0;
}

}  // namespace

TEST(RemoveOutliers, TightClusterMostlyKept) { EXPECT_LT(removal_rate(false), 0.01); }

// The mean-kNN rule trims the sparse Gaussian tail harder (about 2%).
TEST(RemoveOutliers, GaussianClusterMostlyKept) { EXPECT_LT(removal_rate(true), 0.03); }

TEST(RemoveOutliers, NeverRemovesHalfOnHandViews) {
  for (const auto& m : hand_rig().maps) {
    const PointCloud v = backproject(m);
    EXPECT_GT(remove_outliers(v, 8, 1.0).size(), v.size() / 2);
  }
}

TEST(RemoveOutliers, Errors) {
  const PointCloud tiny(std::vector<Point3>{{0, 0, 0}, {1, 0, 0}});
  EXPECT_THROW(remove_outliers(tiny, 2, 2.0), Error);
}

TEST(BalanceDensity, CoincidentPointsBecomeMidpoint) {
  const PointCloud c(std::vector<Point3>{{0.5, 0.5, 0.5}, {1.5, 1.5, 1.5}});
  const PointCloud out = balance_density(c, 3.0, 100, 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.points[0], (Point3{1, 1, 1}));
}

TEST(BalanceDensity, OnePerVoxelUnchangedCount) {
  std::vector<Point3> pts;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) pts.push_back({i * 3.0 + 1.5, j * 3.0 + 1.5, 1.5});
  EXPECT_EQ(balance_density(PointCloud(pts), 3.0, 100, 0).size(), 25u);
  EXPECT_EQ(balance_density(PointCloud(pts), 3.0, 10, 0).size(), 10u);
}

TEST(BalanceDensity, MajorityLabel) {
  const PointCloud c({{0.1, 0.1, 0.1}, {0.2, 0.2, 0.2}, {0.3, 0.3, 0.3}},
                     {ComponentId::Thumb, ComponentId::Ring, ComponentId::Ring});
  EXPECT_EQ(balance_density(c, 1.0, 10, 0).label(0), ComponentId::Ring);
}

TEST(BalanceDensity, EqualizesOverlapDensity) {
  // one strip sampled once, the other twice (two overlapping views)
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0, 60);
  std::vector<Point3> pts;
  for (int i = 0; i < 4000; ++i) pts.push_back({u(gen), u(gen), 0});
  for (int i = 0; i < 8000; ++i) pts.push_back({u(gen) + 100, u(gen), 0});
  const PointCloud out = balance_density(PointCloud(pts), 3.0, 100000, 0);
  const auto mean = mean_neighbor_distance(out, 8);
  double single = 0, overlap = 0;
  std::size_t ns = 0, no = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out.points[i].x;
    if (x > 10 && x < 50) { single += mean[i]; ++ns; }
    if (x > 110 && x < 150) { overlap += mean[i]; ++no; }
  }
  const double ratio = (single / ns) / (overlap / no);
  EXPECT_LT(ratio, 2.0);
  EXPECT_GT(ratio, 0.5);
}

TEST(Fuse, ExactTargetCountAndDeterminism) {
  FusionConfig cfg;
  cfg.seed = 9;
  const PointCloud a = fuse(hand_rig().maps, cfg);
  EXPECT_EQ(a.size(), 1038u);
  EXPECT_TRUE(a == fuse(hand_rig().maps, cfg));
  cfg.seed = 10;
  EXPECT_FALSE(a == fuse(hand_rig().maps, cfg));
}

TEST(Fuse, DroppingAViewHurts) {
  const PointCloud truth = sample_mesh_surface(hand_surface_mesh(), 20000, 3);
  FusionConfig cfg;
  cfg.voxel_size = 1.5;
  cfg.target_points = 1000000;
  const double all = chamfer_distance(truth, fuse(hand_rig().maps, cfg));
  for (std::size_t drop = 0; drop < 4; ++drop) {
    std::vector<DepthMap> three;
    for (std::size_t k = 0; k < 4; ++k)
      if (k != drop) three.push_back(hand_rig().maps[k]);
    EXPECT_GT(chamfer_distance(truth, fuse(three, cfg)), all);
  }
}

TEST(Fuse, ConfigValidation) {
  FusionConfig cfg;
  cfg.near = 900;
  EXPECT_THROW(fuse(hand_rig().maps, cfg), Error);
  EXPECT_THROW(fuse(std::vector<DepthMap>{}, FusionConfig{}), Error);
}

TEST(RenderDepth, NearestSurfaceWins) {
  const CameraModel cam = front_camera();
  const DepthMap m = render_depth({{0, 0, 500}, {0, 0, 400}, {0, 0, -10}}, cam);
  EXPECT_EQ(m.at(320, 240), 400.0);
  EXPECT_EQ(m.valid_count(), 1u);
}

TEST(RingRig, CamerasAreValidAndSeeTheCenter) {
  const Point3 c{10, -5, 3};
  for (const auto& cam : ring_rig(c, 300.0)) {
    EXPECT_NO_THROW(cam.validate());
    const Point3 pc = cam.world_to_camera(c);
    EXPECT_NEAR(pc.z, 300.0, 1e-9);
    EXPECT_NEAR(pc.x, 0.0, 1e-9);
    EXPECT_NEAR(pc.y, 0.0, 1e-9);
  }
}
