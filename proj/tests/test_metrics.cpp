#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "handcloud/metrics.hpp"
#include "oracles.hpp"

using namespace handcloud;

namespace {

PointCloud two_point(Point3 a, Point3 b) { return PointCloud(std::vector<Point3>{a, b}); }

}  // namespace

TEST(Chamfer, IdenticalCloudsAreZero) {
  std::mt19937_64 gen(1);
  const PointCloud c(oracle::random_points(40, gen));
  EXPECT_EQ(chamfer_distance(c, c), 0.0);
}

TEST(Chamfer, TwoPointExample) {
  EXPECT_DOUBLE_EQ(chamfer_distance(two_point({0, 0, 0}, {1, 0, 0}), two_point({0, 0, 0}, {0, 1, 0})), 1.0);
}

TEST(Chamfer, MatchesBruteForce) {
  std::mt19937_64 gen(2);
  for (int t = 0; t < 50; ++t) {
    std::uniform_int_distribution<std::size_t> n(1, 64);
    const PointCloud a(oracle::random_points(n(gen), gen)), b(oracle::random_points(n(gen), gen));
    EXPECT_NEAR(chamfer_distance(a, b), oracle::brute_chamfer(a.points, b.points), 1e-12);
  }
}

TEST(Chamfer, SymmetricExactly) {
  std::mt19937_64 gen(3);
  const PointCloud a(oracle::random_points(300, gen)), b(oracle::random_points(200, gen));
  EXPECT_EQ(chamfer_distance(a, b), chamfer_distance(b, a));
}

TEST(Chamfer, EmptyIsAnError) {
  EXPECT_THROW(chamfer_distance(PointCloud{}, two_point({0, 0, 0}, {1, 1, 1})), Error);
}

TEST(Assignment, ZeroDiagonal) {
  const CostMatrix c{2, 2, {0, 1, 1, 0}};
  const Assignment a = solve_assignment(c);
  EXPECT_EQ(a.mapping, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(a.total_cost, 0.0);
}

TEST(Assignment, TwoByTwo) {
  const Assignment a = solve_assignment(CostMatrix{2, 2, {1, 2, 3, 1}});
  EXPECT_DOUBLE_EQ(a.total_cost, 2.0);
}

TEST(Assignment, RejectsBadMatrices) {
  EXPECT_THROW(solve_assignment(CostMatrix{2, 3, std::vector<double>(6, 1.0)}), Error);
  EXPECT_THROW(solve_assignment(CostMatrix{2, 2, {1, NAN, 0, 0}}), Error);
  EXPECT_THROW(solve_assignment(CostMatrix{2, 2, {1, 2, 3}}), Error);
}

TEST(Assignment, MatchesPermutationOracle) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0, 10);
  std::uniform_int_distribution<int> small(0, 3);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + t % 7;
    std::vector<std::vector<double>> rows(n, std::vector<double>(n));
    CostMatrix c(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        // every third matrix uses small integers, which creates many ties
        rows[i][j] = t % 3 == 0 ? small(gen) : u(gen);
        c(i, j) = rows[i][j];
      }
    const Assignment a = solve_assignment(c);
    EXPECT_NEAR(a.total_cost, oracle::permutation_min(rows), 1e-9);
    std::vector<bool> used(n, false);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_LT(a.mapping[i], n);
      EXPECT_FALSE(used[a.mapping[i]]);
      used[a.mapping[i]] = true;
      s += rows[i][a.mapping[i]];
    }
    EXPECT_NEAR(s, a.total_cost, 1e-12);
  }
}

TEST(Assignment, WarmStartGivesSameOptimum) {
  std::mt19937_64 gen(5);
  const auto gt = oracle::random_points(200, gen);
  auto pred = oracle::random_points(200, gen);
  AssignmentWarmStart warm;
  std::normal_distribution<double> jitter(0.0, 0.02);
  for (int round = 0; round < 5; ++round) {
    const CostMatrix c = pairwise_distances(pred, gt);
    const double cold = solve_assignment(c).total_cost;
    const double hot = solve_assignment(c, &warm).total_cost;
    EXPECT_NEAR(cold, hot, 1e-9 * cold);
    for (auto& p : pred) p = p + Point3{jitter(gen), jitter(gen), jitter(gen)};
  }
}

TEST(Assignment, StaleWarmStartOfWrongSizeIsIgnored) {
  AssignmentWarmStart warm;
  warm.column_potentials = {1.0, 2.0, 3.0};
  warm.mapping = {2, 1, 0};
  const Assignment a = solve_assignment(CostMatrix{2, 2, {1, 2, 3, 1}}, &warm);
  EXPECT_DOUBLE_EQ(a.total_cost, 2.0);
  EXPECT_EQ(warm.mapping.size(), 2u);
}

TEST(Assignment, AuctionCertifiesItsGap) {
  std::mt19937_64 gen(6);
  for (int t = 0; t < 5; ++t) {
    const auto a = oracle::random_points(300, gen), b = oracle::random_points(300, gen);
    const CostMatrix c = pairwise_distances(a, b);
    const double exact = solve_assignment(c).total_cost;
    const ApproximateAssignment approx = solve_assignment_auction(c);
    EXPECT_LE(approx.relative_gap, 1e-3);
    EXPECT_LE(approx.lower_bound, exact + 1e-9);
    EXPECT_GE(approx.assignment.total_cost, exact - 1e-9);
    EXPECT_LE((approx.assignment.total_cost - exact) / exact, 1e-3);
  }
}

TEST(Emd, IdenticalCloudsAreZero) {
  std::mt19937_64 gen(7);
  const PointCloud c(oracle::random_points(30, gen));
  const auto [value, a] = earth_movers_distance(c, c);
  EXPECT_EQ(value, 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(a.mapping[i], i);
}

TEST(Emd, TwoPointExample) {
  const double v = earth_movers_distance(two_point({0, 0, 0}, {1, 0, 0}), two_point({0, 0, 0}, {0, 1, 0})).first;
  EXPECT_NEAR(v, std::sqrt(2.0), 1e-15);
}

TEST(Emd, UnequalCardinalityIsAnError) {
  try {
    earth_movers_distance(two_point({0, 0, 0}, {1, 0, 0}), PointCloud(std::vector<Point3>{{0, 0, 0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()), "EMD requires equal cardinality");
  }
}

TEST(Emd, MatchesPermutationOracle) {
  std::mt19937_64 gen(8);
  for (int t = 0; t < 20; ++t) {
    const PointCloud a(oracle::random_points(8, gen)), b(oracle::random_points(8, gen));
    EXPECT_NEAR(earth_movers_distance(a, b).first, oracle::permutation_emd(a.points, b.points), 1e-9);
  }
}

TEST(Emd, ZeroOnlyForEqualMultisets) {
  std::mt19937_64 gen(9);
  const auto pts = oracle::random_points(20, gen);
  auto shuffled = pts;
  std::shuffle(shuffled.begin(), shuffled.end(), gen);
  EXPECT_NEAR(earth_movers_distance(PointCloud(pts), PointCloud(shuffled)).first, 0.0, 1e-12);
  shuffled[0].x += 1e-3;
  EXPECT_GT(earth_movers_distance(PointCloud(pts), PointCloud(shuffled)).first, 0.0);
}

TEST(Metrics, RigidInvariance) {
  std::mt19937_64 gen(10);
  const PointCloud a(oracle::random_points(60, gen, 50.0)), b(oracle::random_points(60, gen, 50.0));
  const auto T = RigidTransform::axis_angle({1, 2, 3}, 0.7, {100, -40, 12});
  const PointCloud ta = transform(a, T), tb = transform(b, T);
  EXPECT_NEAR(chamfer_distance(a, b), chamfer_distance(ta, tb), 1e-9);
  EXPECT_NEAR(earth_movers_distance(a, b).first, earth_movers_distance(ta, tb).first, 1e-9);
}

TEST(CombinedLoss, IdenticalCloudsAreZero) {
  std::mt19937_64 gen(11);
  const PointCloud c(oracle::random_points(60, gen), oracle::random_labels(60, gen));
  const LossBreakdown b = combined_loss(c, c);
  EXPECT_EQ(b.total, 0.0);
  EXPECT_EQ(b.cd_global, 0.0);
  EXPECT_EQ(b.emd_global, 0.0);
}

TEST(CombinedLoss, SingleComponentCountsTwice) {
  std::mt19937_64 gen(12);
  const auto pa = oracle::random_points(20, gen), pb = oracle::random_points(20, gen);
  const std::vector<ComponentId> palm(20, ComponentId::Palm);
  const PointCloud a(pa, palm), b(pb, palm);
  const double cd = oracle::brute_chamfer(pa, pb);
  const double emd = earth_movers_distance(a, b).first;
  const LossBreakdown l = combined_loss(a, b);
  EXPECT_NEAR(l.total, 2.0 * (cd + emd), 1e-9);
  EXPECT_NEAR(l.cd_local[0], l.cd_global, 1e-12);
}

TEST(CombinedLoss, TwoComponentToy) {
  // palm: {(0,0,0),(1,0,0)} vs {(0,0,0),(0,1,0)}; thumb: {(5,0,0)} vs {(5,0,2)}
  const PointCloud gt({{0, 0, 0}, {1, 0, 0}, {5, 0, 0}}, {ComponentId::Palm, ComponentId::Palm, ComponentId::Thumb});
  const PointCloud pred({{0, 0, 0}, {5, 0, 2}, {0, 1, 0}}, {ComponentId::Palm, ComponentId::Thumb, ComponentId::Palm});
  const LossBreakdown l = combined_loss(gt, pred);
  EXPECT_NEAR(l.cd_local[0], 1.0, 1e-12);
  EXPECT_NEAR(l.emd_local[0], std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(l.cd_local[1], 8.0, 1e-12);
  EXPECT_NEAR(l.emd_local[1], 2.0, 1e-12);
  EXPECT_NEAR(l.cd_global, oracle::brute_chamfer(gt.points, pred.points), 1e-12);
  EXPECT_NEAR(l.emd_global, oracle::permutation_emd(gt.points, pred.points), 1e-12);
  EXPECT_NEAR(l.total, 1.0 + std::sqrt(2.0) + 8.0 + 2.0 + l.cd_global + l.emd_global, 1e-9);
}

TEST(CombinedLoss, Errors) {
  const PointCloud unlabeled(std::vector<Point3>{{0, 0, 0}});
  EXPECT_THROW(combined_loss(unlabeled, unlabeled), Error);
  const PointCloud a({{0, 0, 0}, {1, 0, 0}}, {ComponentId::Palm, ComponentId::Palm});
  const PointCloud b({{0, 0, 0}, {1, 0, 0}}, {ComponentId::Palm, ComponentId::Thumb});
  EXPECT_THROW(combined_loss(a, b), Error);
  EXPECT_NO_THROW(combined_loss(a, b, LossMode::GlobalOnly));
}

TEST(CombinedLoss, AuctionSolverStaysWithinGap) {
  std::mt19937_64 gen(13);
  const PointCloud a(oracle::random_points(200, gen)), b(oracle::random_points(200, gen));
  const double exact = combined_loss(a, b, LossMode::GlobalOnly).emd_global;
  const double approx = combined_loss(a, b, LossMode::GlobalOnly, EmdSolver::Auction).emd_global;
  EXPECT_GE(approx, exact - 1e-9);
  EXPECT_LE(approx, exact * (1.0 + 1e-3));
}

TEST(Pose, Mpjpe) {
  HandPose gt{};
  std::mt19937_64 gen(14);
  const auto pts = oracle::random_points(kJointCount, gen, 100.0);
  std::copy(pts.begin(), pts.end(), gt.begin());
  HandPose pred = gt;
  EXPECT_EQ(mpjpe(pred, gt), 0.0);
  for (auto& p : pred) p = p + Point3{3, 0, 4};
  EXPECT_DOUBLE_EQ(mpjpe(pred, gt), 5.0);

  const auto noise = oracle::random_points(kJointCount, gen, 5.0);
  double expect = 0.0;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    pred[j] = gt[j] + noise[j];
    expect += std::sqrt(oracle::sq(pred[j], gt[j]));
  }
  EXPECT_NEAR(mpjpe(pred, gt), expect / kJointCount, 1e-12);
}

TEST(Pose, PckExamples) {
  const std::vector<double> zeros(10, 0.0), thresholds = {0, 10, 20};
  for (double v : pck_curve(zeros, thresholds).values) EXPECT_EQ(v, 1.0);
  const std::vector<double> errs = {5, 15, 25}, t20 = {10, 20};
  EXPECT_DOUBLE_EQ(pck_curve(errs, t20).values[1], 2.0 / 3.0);
  const std::vector<double> edge = {20.0}, te = {19.999, 20.0};
  EXPECT_EQ(pck_curve(edge, te).values[1], 1.0);
  EXPECT_THROW(pck_curve(std::vector<double>{}, thresholds), Error);
  const std::vector<double> bad = {10, 10};
  EXPECT_THROW(pck_curve(errs, bad), Error);
}

TEST(Pose, PckMonotone) {
  std::mt19937_64 gen(15);
  std::exponential_distribution<double> e(0.05);
  std::vector<double> thresholds;
  for (int t = 0; t <= 50; ++t) thresholds.push_back(t);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> errs(63);
    for (auto& x : errs) x = e(gen);
    const PckCurve c = pck_curve(errs, thresholds);
    for (std::size_t i = 1; i < c.values.size(); ++i) EXPECT_GE(c.values[i], c.values[i - 1]);
  }
}

TEST(Pose, AucExamples) {
  EXPECT_DOUBLE_EQ(auc({{0, 10, 30}, {1, 1, 1}}), 1.0);
  EXPECT_DOUBLE_EQ(auc({{0, 50}, {0, 1}}), 0.5);
  // trapezoids: (0.2+0.4)/2*10 + (0.4+1.0)/2*30 = 3 + 21 = 24, span 40
  EXPECT_DOUBLE_EQ(auc({{10, 20, 50}, {0.2, 0.4, 1.0}}), 24.0 / 40.0);
  EXPECT_THROW(auc({{10}, {1}}), Error);
}

namespace {

CameraModel test_camera() {
  CameraModel cam;
  cam.fx = cam.fy = 600;
  cam.cx = 320;
  cam.cy = 240;
  cam.width = 640;
  cam.height = 480;
  return cam;
}

}  // namespace

TEST(SurfaceProject, OcclusionOnOneRay) {
  const CameraModel cam = test_camera();
  const PointCloud c(std::vector<Point3>{{10, 5, 500}, {8, 4, 400}});
  const PointCloud out = surface_project(c, cam);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out.points[0].z, 400.0, 1e-12);
}

TEST(SurfaceProject, SinglePointAlwaysKept) {
  const PointCloud c(std::vector<Point3>{{-30, 20, 350}});
  EXPECT_EQ(surface_project(c, test_camera()).size(), 1u);
}

TEST(SurfaceProject, OutputIsInCameraFrame) {
  CameraModel cam = test_camera();
  cam.extrinsic = RigidTransform::look_at({0, 0, -400}, {0, 0, 0}, {0, -1, 0});
  const PointCloud out = surface_project(PointCloud(std::vector<Point3>{{0, 0, 0}}), cam);
  EXPECT_NEAR(out.points[0].z, 400.0, 1e-9);
}

TEST(SurfaceProject, OutsideFrustumIsAnError) {
  try {
    surface_project(PointCloud(std::vector<Point3>{{0, 0, -100}}), test_camera());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()), "cloud outside frustum");
  }
}

TEST(SurfaceProject, SphereKeepsFacingHemisphere) {
  const CameraModel cam = test_camera();
  const Point3 center{0, 0, 400};
  const double r = 50;
  std::mt19937_64 gen(16);
  std::normal_distribution<double> nd;
  std::vector<Point3> pts;
  for (int i = 0; i < 20000; ++i) {
    const Point3 d = normalized(Point3{nd(gen), nd(gen), nd(gen)});
    pts.push_back(center + d * r);
  }
  const PointCloud out = surface_project(PointCloud(pts), cam, {128, 96}, 10.0);
  ASSERT_GT(out.size(), 100u);
  std::size_t facing = 0;
  for (const auto& p : out.points) {
    const Point3 n = (p - center) / r;
    if (dot(n, normalized(p)) < 0.0) ++facing;
  }
  EXPECT_GE(static_cast<double>(facing) / out.size(), 0.95);
}
