#include <gtest/gtest.h>

#include <random>

#include "actstyle/dissimilarity.hpp"
#include "actstyle/synth.hpp"
#include "support.hpp"

using namespace actstyle;

namespace {

std::vector<double> bracket_real_roots(const std::array<double, 3>& k) {
  auto f = [&](double x) { return ((x + k[0]) * x + k[1]) * x + k[2]; };
  std::vector<double> roots;
  const double lo = -50.0, hi = 50.0;
  const int steps = 200000;
  double prev = f(lo);
  for (int i = 1; i <= steps; ++i) {
    double a = lo + (hi - lo) * (i - 1) / steps, b = lo + (hi - lo) * i / steps;
    const double fb = f(b);
    if (prev == 0.0) {
      roots.push_back(a);
    } else if ((prev < 0) != (fb < 0) && fb != 0.0) {
      double fa = prev;
      for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if ((fa < 0) == (fm < 0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    prev = fb;
  }
  return roots;
}

double deviation_of(const Eigen::Matrix3d& m, const DissimilarityConfig& cfg = {}) {
  return homology_deviation(Homography{m}, cfg).deviation;
}

}  // namespace

TEST(Characteristic, CoefficientsOfDiagonal) {
  const auto k = characteristic_coefficients(Eigen::Vector3d(1, 2, 3).asDiagonal());
  EXPECT_DOUBLE_EQ(k[0], -6.0);
  EXPECT_DOUBLE_EQ(k[1], 11.0);
  EXPECT_DOUBLE_EQ(k[2], -6.0);
}

TEST(Cubic, AgreesWithBracketingOracle) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::array<double, 3> k = {u(rng), u(rng), u(rng)};
    const auto roots = solve_cubic(k);
    const auto oracle = bracket_real_roots(k);
    std::vector<double> real;
    for (const auto& r : roots)
      if (std::abs(r.imag()) < 1e-9) real.push_back(r.real());
    ASSERT_EQ(real.size(), oracle.size()) << "trial " << trial;
    std::sort(real.begin(), real.end());
    for (std::size_t i = 0; i < real.size(); ++i) EXPECT_NEAR(real[i], oracle[i], 1e-8);
    for (const auto& r : roots) EXPECT_LT(std::abs(((r + k[0]) * r + k[1]) * r + k[2]), 1e-8);
  }
}

TEST(Cubic, TripleRoot) {
  // (x - 2)^3
  const auto roots = solve_cubic({-6.0, 12.0, -8.0});
  for (const auto& r : roots) EXPECT_NEAR(std::abs(r - 2.0), 0.0, 1e-6);
}

TEST(Cubic, ComplexPairIsConjugate) {
  // (x - 1)(x^2 + 1)
  const auto roots = solve_cubic({-1.0, 1.0, -1.0});
  int complex_count = 0;
  for (const auto& r : roots) {
    if (std::abs(r.imag()) > 1e-12) {
      ++complex_count;
      EXPECT_NEAR(std::abs(r.imag()), 1.0, 1e-12);
      EXPECT_NEAR(r.real(), 0.0, 1e-12);
    } else {
      EXPECT_NEAR(r.real(), 1.0, 1e-12);
    }
  }
  EXPECT_EQ(complex_count, 2);
}

TEST(Eigenvalues, MatchEigenSolver) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Matrix3d m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = u(rng);
    const Eigen::Vector3cd oracle = Eigen::EigenSolver<Eigen::Matrix3d>(m).eigenvalues();
    const auto ev = eigenvalues3(m);
    for (const auto& l : ev) {
      double best = 1e9;
      for (int i = 0; i < 3; ++i) best = std::min(best, std::abs(l - oracle(i)));
      EXPECT_LT(best, 1e-7);
    }
  }
}

TEST(HomologyDeviation, IdentityIsZero) {
  const auto d = homology_deviation(Homography{}, {});
  EXPECT_TRUE(d.valid);
  EXPECT_NEAR(d.deviation, 0.0, 1e-12);
}

TEST(HomologyDeviation, PlanarHomologyIsZero) {
  EXPECT_NEAR(deviation_of(Eigen::Vector3d(2, 2, 5).asDiagonal()), 0.0, 1e-12);
  // Same homology in a different basis.
  Eigen::Matrix3d p;
  p << 1, 2, 0, 0, 1, 3, 1, 0, 1;
  const Eigen::Matrix3d h = p * Eigen::Vector3d(2, 2, 5).asDiagonal() * p.inverse();
  EXPECT_NEAR(deviation_of(h), 0.0, 1e-9);
}

TEST(HomologyDeviation, KnownRatio) {
  EXPECT_NEAR(deviation_of(Eigen::Vector3d(1, 1.3, 5).asDiagonal()), 0.3, 1e-12);
  const auto d = homology_deviation(Homography{Eigen::Vector3d(1, 1.3, 5).asDiagonal()}, {});
  EXPECT_NEAR(d.sigma_ratio.real(), 1.3, 1e-12);
  EXPECT_NEAR(d.sigma_ratio.imag(), 0.0, 1e-12);
}

TEST(HomologyDeviation, CappedAtConfiguredValue) {
  EXPECT_DOUBLE_EQ(deviation_of(Eigen::Vector3d(1, 10, 100).asDiagonal()), 2.0);
  DissimilarityConfig cfg;
  cfg.deviation_cap = 0.5;
  EXPECT_DOUBLE_EQ(deviation_of(Eigen::Vector3d(1, 1.9, 5).asDiagonal(), cfg), 0.5);
}

TEST(HomologyDeviation, RotationUsesComplexModulus) {
  // Eigenvalues 1, e^{+-i t}: the conjugate pair ratio is e^{2it}.
  const double t = 0.2;
  const Eigen::Matrix3d r = Eigen::AngleAxisd(t, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const double expected = std::min(std::abs(std::polar(1.0, t) - 1.0), std::abs(std::polar(1.0, 2 * t) - 1.0));
  EXPECT_NEAR(deviation_of(r), expected, 1e-9);
}

TEST(HomologyDeviation, ScaleAndConjugationInvariant) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
    for (int i = 0; i < 9; ++i) h(i / 3, i % 3) += 0.4 * u(rng);
    Eigen::Matrix3d p = Eigen::Matrix3d::Identity();
    for (int i = 0; i < 9; ++i) p(i / 3, i % 3) += 0.5 * u(rng);
    if (std::abs(p.determinant()) < 0.1 || std::abs(h.determinant()) < 0.1) continue;
    const double base = deviation_of(h);
    EXPECT_NEAR(deviation_of(-3.7 * h), base, 1e-9);
    EXPECT_NEAR(deviation_of(0.01 * h), base, 1e-9);
    EXPECT_NEAR(deviation_of(p * h * p.inverse()), base, 1e-7);
  }
}

TEST(HomologyDeviation, NonFiniteIsInvalid) {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  h(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(homology_deviation(Homography{h}, {}).valid);
  EXPECT_FALSE(homology_deviation(Homography{Eigen::Matrix3d::Zero()}, {}).valid);
}

TEST(CrossHomography, ComposesWithInverse) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Matrix3d a = Eigen::Matrix3d::Identity(), b = Eigen::Matrix3d::Identity();
  for (int i = 0; i < 9; ++i) {
    a(i / 3, i % 3) += 0.3 * u(rng);
    b(i / 3, i % 3) += 0.3 * u(rng);
  }
  // Inverse via the adjugate, computed by hand.
  Eigen::Matrix3d adj;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const int r1 = (c + 1) % 3, r2 = (c + 2) % 3, c1 = (r + 1) % 3, c2 = (r + 2) % 3;
      adj(r, c) = b(r1, c1) * b(r2, c2) - b(r1, c2) * b(r2, c1);
    }
  const Eigen::Matrix3d oracle = a * adj / b.determinant();
  EXPECT_LT((cross_homography(Homography{a}, Homography{b}).h - oracle).norm(), 1e-12 * oracle.norm());
}

TEST(CrossHomography, SingularSecondIsConditioningError) {
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  s(2, 2) = 0.0;
  try {
    cross_homography(Homography{}, Homography{s});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Conditioning);
  }
}

TEST(Median, OddEvenAndEmpty) {
  EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_THROW(median({}), Error);
}

namespace {

struct TwoViewMotion {
  std::vector<ImagePose> view1, view2;
  FundamentalMatrix f;
};

TwoViewMotion two_view_motion(const StyleParams& target_style, const StyleParams& reference_style) {
  const auto cams = make_camera_ring(2, 6.0, 1.5, 3);
  TwoViewMotion out;
  out.f = fundamental_from_cameras(cams[0], cams[1]);
  for (double t : {0.30, 0.40}) {
    out.view1.push_back(project_pose(cams[0], body_pose(Action::Walk, target_style, t)));
    out.view2.push_back(project_pose(cams[1], body_pose(Action::Walk, reference_style, t)));
  }
  return out;
}

}  // namespace

TEST(TransitionDissimilarity, IdenticalMotionIsZero) {
  const StyleParams style;
  const auto m = two_view_motion(style, style);
  const TransitionResult r = transition_dissimilarity({m.view1[0], m.view1[1], 0}, {m.view2[0], m.view2[1], 0}, m.f, {});
  EXPECT_TRUE(r.sufficient);
  EXPECT_GE(r.valid_count, 100);
  EXPECT_LT(r.mad, 1e-6);
}

TEST(TransitionDissimilarity, DifferentMotionIsLarger) {
  StyleParams style, wide;
  wide.leg_swing *= 2.0;
  wide.arm_swing *= 2.0;
  const auto same = two_view_motion(style, style);
  const auto diff = two_view_motion(wide, style);
  const auto r_same =
      transition_dissimilarity({same.view1[0], same.view1[1], 0}, {same.view2[0], same.view2[1], 0}, same.f, {});
  const auto r_diff =
      transition_dissimilarity({diff.view1[0], diff.view1[1], 0}, {diff.view2[0], diff.view2[1], 0}, diff.f, {});
  EXPECT_GT(r_diff.mad, r_same.mad + 1e-3);
}

TEST(TransitionDissimilarity, CountsOnlyValidTriplets) {
  const StyleParams style;
  const auto m = two_view_motion(style, style);
  const auto r = transition_dissimilarity({m.view1[0], m.view1[1], 0}, {m.view2[0], m.view2[1], 0}, m.f, {});
  int valid = 0;
  for (const auto& d : r.deviations) valid += d.valid ? 1 : 0;
  EXPECT_EQ(valid, r.valid_count);
  EXPECT_EQ(r.deviations[0].triplet, all_triplets()[0]);
  EXPECT_EQ(r.deviations[164].triplet, all_triplets()[164]);
}

TEST(TransitionDissimilarity, InsufficientGeometryThrows) {
  const StyleParams style;
  const auto m = two_view_motion(style, style);
  DissimilarityConfig cfg;
  cfg.min_valid_triplets = 166;
  try {
    transition_dissimilarity({m.view1[0], m.view1[1], 0}, {m.view2[0], m.view2[1], 0}, m.f, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientGeometry);
  }
}

TEST(TransitionDissimilarity, RejectsNonFinite) {
  const StyleParams style;
  auto m = two_view_motion(style, style);
  m.view1[0][3] = Eigen::Vector2d(std::nan(""), 0.0);
  EXPECT_THROW(transition_dissimilarity({m.view1[0], m.view1[1], 0}, {m.view2[0], m.view2[1], 0}, m.f, {}), Error);
}

TEST(TransitionDissimilarity, SimilarityPlacementKeepsZero) {
  // Same motion by a performer placed elsewhere and scaled: still a homology.
  const StyleParams style;
  const auto cams = make_camera_ring(2, 6.0, 1.5, 5);
  Similarity3 sim;
  sim.rotation = Eigen::AngleAxisd(1.1, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  sim.translation = Eigen::Vector3d(0.3, -0.2, 0.0);
  sim.scale = 1.2;
  std::array<ImagePose, 2> v1, v2;
  for (int k = 0; k < 2; ++k) {
    const double t = 0.5 + 0.1 * k;
    v1[static_cast<std::size_t>(k)] = project_pose(cams[0], sim.apply(body_pose(Action::Walk, style, t)));
    v2[static_cast<std::size_t>(k)] = project_pose(cams[1], body_pose(Action::Walk, style, t));
  }
  // F between camera 0 viewing the placed performer and camera 1 viewing the
  // original: equivalent to moving camera 0 by the inverse similarity.
  Matrix34 p0 = cams[0].projection();
  Eigen::Matrix4d s = Eigen::Matrix4d::Identity();
  s.topLeftCorner<3, 3>() = sim.scale * sim.rotation;
  s.topRightCorner<3, 1>() = sim.translation;
  const CameraModel moved(p0 * s);
  const auto f = fundamental_from_cameras(moved, cams[1]);
  const auto r = transition_dissimilarity({v1[0], v1[1], 0}, {v2[0], v2[1], 0}, f, {});
  EXPECT_LT(r.mad, 1e-6);
}
