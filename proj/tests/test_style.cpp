#include <gtest/gtest.h>

#include <random>

#include "actstyle/style.hpp"

using namespace actstyle;

namespace {

StyleVector vec(std::initializer_list<double> v) {
  StyleVector s;
  s.x.resize(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) s.x(i++) = x;
  return s;
}

std::vector<StyleVector> random_samples(std::mt19937_64& rng, int n, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<StyleVector> out;
  for (int i = 0; i < n; ++i) {
    StyleVector s{Eigen::VectorXd(d)};
    for (int k = 0; k < d; ++k) s.x(k) = g(rng) * (1.0 + k);  // anisotropic
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(Labels, ParseAndFormat) {
  EXPECT_EQ(parse_label("female"), Label::Female);
  EXPECT_EQ(parse_label("male"), Label::Male);
  EXPECT_EQ(to_string(Label::Male), "male");
  EXPECT_EQ(other(Label::Female), Label::Male);
  EXPECT_THROW(parse_label("unknown"), Error);
}

TEST(Knn, KRule) {
  EXPECT_EQ(knn_k(25), 5);
  EXPECT_EQ(knn_k(16), 5);  // sqrt = 4, equidistant from 3 and 5
  EXPECT_EQ(knn_k(1), 1);
  EXPECT_EQ(knn_k(2), 1);
  EXPECT_EQ(knn_k(4), 3);   // tie between 1 and 3 goes up
  EXPECT_EQ(knn_k(9), 3);
  EXPECT_EQ(knn_k(36), 7);  // sqrt = 6, tie goes up
  EXPECT_EQ(knn_k(48), 7);
  EXPECT_THROW(knn_k(0), Error);
}

TEST(Knn, MajorityVote) {
  std::vector<LabeledProjection> train;
  auto add = [&](double x, Label l) { train.push_back({StyleProjection{Eigen::VectorXd::Constant(1, x)}, l}); };
  add(0.0, Label::Female);
  add(0.1, Label::Female);
  add(0.2, Label::Male);
  add(5.0, Label::Male);
  add(5.1, Label::Male);
  const StyleProjection q{Eigen::VectorXd::Constant(1, 0.05)};
  EXPECT_EQ(knn_classify(q, train, 3), Label::Female);
  EXPECT_EQ(knn_classify(q, train, 5), Label::Male);
  EXPECT_EQ(knn_classify(q, train, 1), Label::Female);
  // Even override with a tie falls back to the nearest neighbour.
  EXPECT_EQ(knn_classify(StyleProjection{Eigen::VectorXd::Constant(1, 0.16)}, train, 2), Label::Male);
}

TEST(Knn, DimensionMismatchThrows) {
  std::vector<LabeledProjection> train = {{StyleProjection{Eigen::VectorXd::Zero(2)}, Label::Male}};
  EXPECT_THROW(knn_classify(StyleProjection{Eigen::VectorXd::Zero(3)}, train), Error);
}

TEST(Lda, OneDimensionalThreshold) {
  const std::vector<StyleVector> x = {vec({0}), vec({1}), vec({10}), vec({11})};
  const std::vector<Label> y = {Label::Female, Label::Female, Label::Male, Label::Male};
  const LdaModel m = fit_lda(x, y);
  EXPECT_NEAR(m.projected_mean_female / m.w(0), 0.5, 1e-9);
  EXPECT_NEAR(m.projected_mean_male / m.w(0), 10.5, 1e-9);
  EXPECT_NEAR(m.c / m.w(0), 5.5, 1e-9);
  EXPECT_EQ(lda_classify(vec({5.0}), m), Label::Female);
  EXPECT_EQ(lda_classify(vec({6.0}), m), Label::Male);
  EXPECT_EQ(lda_classify(vec({-100.0}), m), Label::Female);
}

TEST(Lda, IsotropicScatterGivesMeanDifferenceDirection) {
  // Within-class scatter proportional to the identity.
  const std::vector<StyleVector> x = {vec({1, 0}), vec({-1, 0}), vec({0, 1}), vec({0, -1}),
                                      vec({4, 3}), vec({2, 3}),  vec({3, 4}), vec({3, 2})};
  const std::vector<Label> y(8, Label::Female);
  std::vector<Label> labels = y;
  for (int i = 4; i < 8; ++i) labels[static_cast<std::size_t>(i)] = Label::Male;
  const LdaModel m = fit_lda(x, labels, {0.0});
  const Eigen::Vector2d dir = m.w.normalized();
  const Eigen::Vector2d expected = Eigen::Vector2d(-3, -3).normalized();
  EXPECT_NEAR(std::abs(dir.dot(expected)), 1.0, 1e-12);
}

TEST(Lda, LabelSwapFlipsDirectionNotDecisions) {
  std::mt19937_64 rng(71);
  auto x = random_samples(rng, 20, 5);
  std::vector<Label> y;
  for (int i = 0; i < 20; ++i) {
    y.push_back(i < 10 ? Label::Female : Label::Male);
    if (i >= 10) x[static_cast<std::size_t>(i)].x(0) += 6.0;
  }
  std::vector<Label> swapped;
  for (auto l : y) swapped.push_back(other(l));
  const LdaModel a = fit_lda(x, y), b = fit_lda(x, swapped);
  EXPECT_NEAR(a.w.normalized().dot(b.w.normalized()), -1.0, 1e-9);
  for (const auto& s : x) EXPECT_EQ(lda_classify(s, a), other(lda_classify(s, b)));
}

TEST(Lda, ScalingInvarianceWithoutRidge) {
  std::mt19937_64 rng(73);
  auto x = random_samples(rng, 30, 4);
  std::vector<Label> y;
  for (int i = 0; i < 30; ++i) {
    y.push_back(i % 2 ? Label::Male : Label::Female);
    if (i % 2) x[static_cast<std::size_t>(i)].x(1) += 2.0;
  }
  const Eigen::Vector4d scale(2.0, 0.5, 10.0, 3.0);
  auto scaled = x;
  for (auto& s : scaled) s.x = s.x.cwiseProduct(scale);
  const LdaModel a = fit_lda(x, y, {0.0}), b = fit_lda(scaled, y, {0.0});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(lda_classify(x[i], a), lda_classify(scaled[i], b));
}

TEST(Lda, RidgeHandlesMoreDimensionsThanSamples) {
  std::mt19937_64 rng(79);
  auto x = random_samples(rng, 8, 50);
  std::vector<Label> y;
  for (int i = 0; i < 8; ++i) {
    y.push_back(i < 4 ? Label::Female : Label::Male);
    if (i >= 4) x[static_cast<std::size_t>(i)].x(3) += 10.0;
  }
  const LdaModel m = fit_lda(x, y);
  EXPECT_GT(m.ridge, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(lda_classify(x[i], m), y[i]);
  // Without a ridge the scatter is singular.
  EXPECT_THROW(fit_lda(x, y, {0.0}), Error);
}

TEST(Lda, RidgeMatchesDenseSolve) {
  std::mt19937_64 rng(83);
  auto x = random_samples(rng, 10, 6);
  std::vector<Label> y;
  for (int i = 0; i < 10; ++i) y.push_back(i < 5 ? Label::Female : Label::Male);
  const LdaModel m = fit_lda(x, y, {1e-2});
  Eigen::VectorXd m0 = Eigen::VectorXd::Zero(6), m1 = Eigen::VectorXd::Zero(6);
  for (int i = 0; i < 10; ++i) (i < 5 ? m0 : m1) += x[static_cast<std::size_t>(i)].x / 5.0;
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd c = x[static_cast<std::size_t>(i)].x - (i < 5 ? m0 : m1);
    sw += c * c.transpose();
  }
  const double lambda = 1e-2 * sw.trace() / 6.0;
  EXPECT_NEAR(m.ridge, lambda, 1e-12 * lambda);
  const Eigen::VectorXd w = (sw + lambda * Eigen::MatrixXd::Identity(6, 6)).ldlt().solve(m0 - m1);
  EXPECT_LT((m.w - w).norm(), 1e-9 * w.norm());
}

TEST(Lda, MissingClassAndCoincidentMeans) {
  const std::vector<StyleVector> x = {vec({0}), vec({1})};
  try {
    fit_lda(x, std::vector<Label>{Label::Male, Label::Male});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingClass);
  }
  const std::vector<StyleVector> same = {vec({0}), vec({2}), vec({1}), vec({1})};
  const std::vector<Label> y = {Label::Female, Label::Female, Label::Male, Label::Male};
  try {
    fit_lda(same, y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateSeparation);
  }
}

TEST(Pca, PointsOnALine) {
  std::vector<StyleVector> x;
  for (int i = 0; i < 6; ++i) x.push_back(vec({1.0 + i, 2.0 + 2.0 * i, -1.0 * i}));
  const EigenstyleModel m = fit_pca(x, 2);
  EXPECT_EQ(m.d_prime, 1);
  EXPECT_TRUE(m.clamped());
  const Eigen::Vector3d expected = Eigen::Vector3d(1, 2, -1).normalized();
  EXPECT_NEAR(std::abs(m.basis.col(0).dot(expected)), 1.0, 1e-12);
  EXPECT_NEAR(m.reconstruction_error, 0.0, 1e-18);
  for (const auto& s : x) EXPECT_LT((pca_reconstruct(pca_project(s, m), m).x - s.x).norm(), 1e-12);
}

TEST(Pca, SymmetricPairOnlyNeedsOneAxis) {
  const Eigen::Vector3d u(0.3, -0.4, 1.2);
  const std::vector<StyleVector> x = {StyleVector{u}, StyleVector{-u}};
  const EigenstyleModel m = fit_pca(x, 3);
  EXPECT_EQ(m.d_prime, 1);
  EXPECT_LT(m.mean.norm(), 1e-15);
  EXPECT_NEAR(std::abs(m.basis.col(0).dot(u.normalized())), 1.0, 1e-12);
  EXPECT_NEAR(m.eigenvalues(0), 2.0 * u.squaredNorm(), 1e-12);
}

TEST(Pca, OrthonormalBasisAndMonotoneError) {
  std::mt19937_64 rng(89);
  const auto x = random_samples(rng, 12, 40);
  const EigenstyleModel m = fit_pca(x, 11);
  EXPECT_EQ(m.d_prime, 11);
  EXPECT_LT((m.basis.transpose() * m.basis - Eigen::MatrixXd::Identity(11, 11)).norm(), 1e-10);
  for (int i = 1; i < m.eigenvalues.size(); ++i) EXPECT_GE(m.eigenvalues(i - 1), m.eigenvalues(i));
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 11; ++k) {
    const EigenstyleModel t = m.truncated(k);
    const Eigen::MatrixXd centered = [&] {
      Eigen::MatrixXd c(12, 40);
      for (int i = 0; i < 12; ++i) c.row(i) = (x[static_cast<std::size_t>(i)].x - t.mean).transpose();
      return c;
    }();
    const double direct = (centered - centered * t.basis * t.basis.transpose()).squaredNorm();
    EXPECT_NEAR(t.reconstruction_error, direct, 1e-8 * std::max(1.0, direct));
    EXPECT_LE(t.reconstruction_error, previous + 1e-9);
    previous = t.reconstruction_error;
  }
  EXPECT_NEAR(previous, 0.0, 1e-8);  // rank 11 explains everything
}

TEST(Pca, MatchesCovarianceEigenvectors) {
  std::mt19937_64 rng(97);
  const auto x = random_samples(rng, 30, 5);
  const EigenstyleModel m = fit_pca(x, 3);
  Eigen::MatrixXd c(30, 5);
  for (int i = 0; i < 30; ++i) c.row(i) = (x[static_cast<std::size_t>(i)].x - m.mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.transpose() * c);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(m.eigenvalues(k), eig.eigenvalues()(4 - k), 1e-9 * eig.eigenvalues()(4));
    EXPECT_NEAR(std::abs(m.basis.col(k).dot(eig.eigenvectors().col(4 - k))), 1.0, 1e-8);
  }
}

TEST(Pca, ErrorsAndDimensionChecks) {
  EXPECT_THROW(fit_pca(std::vector<StyleVector>{vec({1})}, 1), Error);
  const std::vector<StyleVector> x = {vec({1, 2}), vec({3, 5})};
  EXPECT_THROW(fit_pca(x, 0), Error);
  const EigenstyleModel m = fit_pca(x, 1);
  EXPECT_THROW(pca_project(vec({1, 2, 3}), m), Error);
}
