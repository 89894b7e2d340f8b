#pragma once

#include <array>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "actstyle/core.hpp"

namespace actstyle {

using Matrix34 = Eigen::Matrix<double, 3, 4>;

/// Finite pinhole camera x = P X.
class CameraModel {
 public:
  CameraModel() : projection_(Matrix34::Identity()) {}

  explicit CameraModel(const Matrix34& projection) : projection_(projection) {
    const Eigen::Matrix3d m = projection_.leftCols<3>();
    if (!projection_.allFinite() || std::abs(m.determinant()) <= 1e-12 * std::pow(m.norm(), 3))
      throw Error(ErrorKind::InvalidParameter, "camera left 3x3 block is singular");
  }

  static CameraModel from_krt(const Eigen::Matrix3d& k, const Eigen::Matrix3d& r,
                              const Eigen::Vector3d& t) {
    Matrix34 rt;
    rt << r, t;
    return CameraModel(k * rt);
  }

  const Matrix34& projection() const { return projection_; }

  Eigen::Vector3d center() const {
    return -projection_.leftCols<3>().inverse() * projection_.col(3);
  }

  /// Depth of a world point along the principal axis (positive in front).
  double depth(const Eigen::Vector3d& x) const {
    const Eigen::Matrix3d m = projection_.leftCols<3>();
    const double w = projection_.row(2).dot(homogeneous(x));
    const double sign = m.determinant() > 0 ? 1.0 : -1.0;
    return sign * w / m.row(2).norm();
  }

 private:
  Matrix34 projection_;
};

inline Point2 project(const CameraModel& camera, const Point3& p) {
  const Point2 x = camera.projection() * p;
  const double scale = camera.projection().norm() * p.norm();
  if (!(x.norm() > 1e-14 * scale))
    throw Error(ErrorKind::DegenerateProjection, "point at camera center");
  return x;
}

/// Projection to pixel coordinates; the point must not lie on the principal plane.
inline Eigen::Vector2d project_pixel(const CameraModel& camera, const Eigen::Vector3d& p) {
  const Point2 x = project(camera, homogeneous(p));
  if (std::abs(x.z()) <= 1e-14 * x.norm())
    throw Error(ErrorKind::DegenerateProjection, "point on the principal plane");
  return x.hnormalized();
}

inline Point2 normalized_point(const Point2& x) {
  if (x.z() == 0.0) throw Error(ErrorKind::DegenerateProjection, "point at infinity");
  return x / x.z();
}

struct Homography {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();

  /// Scale-fixed copy: divided by its largest-magnitude entry.
  Eigen::Matrix3d canonical() const {
    Eigen::Index r = 0, c = 0;
    h.cwiseAbs().maxCoeff(&r, &c);
    return h / h(r, c);
  }

  Point2 apply(const Point2& x) const { return h * x; }
};

struct FundamentalMatrix {
  Eigen::Matrix3d f = Eigen::Matrix3d::Zero();
};

/// Pair of matched image points, first view then second view.
struct Correspondence {
  Point2 x1;
  Point2 x2;
};

namespace detail {

/// Similarity moving the finite points' centroid to the origin with mean
/// distance sqrt(2).
inline Eigen::Matrix3d conditioning_transform(std::span<const Point2> pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  int finite = 0;
  for (const auto& p : pts) {
    if (std::abs(p.z()) > 1e-12 * p.norm()) {
      centroid += p.hnormalized();
      ++finite;
    }
  }
  if (finite == 0) return Eigen::Matrix3d::Identity();
  centroid /= finite;
  double mean_dist = 0.0;
  for (const auto& p : pts)
    if (std::abs(p.z()) > 1e-12 * p.norm()) mean_dist += (p.hnormalized() - centroid).norm();
  mean_dist /= finite;
  const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

inline double unit_det(const Point2& a, const Point2& b, const Point2& c) {
  Eigen::Matrix3d m;
  m << a.normalized(), b.normalized(), c.normalized();
  return m.determinant();
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

// Maps e1, e2, e3, (1,1,1) to the four points.
inline Eigen::Matrix3d projective_basis(const std::array<Point2, 4>& p) {
  Eigen::Matrix3d m;
  m << p[0], p[1], p[2];
  const Eigen::Vector3d lambda = m.fullPivLu().solve(p[3]);
  return m * lambda.asDiagonal();
}

}  // namespace detail

inline constexpr double kCollinearityTolerance = 1e-9;

/// Homography with dst_i ~ H src_i from four correspondences in general
/// position. Points may be at infinity.
inline Homography homography_from_4pts(const std::array<Point2, 4>& src,
                                       const std::array<Point2, 4>& dst) {
  const Eigen::Matrix3d ts = detail::conditioning_transform(src);
  const Eigen::Matrix3d td = detail::conditioning_transform(dst);
  std::array<Point2, 4> s, d;
  for (int i = 0; i < 4; ++i) {
    if (!src[i].allFinite() || !dst[i].allFinite() || src[i].isZero(0) || dst[i].isZero(0))
      throw Error(ErrorKind::DegenerateConfiguration, "invalid homogeneous point");
    s[i] = (ts * src[i]).normalized();
    d[i] = (td * dst[i]).normalized();
  }
  static constexpr int kTriples[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  for (const auto& t : kTriples) {
    if (std::abs(detail::unit_det(s[t[0]], s[t[1]], s[t[2]])) < kCollinearityTolerance ||
        std::abs(detail::unit_det(d[t[0]], d[t[1]], d[t[2]])) < kCollinearityTolerance)
      throw Error(ErrorKind::DegenerateConfiguration, "three collinear points");
  }
  const Eigen::Matrix3d hn = detail::projective_basis(d) * detail::projective_basis(s).inverse();
  return Homography{td.inverse() * hn * ts};
}

/// Homography induced by the plane of a world triplet between two cameras.
/// Ground truth for the image-based construction.
inline Homography plane_homography_oracle(const CameraModel& cam1, const CameraModel& cam2,
                                          const std::array<Eigen::Vector3d, 3>& triplet) {
  const Eigen::Vector3d& a = triplet[0];
  const Eigen::Vector3d& b = triplet[1];
  const Eigen::Vector3d& c = triplet[2];
  const Eigen::Vector3d normal = (b - a).cross(c - a);
  if (normal.norm() <= 1e-12 * (b - a).norm() * (c - a).norm() || normal.norm() == 0.0)
    throw Error(ErrorKind::DegenerateConfiguration, "collinear world triplet");
  const Eigen::Vector3d n = normal.normalized();
  const double extent = std::max({(b - a).norm(), (c - a).norm(), (c - b).norm()});
  for (const CameraModel* cam : {&cam1, &cam2}) {
    const Eigen::Vector3d center = cam->center();
    const double scale = extent + (center - a).norm();
    if (std::abs(n.dot(center - a)) <= 1e-9 * scale)
      throw Error(ErrorKind::DegenerateConfiguration, "triplet plane passes through a camera center");
  }
  // Fourth in-plane point strictly inside the triangle.
  const Eigen::Vector3d centroid = (a + b + c) / 3.0;
  const Eigen::Vector3d q = centroid + 0.2 * (a - centroid) - 0.1 * (c - centroid);
  std::array<Point2, 4> x1, x2;
  const std::array<Eigen::Vector3d, 4> pts = {a, b, c, q};
  for (int i = 0; i < 4; ++i) {
    x1[i] = project(cam1, homogeneous(pts[i]));
    x2[i] = project(cam2, homogeneous(pts[i]));
  }
  return homography_from_4pts(x1, x2);
}

/// Normalized eight-point estimate with rank-2 enforcement; x2^T F x1 = 0.
inline FundamentalMatrix estimate_fundamental(std::span<const Correspondence> corrs) {
  if (corrs.size() < 8)
    throw Error(ErrorKind::InsufficientData,
                "fundamental matrix needs >= 8 correspondences, got " + std::to_string(corrs.size()));
  std::vector<Point2> p1, p2;
  p1.reserve(corrs.size());
  p2.reserve(corrs.size());
  for (const auto& c : corrs) {
    p1.push_back(normalized_point(c.x1));
    p2.push_back(normalized_point(c.x2));
  }
  const Eigen::Matrix3d t1 = detail::conditioning_transform(p1);
  const Eigen::Matrix3d t2 = detail::conditioning_transform(p2);

  Eigen::MatrixXd design(static_cast<Eigen::Index>(corrs.size()), 9);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Eigen::Vector3d a = t1 * p1[i];
    const Eigen::Vector3d b = t2 * p2[i];
    design.row(static_cast<Eigen::Index>(i)) << b.x() * a.x(), b.x() * a.y(), b.x(), b.y() * a.x(),
        b.y() * a.y(), b.y(), a.x(), a.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 9 || sv(7) <= 1e-8 * sv(0))
    throw Error(ErrorKind::DegenerateConfiguration, "design matrix has a multi-dimensional null space");

  const Eigen::Matrix<double, 9, 1> v = svd.matrixV().col(8);
  Eigen::Matrix3d fn;
  fn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);

  Eigen::JacobiSVD<Eigen::Matrix3d> fsvd(fn, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = fsvd.singularValues();
  s(2) = 0.0;
  fn = fsvd.matrixU() * s.asDiagonal() * fsvd.matrixV().transpose();

  Eigen::Matrix3d f = t2.transpose() * fn * t1;
  f /= f.norm();
  return FundamentalMatrix{f};
}

/// Epipoles (e1 in the first view, e2 in the second): F e1 = 0, F^T e2 = 0.
inline std::pair<Point2, Point2> epipoles(const FundamentalMatrix& f) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(f.f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.matrixV().col(2), svd.matrixU().col(2)};
}

/// Plane homography from F and a triplet of correspondences: the homography
/// through the three point pairs and the epipole pair.
inline Homography homography_from_F_3pts(const FundamentalMatrix& f,
                                         const std::array<Correspondence, 3>& corrs) {
  const auto [e1, e2] = epipoles(f);
  const std::array<Point2, 4> src = {corrs[0].x1, corrs[1].x1, corrs[2].x1, e1};
  const std::array<Point2, 4> dst = {corrs[0].x2, corrs[1].x2, corrs[2].x2, e2};
  return homography_from_4pts(src, dst);
}

/// Fundamental matrix of a camera pair: F = [e2]x P2 P1^+.
inline FundamentalMatrix fundamental_from_cameras(const CameraModel& cam1, const CameraModel& cam2) {
  const Eigen::Vector3d c = cam1.center();
  const Eigen::Vector3d e2 = cam2.projection() * homogeneous(c);
  const Matrix34& p1 = cam1.projection();
  const Eigen::Matrix<double, 4, 3> pinv =
      p1.transpose() * (p1 * p1.transpose()).inverse();
  Eigen::Matrix3d f = detail::skew(e2) * cam2.projection() * pinv;
  f /= f.norm();
  return FundamentalMatrix{f};
}

/// Signed triangle area of three pixel points.
inline double triangle_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                            const Eigen::Vector2d& c) {
  const Eigen::Vector2d u = b - a;
  const Eigen::Vector2d v = c - a;
  return 0.5 * (u.x() * v.y() - u.y() * v.x());
}

inline double bbox_diagonal_sq(const ImagePose& pose) {
  Eigen::Vector2d lo = pose.joints[0], hi = pose.joints[0];
  for (const auto& p : pose.joints) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).squaredNorm();
}

/// Near-collinearity gate for an image triplet relative to the pose extent.
inline bool triplet_well_conditioned(const ImagePose& pose, const TripletIndex& t,
                                     double area_fraction = 1e-4) {
  const double area = std::abs(triangle_area(pose[static_cast<std::size_t>(t.a)],
                                             pose[static_cast<std::size_t>(t.b)],
                                             pose[static_cast<std::size_t>(t.c)]));
  return area > area_fraction * bbox_diagonal_sq(pose);
}

}  // namespace actstyle
