#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "actstyle/geometry.hpp"
#include "actstyle/synth.hpp"

namespace support {

/// Camera at distance 5..9 from the origin, aimed near it, random intrinsics.
inline actstyle::CameraModel random_camera(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double az = std::numbers::pi * u(rng);
  const double dist = 7.0 + 2.0 * u(rng);
  const Eigen::Vector3d center(dist * std::cos(az), dist * std::sin(az), 1.0 + 1.5 * u(rng));
  const Eigen::Vector3d look = Eigen::Vector3d(0.3 * u(rng), 0.3 * u(rng), 1.0) - center;
  const Eigen::Vector3d forward = look.normalized();
  const Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  const double f = 900.0 + 200.0 * u(rng);
  Eigen::Matrix3d k;
  k << f, 0.0, 640.0 + 20.0 * u(rng), 0.0, f * (1.0 + 0.02 * u(rng)), 360.0 + 20.0 * u(rng), 0.0, 0.0, 1.0;
  return actstyle::CameraModel::from_krt(k, r, -r * center);
}

inline Eigen::Vector3d random_point(std::mt19937_64& rng, double spread = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Eigen::Vector3d(spread * u(rng), spread * u(rng), 1.0 + spread * u(rng));
}

/// Scale-free comparison: both normalized by their largest-magnitude entry.
inline double normalized_difference(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  Eigen::Index ia, ja, ib, jb;
  a.cwiseAbs().maxCoeff(&ia, &ja);
  b.cwiseAbs().maxCoeff(&ib, &jb);
  const Eigen::Matrix3d na = a / a(ia, ja);
  const Eigen::Matrix3d nb = b / b(ia, ja);
  (void)ib;
  (void)jb;
  return (na - nb).norm() / na.norm();
}

/// Key poses of one synthetic sequence, every camera.
struct SyntheticViews {
  actstyle::SyntheticSequence seq;
  std::vector<actstyle::PoseSequence> views;  // one per camera
};

inline SyntheticViews synthetic_views(actstyle::Action action, const actstyle::StyleParams& style,
                                      std::uint64_t seed, const std::vector<actstyle::CameraModel>& cams,
                                      int frames = 48, int key_poses = 16) {
  SyntheticViews out{actstyle::generate_sequence(action, style, frames, seed, cams), {}};
  for (const auto& img : out.seq.images)
    out.views.push_back({actstyle::select_key_poses(img, static_cast<std::size_t>(key_poses))});
  return out;
}

}  // namespace support
