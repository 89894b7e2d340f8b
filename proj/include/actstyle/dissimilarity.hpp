#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "actstyle/core.hpp"
#include "actstyle/geometry.hpp"

namespace actstyle {

using Complex = std::complex<double>;

/// Coefficients (a, b, c) of the monic characteristic polynomial
/// l^3 + a l^2 + b l + c of a 3x3 matrix.
inline std::array<double, 3> characteristic_coefficients(const Eigen::Matrix3d& m) {
  const double trace = m.trace();
  const double minors = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) -
                        m(0, 2) * m(2, 0) + m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  return {-trace, minors, -m.determinant()};
}

namespace detail {

inline Complex cubic_value(const std::array<double, 3>& k, Complex x) {
  return ((x + k[0]) * x + k[1]) * x + k[2];
}

inline Complex cubic_slope(const std::array<double, 3>& k, Complex x) {
  return (3.0 * x + 2.0 * k[0]) * x + k[1];
}

// One guarded Newton step; kept only if the residual shrinks.
inline Complex polish_root(const std::array<double, 3>& k, Complex x) {
  for (int it = 0; it < 3; ++it) {
    const Complex f = cubic_value(k, x);
    const Complex df = cubic_slope(k, x);
    if (f == 0.0 || df == 0.0) break;
    const Complex next = x - f / df;
    if (std::abs(cubic_value(k, next)) >= std::abs(f)) break;
    x = next;
  }
  return x;
}

}  // namespace detail

/// Roots of l^3 + a l^2 + b l + c in closed form (Cardano / trigonometric),
/// each refined by a guarded Newton step. A real root is returned with a zero
/// imaginary part.
inline std::array<Complex, 3> solve_cubic(const std::array<double, 3>& k) {
  const double a = k[0], b = k[1], c = k[2];
  const double shift = -a / 3.0;
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const double half_q = q / 2.0;
  const double third_p = p / 3.0;
  const double disc = half_q * half_q + third_p * third_p * third_p;

  std::array<Complex, 3> roots;
  if (p == 0.0 && q == 0.0) {
    roots = {Complex(shift), Complex(shift), Complex(shift)};
  } else if (disc > 0.0) {
    // One real root, a complex-conjugate pair.
    const double sq = std::sqrt(disc);
    const double u = std::cbrt(-half_q + (half_q > 0 ? -sq : sq));
    const double v = u != 0.0 ? -third_p / u : std::cbrt(-half_q - (half_q > 0 ? -sq : sq));
    const double re = -(u + v) / 2.0 + shift;
    const double im = std::sqrt(3.0) / 2.0 * (u - v);
    roots = {Complex(u + v + shift), Complex(re, im), Complex(re, -im)};
  } else {
    const double r = std::sqrt(-third_p);
    const double arg = std::clamp(-half_q / (r * r * r), -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    for (int i = 0; i < 3; ++i)
      roots[static_cast<std::size_t>(i)] =
          Complex(2.0 * r * std::cos(phi - 2.0 * std::numbers::pi * i / 3.0) + shift);
  }
  for (auto& x : roots) {
    const bool real = x.imag() == 0.0;
    x = detail::polish_root(k, x);
    if (real) x = Complex(x.real(), 0.0);
  }
  return roots;
}

inline std::array<Complex, 3> eigenvalues3(const Eigen::Matrix3d& m) {
  return solve_cubic(characteristic_coefficients(m));
}

struct DissimilarityConfig {
  double mu = 1.0;
  double deviation_cap = 2.0;
  int min_valid_triplets = 30;

  void validate() const {
    if (!(mu > 0.0)) throw Error(ErrorKind::InvalidParameter, "mu must be > 0");
    if (!(deviation_cap > 0.0)) throw Error(ErrorKind::InvalidParameter, "deviation cap must be > 0");
    if (min_valid_triplets < 1)
      throw Error(ErrorKind::InvalidParameter, "min_valid_triplets must be >= 1");
  }
};

struct EigenRatioDeviation {
  TripletIndex triplet;
  Complex sigma_ratio{1.0, 0.0};
  double deviation = 0.0;
  bool valid = false;
  /// Eigenvalues of the determinant-normalized cross-homography.
  std::array<Complex, 3> eigenvalues{};
};

inline bool well_conditioned(const Homography& h) {
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(h.h);
  const auto& s = svd.singularValues();
  return s(2) > 0.0 && std::isfinite(s(0) / s(2)) && s(0) / s(2) <= 1e12;
}

/// H1 H2^-1; H2 must be well conditioned.
inline Homography cross_homography(const Homography& h1, const Homography& h2) {
  if (!well_conditioned(h2)) throw Error(ErrorKind::Conditioning, "second homography is near singular");
  return Homography{h1.h * h2.h.inverse()};
}

namespace detail {

// Eigenvalues of the restriction of m to the invariant plane orthogonal to
// the left eigenvector of the simple real eigenvalue `isolated`. This avoids
// the square-root loss of accuracy of polynomial roots at a semisimple
// double eigenvalue.
inline std::optional<std::array<Complex, 2>> deflated_pair(const Eigen::Matrix3d& m, double isolated) {
  const Eigen::Matrix3d shifted = m - isolated * Eigen::Matrix3d::Identity();
  Eigen::Vector3d left = Eigen::Vector3d::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      const Eigen::Vector3d cand = shifted.col(i).cross(shifted.col(j));
      if (cand.norm() > left.norm()) left = cand;
    }
  if (!(left.norm() > 1e-12 * shifted.squaredNorm())) return std::nullopt;
  left.normalize();
  // Orthonormal basis of the plane orthogonal to `left`.
  Eigen::Index k = 0;
  left.cwiseAbs().minCoeff(&k);
  Eigen::Vector3d axis = Eigen::Vector3d::Zero();
  axis(k) = 1.0;
  const Eigen::Vector3d q1 = left.cross(axis).normalized();
  const Eigen::Vector3d q2 = left.cross(q1);
  Eigen::Matrix<double, 3, 2> q;
  q << q1, q2;
  const Eigen::Matrix2d b = q.transpose() * m * q;
  const double half_tr = 0.5 * (b(0, 0) + b(1, 1));
  const double half_diff = 0.5 * (b(0, 0) - b(1, 1));
  const Complex root = std::sqrt(Complex(half_diff * half_diff + b(0, 1) * b(1, 0)));
  return std::array<Complex, 2>{half_tr + root, half_tr - root};
}

struct PairChoice {
  Complex ratio;
  double deviation = std::numeric_limits<double>::infinity();
  int first = 0;
  int second = 1;
};

inline PairChoice closest_pair(const std::array<Complex, 3>& ev, double mu) {
  PairChoice best;
  static constexpr int kPairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  for (const auto& pr : kPairs) {
    Complex big = ev[static_cast<std::size_t>(pr[0])];
    Complex small = ev[static_cast<std::size_t>(pr[1])];
    int i = pr[0], j = pr[1];
    if (std::abs(big) < std::abs(small)) {
      std::swap(big, small);
      std::swap(i, j);
    }
    const Complex ratio = big / small;
    const double dev = std::abs(ratio - mu);
    if (dev < best.deviation) best = {ratio, dev, i, j};
  }
  return best;
}

}  // namespace detail

/// Distance of a cross-homography from a planar homology: |l_a / l_b - mu|
/// for the eigenvalue pair that minimizes it, capped at the configured value.
inline EigenRatioDeviation homology_deviation(const Homography& h, const DissimilarityConfig& cfg) {
  EigenRatioDeviation out;
  if (!h.h.allFinite()) return out;
  const double peak = h.h.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) return out;
  Eigen::Matrix3d m = h.h / peak;
  const double det = m.determinant();
  if (!(std::abs(det) > 0.0)) return out;
  m /= std::cbrt(det);

  std::array<Complex, 3> ev = eigenvalues3(m);
  for (const auto& l : ev)
    if (!(std::abs(l) >= 1e-12) || !std::isfinite(std::abs(l))) return out;

  auto choice = detail::closest_pair(ev, cfg.mu);
  const int isolated = 3 - choice.first - choice.second;
  const Complex iso = ev[static_cast<std::size_t>(isolated)];
  const double gap = std::abs(ev[static_cast<std::size_t>(choice.first)] -
                              ev[static_cast<std::size_t>(choice.second)]);
  const double separation = std::min(std::abs(iso - ev[static_cast<std::size_t>(choice.first)]),
                                     std::abs(iso - ev[static_cast<std::size_t>(choice.second)]));
  if (iso.imag() == 0.0 && separation > 10.0 * gap) {
    if (const auto pair = detail::deflated_pair(m, iso.real())) {
      ev[static_cast<std::size_t>(choice.first)] = (*pair)[0];
      ev[static_cast<std::size_t>(choice.second)] = (*pair)[1];
      choice = detail::closest_pair(ev, cfg.mu);
    }
  }

  out.eigenvalues = ev;
  out.sigma_ratio = choice.ratio;
  out.deviation = std::min(choice.deviation, cfg.deviation_cap);
  out.valid = std::isfinite(out.deviation);
  return out;
}

struct PoseTransition {
  ImagePose start_pose;
  ImagePose end_pose;
  int index = 0;
};

/// MAD over the valid triplets plus the per-triplet deviations.
struct TransitionResult {
  double mad = 0.0;
  int valid_count = 0;
  std::array<EigenRatioDeviation, kTripletCount> deviations{};
  bool sufficient = false;
};

inline double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Triplet homographies between one pose in the first view and one pose in
/// the second view; unset where the triplet failed a conditioning gate.
using TripletHomographies = std::array<std::optional<Homography>, kTripletCount>;

inline TripletHomographies triplet_homographies(const ImagePose& view1, const ImagePose& view2,
                                                const FundamentalMatrix& f) {
  TripletHomographies out;
  const auto& triplets = all_triplets();
  for (std::size_t i = 0; i < kTripletCount; ++i) {
    const TripletIndex& t = triplets[i];
    if (!triplet_well_conditioned(view1, t) || !triplet_well_conditioned(view2, t)) continue;
    const std::array<Correspondence, 3> corrs = {
        Correspondence{homogeneous(view1[static_cast<std::size_t>(t.a)]),
                       homogeneous(view2[static_cast<std::size_t>(t.a)])},
        Correspondence{homogeneous(view1[static_cast<std::size_t>(t.b)]),
                       homogeneous(view2[static_cast<std::size_t>(t.b)])},
        Correspondence{homogeneous(view1[static_cast<std::size_t>(t.c)]),
                       homogeneous(view2[static_cast<std::size_t>(t.c)])}};
    try {
      out[i] = homography_from_F_3pts(f, corrs);
    } catch (const Error&) {
    }
  }
  return out;
}

/// Combines the start-pose and end-pose homographies of every triplet.
inline TransitionResult combine_transition(const TripletHomographies& start,
                                           const TripletHomographies& end,
                                           const DissimilarityConfig& cfg) {
  TransitionResult out;
  std::vector<double> valid;
  valid.reserve(kTripletCount);
  const auto& triplets = all_triplets();
  for (std::size_t i = 0; i < kTripletCount; ++i) {
    EigenRatioDeviation dev;
    // Both ends are checked so that a reversed transition keeps the same triplets.
    if (start[i] && end[i] && well_conditioned(*start[i])) {
      try {
        dev = homology_deviation(cross_homography(*start[i], *end[i]), cfg);
      } catch (const Error&) {
        dev = EigenRatioDeviation{};
      }
    }
    dev.triplet = triplets[i];
    if (dev.valid) valid.push_back(dev.deviation);
    out.deviations[i] = dev;
  }
  out.valid_count = static_cast<int>(valid.size());
  out.sufficient = out.valid_count >= cfg.min_valid_triplets;
  out.mad = valid.empty() ? cfg.deviation_cap : median(std::move(valid));
  return out;
}

/// Pose-transition dissimilarity: median homology deviation over valid
/// triplets between a transition seen in view 1 and one seen in view 2.
/// F maps view 1 to view 2 (x2^T F x1 = 0).
inline TransitionResult transition_dissimilarity(const PoseTransition& target,
                                                 const PoseTransition& reference,
                                                 const FundamentalMatrix& f,
                                                 const DissimilarityConfig& cfg) {
  cfg.validate();
  if (!target.start_pose.finite() || !target.end_pose.finite() || !reference.start_pose.finite() ||
      !reference.end_pose.finite())
    throw Error(ErrorKind::InvalidParameter, "non-finite joint coordinates");
  const auto h1 = triplet_homographies(target.start_pose, reference.start_pose, f);
  const auto h2 = triplet_homographies(target.end_pose, reference.end_pose, f);
  TransitionResult out = combine_transition(h1, h2, cfg);
  if (!out.sufficient)
    throw Error(ErrorKind::InsufficientGeometry,
                "only " + std::to_string(out.valid_count) + " valid triplets (need " +
                    std::to_string(cfg.min_valid_triplets) + ")");
  return out;
}

}  // namespace actstyle
