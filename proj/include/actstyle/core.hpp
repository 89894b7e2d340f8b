#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace actstyle {

enum class ErrorKind {
  DegenerateProjection,
  DegenerateConfiguration,
  InsufficientData,
  Conditioning,
  InsufficientGeometry,
  EmptyInput,
  Bounds,
  InvalidParameter,
  Dimension,
  MissingClass,
  DegenerateSeparation,
  InternalConsistency,
  Format,
  Parse,
  Io,
  Config,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateProjection: return "degenerate-projection";
    case ErrorKind::DegenerateConfiguration: return "degenerate-configuration";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::Conditioning: return "conditioning";
    case ErrorKind::InsufficientGeometry: return "insufficient-geometry";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::Bounds: return "bounds";
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::MissingClass: return "missing-class";
    case ErrorKind::DegenerateSeparation: return "degenerate-separation";
    case ErrorKind::InternalConsistency: return "internal-consistency";
    case ErrorKind::Format: return "format";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for failures that come from the data's geometry or numerics rather
  /// than from malformed input or configuration.
  bool numerical() const noexcept {
    switch (kind_) {
      case ErrorKind::DegenerateProjection:
      case ErrorKind::DegenerateConfiguration:
      case ErrorKind::Conditioning:
      case ErrorKind::InsufficientGeometry:
      case ErrorKind::DegenerateSeparation:
      case ErrorKind::InternalConsistency:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorKind kind_;
};

// Homogeneous image point (3-vector) and world point (4-vector).
using Point2 = Eigen::Vector3d;
using Point3 = Eigen::Vector4d;

inline constexpr std::size_t kJointCount = 11;

enum class Joint : int {
  Head = 0,
  ShoulderLeft,
  ShoulderRight,
  ElbowLeft,
  ElbowRight,
  HandLeft,
  HandRight,
  KneeLeft,
  KneeRight,
  FootLeft,
  FootRight,
};

inline constexpr std::array<std::string_view, kJointCount> kJointLabels = {
    "head",    "shoulder_l", "shoulder_r", "elbow_l", "elbow_r", "hand_l",
    "hand_r",  "knee_l",     "knee_r",     "foot_l",  "foot_r"};

/// Body pose with the fixed 11-joint label set. Image poses store pixel
/// coordinates, world poses store 3-D positions.
template <int Dim>
struct BodyPose {
  using Vec = Eigen::Matrix<double, Dim, 1>;
  std::array<Vec, kJointCount> joints{};

  const Vec& operator[](Joint j) const { return joints[static_cast<std::size_t>(j)]; }
  Vec& operator[](Joint j) { return joints[static_cast<std::size_t>(j)]; }
  const Vec& operator[](std::size_t i) const { return joints[i]; }
  Vec& operator[](std::size_t i) { return joints[i]; }

  bool finite() const {
    for (const auto& p : joints)
      if (!p.allFinite()) return false;
    return true;
  }

  bool operator==(const BodyPose& o) const {
    for (std::size_t i = 0; i < kJointCount; ++i)
      if (joints[i] != o.joints[i]) return false;
    return true;
  }
};

using ImagePose = BodyPose<2>;
using WorldPose = BodyPose<3>;

inline Point2 homogeneous(const Eigen::Vector2d& p) { return {p.x(), p.y(), 1.0}; }
inline Point3 homogeneous(const Eigen::Vector3d& p) { return {p.x(), p.y(), p.z(), 1.0}; }

struct TripletIndex {
  int a = 0;
  int b = 1;
  int c = 2;

  friend bool operator==(const TripletIndex&, const TripletIndex&) = default;
};

inline constexpr std::size_t kTripletCount = 165;

/// All C(11,3) joint triplets in lexicographic order, each with a < b < c.
inline const std::array<TripletIndex, kTripletCount>& all_triplets() {
  static const auto table = [] {
    std::array<TripletIndex, kTripletCount> t{};
    std::size_t k = 0;
    for (int a = 0; a < static_cast<int>(kJointCount); ++a)
      for (int b = a + 1; b < static_cast<int>(kJointCount); ++b)
        for (int c = b + 1; c < static_cast<int>(kJointCount); ++c) t[k++] = {a, b, c};
    return t;
  }();
  return table;
}

/// Image-space key-pose sequence; consecutive key poses form pose transitions.
struct PoseSequence {
  std::vector<ImagePose> key_poses;

  std::size_t transition_count() const {
    return key_poses.size() < 2 ? 0 : key_poses.size() - 1;
  }
};

/// Uniformly subsamples `count` key poses from raw frames (first and last
/// frames always kept).
template <class Pose>
std::vector<Pose> select_key_poses(const std::vector<Pose>& frames, std::size_t count) {
  if (frames.empty()) throw Error(ErrorKind::EmptyInput, "no frames to subsample");
  if (count < 2) throw Error(ErrorKind::InvalidParameter, "key-pose count must be >= 2");
  std::vector<Pose> out;
  out.reserve(count);
  const double last = static_cast<double>(frames.size() - 1);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = last * static_cast<double>(k) / static_cast<double>(count - 1);
    out.push_back(frames[static_cast<std::size_t>(std::lround(t))]);
  }
  return out;
}

}  // namespace actstyle
