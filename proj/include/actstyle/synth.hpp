#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Geometry>

#include "actstyle/core.hpp"
#include "actstyle/geometry.hpp"
#include "actstyle/style.hpp"

namespace actstyle {

enum class Action { Walk, Kick, Throw, SitDown, StandUp };

inline constexpr std::array<Action, 5> kAllActions = {Action::Walk, Action::Kick, Action::Throw,
                                                      Action::SitDown, Action::StandUp};

inline std::string_view to_string(Action a) {
  switch (a) {
    case Action::Walk: return "walk";
    case Action::Kick: return "kick";
    case Action::Throw: return "throw";
    case Action::SitDown: return "sit_down";
    case Action::StandUp: return "stand_up";
  }
  return "walk";
}

inline Action parse_action(std::string_view s) {
  for (Action a : kAllActions)
    if (to_string(a) == s) return a;
  throw Error(ErrorKind::Parse, "unknown action '" + std::string(s) + "'");
}

/// Motion style and physique of one performer. Angles in radians, lengths in
/// world units (roughly metres).
struct StyleParams {
  double leg_swing = 0.40;
  double knee_flex = 0.55;
  double arm_swing = 0.35;
  double elbow_flex = 0.30;
  double torso_sway = 0.06;
  double torso_twist = 0.10;
  double hip_twist = 0.12;
  double torso_lean = 0.15;
  double bounce = 0.03;
  double frequency = 1.0;  // cycles per sequence
  double arm_phase = std::numbers::pi;
  double shoulder_width = 0.40;
  double hip_width = 0.24;
  double limb_scale = 1.0;
  double noise_sigma = 0.0;  // pixels

  /// Parameters that vary between performers, in a fixed order.
  static constexpr std::size_t kVariableCount = 14;

  std::array<double*, kVariableCount> variables() {
    return {&leg_swing, &knee_flex,      &arm_swing, &elbow_flex, &torso_sway,
            &torso_twist, &hip_twist,    &torso_lean, &bounce,    &frequency,
            &arm_phase,   &shoulder_width, &hip_width, &limb_scale};
  }
  /// Flags the motion amplitudes within variables().
  static constexpr std::array<bool, kVariableCount> amplitude_mask() {
    return {true, true, true, false, true, true, true, false, true, false, false, false, false, false};
  }

  std::array<double, kVariableCount> values() const {
    auto copy = *this;
    std::array<double, kVariableCount> out{};
    auto vars = copy.variables();
    for (std::size_t i = 0; i < kVariableCount; ++i) out[i] = *vars[i];
    return out;
  }

  void validate() const {
    for (double a : {leg_swing, knee_flex, arm_swing, elbow_flex, torso_sway, torso_twist, hip_twist,
                     torso_lean, bounce, noise_sigma})
      if (!(a >= 0.0)) throw Error(ErrorKind::InvalidParameter, "style amplitudes must be >= 0");
    if (!(frequency > 0.0)) throw Error(ErrorKind::InvalidParameter, "frequency must be > 0");
    if (!(shoulder_width > 0.0) || !(hip_width > 0.0) || !(limb_scale > 0.0))
      throw Error(ErrorKind::InvalidParameter, "body dimensions must be > 0");
  }
};

/// Class base styles used by the default synthetic study. `separation`
/// scales the female/male difference about its midpoint; 1 gives the
/// defaults below, 0 makes the classes identical.
inline std::array<StyleParams, 2> default_class_styles(double separation = 1.0) {
  if (!(separation >= 0.0)) throw Error(ErrorKind::InvalidParameter, "class separation must be >= 0");
  StyleParams female;
  female.leg_swing = 0.36;
  female.arm_swing = 0.28;
  female.elbow_flex = 0.38;
  female.torso_sway = 0.05;
  female.torso_twist = 0.06;
  female.hip_twist = 0.22;
  female.shoulder_width = 0.36;
  female.hip_width = 0.28;
  StyleParams male;
  male.leg_swing = 0.44;
  male.arm_swing = 0.46;
  male.elbow_flex = 0.22;
  male.torso_sway = 0.09;
  male.torso_twist = 0.16;
  male.hip_twist = 0.08;
  male.shoulder_width = 0.46;
  male.hip_width = 0.22;
  auto f = female.variables();
  auto m = male.variables();
  for (std::size_t i = 0; i < StyleParams::kVariableCount; ++i) {
    const double mid = 0.5 * (*f[i] + *m[i]);
    const double half = 0.5 * separation * (*m[i] - *f[i]);
    *f[i] = mid - half;
    *m[i] = mid + half;
  }
  female.validate();
  male.validate();
  return {female, male};
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Derives an independent stream seed from a base seed and a list of keys.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = detail::splitmix64(seed);
  for (std::uint64_t k : keys) h = detail::splitmix64(h ^ detail::splitmix64(k + 0x51ed27ULL));
  return h;
}

/// Cameras evenly spaced on a horizontal circle, aimed at the world origin,
/// each with its own focal length (within +-10% of `focal`).
inline std::vector<CameraModel> make_camera_ring(int count, double radius, double height,
                                                 std::uint64_t seed = 7, double focal = 1000.0) {
  if (count < 1) throw Error(ErrorKind::InvalidParameter, "camera count must be >= 1");
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidParameter, "ring radius must be > 0");
  std::mt19937_64 rng(derive_seed(seed, {0xca11}));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<CameraModel> cams;
  cams.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double angle = 2.0 * std::numbers::pi * i / count;
    const Eigen::Vector3d center(radius * std::cos(angle), radius * std::sin(angle), height);
    const Eigen::Vector3d forward = (-center).normalized();
    const Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ()).normalized();
    const Eigen::Vector3d down = forward.cross(right);
    Eigen::Matrix3d r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    const double f = focal * (1.0 + 0.1 * unit(rng));
    const double aspect = 1.0 + 0.02 * unit(rng);
    Eigen::Matrix3d k;
    k << f, 0.0, 640.0 + 10.0 * unit(rng), 0.0, f * aspect, 360.0 + 10.0 * unit(rng), 0.0, 0.0, 1.0;
    cams.push_back(CameraModel::from_krt(k, r, -r * center));
  }
  return cams;
}

struct SyntheticSequence {
  Action action = Action::Walk;
  std::vector<WorldPose> world;
  std::vector<CameraModel> cameras;
  std::vector<std::vector<ImagePose>> images;  // [camera][frame]
  Label label = Label::Female;
};

namespace detail {

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Unit direction in a body frame (x forward, y left, z up) for a limb hanging
// down and swung forward by `angle`, tilted sideways by `lateral`.
inline Eigen::Vector3d limb_direction(double angle, double lateral = 0.0) {
  return Eigen::Vector3d(std::sin(angle) * std::cos(lateral), std::sin(lateral),
                         -std::cos(angle) * std::cos(lateral));
}

struct JointAngles {
  double pelvis_forward = 0.0;
  double pelvis_height = 0.0;  // offset from standing height
  double pelvis_yaw = 0.0;
  double torso_yaw = 0.0;
  double torso_roll = 0.0;
  double torso_pitch = 0.0;
  std::array<double, 2> hip{};  // left, right flexion
  std::array<double, 2> knee{};
  std::array<double, 2> shoulder{};
  std::array<double, 2> elbow{};
  std::array<double, 2> arm_abduction{0.08, 0.08};
};

inline JointAngles action_angles(Action action, const StyleParams& s, double t) {
  constexpr double pi = std::numbers::pi;
  JointAngles a;
  switch (action) {
    case Action::Walk: {
      const double th = 2.0 * pi * s.frequency * t;
      a.hip = {s.leg_swing * std::sin(th), s.leg_swing * std::sin(th + pi)};
      a.knee = {s.knee_flex * std::max(0.0, std::sin(th - 0.6 * pi)),
                s.knee_flex * std::max(0.0, std::sin(th + 0.4 * pi))};
      a.shoulder = {s.arm_swing * std::sin(th + s.arm_phase),
                    s.arm_swing * std::sin(th + s.arm_phase + pi)};
      a.elbow = {s.elbow_flex * (0.6 + 0.4 * std::sin(th + s.arm_phase)),
                 s.elbow_flex * (0.6 + 0.4 * std::sin(th + s.arm_phase + pi))};
      a.torso_roll = s.torso_sway * std::sin(th);
      a.torso_yaw = s.torso_twist * std::sin(th + pi);
      a.pelvis_yaw = s.hip_twist * std::sin(th);
      a.torso_pitch = 0.3 * s.torso_lean;
      a.pelvis_height = -s.bounce * std::abs(std::cos(th));
      a.pelvis_forward = 2.0 * 0.9 * s.limb_scale * std::sin(s.leg_swing) * s.frequency * t;
      break;
    }
    case Action::Kick: {
      const double bump = std::sin(pi * t);
      a.hip = {0.15 * bump, 2.6 * s.leg_swing * bump * bump};
      a.knee = {0.2 * bump, s.knee_flex * 1.6 * std::pow(std::sin(2.0 * pi * t), 2)};
      a.shoulder = {s.arm_swing * 1.2 * bump, -s.arm_swing * 0.8 * bump};
      a.elbow = {s.elbow_flex * (0.5 + bump), s.elbow_flex * (0.5 + 0.5 * bump)};
      a.arm_abduction = {0.08 + 2.0 * s.torso_sway * bump, 0.08 + 3.0 * s.torso_sway * bump};
      a.torso_pitch = -s.torso_lean * bump;
      a.torso_roll = s.torso_sway * bump;
      a.torso_yaw = s.torso_twist * std::sin(2.0 * pi * t);
      a.pelvis_yaw = s.hip_twist * bump;
      a.pelvis_height = -s.bounce * bump;
      break;
    }
    case Action::Throw: {
      const double ramp = smoothstep(t);
      const double bump = std::sin(pi * t);
      a.shoulder = {s.arm_swing * 0.6 * bump, s.arm_swing * (-2.0 + 6.0 * ramp)};
      a.elbow = {s.elbow_flex * (0.6 + 0.4 * bump), s.elbow_flex * (0.5 + 2.5 * bump)};
      a.arm_abduction = {0.1 + s.torso_sway * bump, 0.1 + 0.6 * bump};
      a.hip = {s.leg_swing * 0.8 * bump, -0.2 * s.leg_swing * bump};
      a.knee = {s.knee_flex * 0.4 * bump, s.knee_flex * 0.3 * bump};
      a.torso_yaw = s.torso_twist * 2.5 * (2.0 * ramp - 1.0);
      a.pelvis_yaw = s.hip_twist * (2.0 * ramp - 1.0);
      a.torso_pitch = s.torso_lean * (1.5 * ramp - 0.5);
      a.torso_roll = s.torso_sway * bump;
      a.pelvis_forward = 0.25 * s.limb_scale * ramp;
      break;
    }
    case Action::SitDown:
    case Action::StandUp: {
      const double u = action == Action::SitDown ? t : 1.0 - t;
      const double sit = smoothstep(u);
      const double bump = std::sin(pi * u);
      a.hip = {(0.5 * pi + s.leg_swing * 0.3) * sit, (0.5 * pi + s.leg_swing * 0.3) * sit};
      a.knee = {0.5 * pi * sit, 0.5 * pi * sit};
      a.pelvis_height = -0.45 * s.limb_scale * sit;
      a.pelvis_forward = -0.25 * s.limb_scale * sit;
      a.torso_pitch = s.torso_lean * (2.5 * bump + 0.5 * sit);
      a.torso_roll = s.torso_sway * bump;
      a.torso_yaw = s.torso_twist * bump;
      a.pelvis_yaw = s.hip_twist * 0.5 * bump;
      a.shoulder = {s.arm_swing * 1.5 * bump, s.arm_swing * 1.5 * bump};
      a.elbow = {s.elbow_flex * (1.0 + bump), s.elbow_flex * (1.0 + bump)};
      a.arm_abduction = {0.1 + s.torso_sway * 2.0 * bump, 0.1 + s.torso_sway * 2.0 * bump};
      break;
    }
  }
  return a;
}

}  // namespace detail

/// World-space pose of the kinematic chain at normalized time t in [0, 1],
/// in the performer's own frame (origin between the feet, facing +x).
inline WorldPose body_pose(Action action, const StyleParams& s, double t) {
  const auto a = detail::action_angles(action, s, t);
  const double ls = s.limb_scale;
  const double thigh = 0.45 * ls, shin = 0.45 * ls, upper_arm = 0.30 * ls, forearm = 0.28 * ls;
  const double torso_len = 0.52 * ls, head_len = 0.26 * ls;

  const Eigen::Vector3d pelvis(a.pelvis_forward, 0.0, 0.95 * ls + a.pelvis_height);
  const Eigen::Matrix3d pelvis_frame = Eigen::AngleAxisd(a.pelvis_yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Matrix3d torso_frame = (Eigen::AngleAxisd(a.torso_yaw, Eigen::Vector3d::UnitZ()) *
                                       Eigen::AngleAxisd(a.torso_roll, Eigen::Vector3d::UnitX()) *
                                       Eigen::AngleAxisd(a.torso_pitch, Eigen::Vector3d::UnitY()))
                                          .toRotationMatrix();

  WorldPose pose;
  const Eigen::Vector3d neck = pelvis + torso_frame * Eigen::Vector3d(0, 0, torso_len);
  pose[Joint::Head] = neck + torso_frame * Eigen::Vector3d(0, 0, head_len);
  for (int side = 0; side < 2; ++side) {
    const double lateral = side == 0 ? 1.0 : -1.0;  // left is +y
    const auto si = static_cast<std::size_t>(side);
    const Eigen::Vector3d shoulder =
        neck + torso_frame * Eigen::Vector3d(0, lateral * 0.5 * s.shoulder_width, -0.03 * ls);
    const Eigen::Vector3d elbow =
        shoulder + torso_frame * detail::limb_direction(a.shoulder[si], lateral * a.arm_abduction[si]) * upper_arm;
    const Eigen::Vector3d hand =
        elbow + torso_frame * detail::limb_direction(a.shoulder[si] + a.elbow[si], lateral * a.arm_abduction[si]) * forearm;
    const Eigen::Vector3d hip = pelvis + pelvis_frame * Eigen::Vector3d(0, lateral * 0.5 * s.hip_width, 0);
    const Eigen::Vector3d knee = hip + pelvis_frame * detail::limb_direction(a.hip[si], lateral * 0.03) * thigh;
    const Eigen::Vector3d foot =
        knee + pelvis_frame * detail::limb_direction(a.hip[si] - a.knee[si], lateral * 0.03) * shin;
    pose[side == 0 ? Joint::ShoulderLeft : Joint::ShoulderRight] = shoulder;
    pose[side == 0 ? Joint::ElbowLeft : Joint::ElbowRight] = elbow;
    pose[side == 0 ? Joint::HandLeft : Joint::HandRight] = hand;
    pose[side == 0 ? Joint::KneeLeft : Joint::KneeRight] = knee;
    pose[side == 0 ? Joint::FootLeft : Joint::FootRight] = foot;
  }
  return pose;
}

/// Rigid placement plus uniform scale applied to a world pose.
struct Similarity3 {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double scale = 1.0;

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return scale * (rotation * p) + translation; }

  WorldPose apply(const WorldPose& pose) const {
    WorldPose out;
    for (std::size_t i = 0; i < kJointCount; ++i) out[i] = apply(pose[i]);
    return out;
  }
};

/// Seeded placement: random heading and a position near the origin, the
/// motion path centred on it.
inline Similarity3 random_placement(Action action, const StyleParams& s, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, {0x91ace}));
  std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> offset(-0.4, 0.4);
  Similarity3 placement;
  placement.rotation = Eigen::AngleAxisd(heading(rng), Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const double travel = body_pose(action, s, 1.0)[Joint::Head].x() - body_pose(action, s, 0.0)[Joint::Head].x();
  placement.translation =
      Eigen::Vector3d(offset(rng), offset(rng), 0.0) - placement.rotation * Eigen::Vector3d(0.5 * travel, 0, 0);
  return placement;
}

inline ImagePose project_pose(const CameraModel& cam, const WorldPose& pose) {
  ImagePose out;
  for (std::size_t i = 0; i < kJointCount; ++i) out[i] = project_pixel(cam, pose[i]);
  return out;
}

inline SyntheticSequence generate_sequence(Action action, const StyleParams& style, int frames,
                                           std::uint64_t seed,
                                           const std::vector<CameraModel>& cameras) {
  if (frames < 2) throw Error(ErrorKind::InvalidParameter, "a sequence needs at least two frames");
  style.validate();
  SyntheticSequence seq;
  seq.action = action;
  seq.cameras = cameras;
  const Similarity3 placement = random_placement(action, style, seed);
  seq.world.reserve(static_cast<std::size_t>(frames));
  for (int k = 0; k < frames; ++k) {
    const double t = static_cast<double>(k) / (frames - 1);
    seq.world.push_back(placement.apply(body_pose(action, style, t)));
  }
  seq.images.resize(cameras.size());
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    std::mt19937_64 rng(derive_seed(seed, {0x401e, c}));
    std::normal_distribution<double> noise(0.0, 1.0);
    auto& img = seq.images[c];
    img.reserve(seq.world.size());
    for (const auto& pose : seq.world) {
      ImagePose p = project_pose(cameras[c], pose);
      if (style.noise_sigma > 0.0)
        for (auto& j : p.joints) j += style.noise_sigma * Eigen::Vector2d(noise(rng), noise(rng));
      img.push_back(p);
    }
  }
  return seq;
}

struct PopulationMember {
  Label label = Label::Female;
  int subject = 0;  // global subject id
  int instance = 0;
  StyleParams params;
};

/// Per-subject styles jittered around the class base by up to +-jitter
/// (relative), and per-instance styles jittered by a quarter of that.
/// Each subject also gets a vigor factor within 1 +- idiosyncrasy that
/// scales all motion amplitudes together, independent of class.
inline std::vector<PopulationMember> make_style_population(const std::array<StyleParams, 2>& bases,
                                                           int subjects, int instances, double jitter,
                                                           std::uint64_t seed, double idiosyncrasy = 0.0) {
  if (subjects < 1 || instances < 1)
    throw Error(ErrorKind::InvalidParameter, "subjects and instances must be >= 1");
  if (!(jitter >= 0.0 && jitter < 1.0)) throw Error(ErrorKind::InvalidParameter, "jitter must be in [0, 1)");
  if (!(idiosyncrasy >= 0.0 && idiosyncrasy < 1.0))
    throw Error(ErrorKind::InvalidParameter, "idiosyncrasy must be in [0, 1)");
  const auto amplitude = StyleParams::amplitude_mask();
  std::vector<PopulationMember> out;
  out.reserve(static_cast<std::size_t>(2 * subjects * instances));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int cls = 0; cls < 2; ++cls) {
    for (int s = 0; s < subjects; ++s) {
      const int subject_id = cls * subjects + s;
      std::mt19937_64 srng(derive_seed(seed, {0x5b, static_cast<std::uint64_t>(subject_id)}));
      StyleParams subject = bases[static_cast<std::size_t>(cls)];
      auto vars = subject.variables();
      for (double* v : vars) *v *= 1.0 + jitter * unit(srng);
      const double vigor = 1.0 + idiosyncrasy * unit(srng);
      for (std::size_t k = 0; k < vars.size(); ++k)
        if (amplitude[k]) *vars[k] *= vigor;
      for (int i = 0; i < instances; ++i) {
        std::mt19937_64 irng(derive_seed(seed, {0x1a, static_cast<std::uint64_t>(subject_id),
                                                static_cast<std::uint64_t>(i)}));
        StyleParams inst = subject;
        for (double* v : inst.variables()) *v *= 1.0 + 0.25 * jitter * unit(irng);
        out.push_back({static_cast<Label>(cls), subject_id, i, inst});
      }
    }
  }
  return out;
}

}  // namespace actstyle
