#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "actstyle/alignment.hpp"
#include "actstyle/core.hpp"
#include "actstyle/dissimilarity.hpp"
#include "actstyle/features.hpp"
#include "actstyle/geometry.hpp"

namespace actstyle {

struct PipelineConfig {
  DissimilarityConfig dissimilarity;
  int key_poses = 16;
  int pdm_width = 0;  // 0 means the reference transition count

  StudyDims dims() const {
    const int n = key_poses - 1;
    return StudyDims{static_cast<int>(kTripletCount), n, pdm_width > 0 ? pdm_width : n};
  }

  void validate() const {
    dissimilarity.validate();
    if (key_poses < 2) throw Error(ErrorKind::InvalidParameter, "key-pose count must be >= 2");
    if (pdm_width != 0 && pdm_width < 2) throw Error(ErrorKind::InvalidParameter, "PDM width must be >= 2");
  }
};

/// Everything computed while comparing one target sequence to the reference.
struct StyleExtraction {
  FundamentalMatrix coarse_f;
  FundamentalMatrix f;
  MatchingGrid grid;
  AlignmentPath path;
  TDM tdm;
  PDM pdm;
  StyleVector x;
};

/// Correspondences between matched key poses: every joint of every pair.
inline std::vector<Correspondence> pose_correspondences(
    const PoseSequence& target, const PoseSequence& reference,
    const std::vector<std::pair<std::size_t, std::size_t>>& pose_pairs) {
  std::vector<Correspondence> out;
  out.reserve(pose_pairs.size() * kJointCount);
  for (const auto& [t, r] : pose_pairs)
    for (std::size_t j = 0; j < kJointCount; ++j)
      out.push_back({homogeneous(target.key_poses[t][j]), homogeneous(reference.key_poses[r][j])});
  return out;
}

/// Uniform-time pairing of target and reference key poses.
inline std::vector<std::pair<std::size_t, std::size_t>> uniform_pose_pairs(std::size_t target_count,
                                                                           std::size_t reference_count) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t t = 0; t < target_count; ++t) {
    const double pos = target_count == 1 ? 0.0
                                         : static_cast<double>(t) * static_cast<double>(reference_count - 1) /
                                               static_cast<double>(target_count - 1);
    pairs.emplace_back(t, static_cast<std::size_t>(std::lround(pos)));
  }
  return pairs;
}

/// Pose pairs implied by an alignment of transitions: both endpoints of each
/// matched transition pair.
inline std::vector<std::pair<std::size_t, std::size_t>> path_pose_pairs(const AlignmentPath& path) {
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [ref, target] : path.pairs) {
    const auto r = static_cast<std::size_t>(ref);
    const auto t = static_cast<std::size_t>(target);
    pairs.emplace(t, r);
    pairs.emplace(t + 1, r + 1);
  }
  return {pairs.begin(), pairs.end()};
}

/// Aligns a target key-pose sequence (view 1) to the reference (view 2) and
/// builds its style vector. F is estimated from uniformly paired key poses,
/// then re-estimated once from the alignment.
inline StyleExtraction extract_style(const PoseSequence& target, const PoseSequence& reference,
                                     const PipelineConfig& cfg) {
  cfg.validate();
  if (reference.transition_count() != static_cast<std::size_t>(cfg.key_poses - 1))
    throw Error(ErrorKind::Dimension, "reference key-pose count does not match the configuration");
  if (target.transition_count() == 0) throw Error(ErrorKind::EmptyInput, "target has no transitions");

  StyleExtraction out;
  const auto coarse = pose_correspondences(
      target, reference, uniform_pose_pairs(target.key_poses.size(), reference.key_poses.size()));
  out.coarse_f = estimate_fundamental(coarse);
  const MatchingGrid coarse_grid = compare_sequences(target, reference, out.coarse_f, cfg.dissimilarity);
  const AlignmentPath coarse_path = align(coarse_grid.error);

  out.f = estimate_fundamental(pose_correspondences(target, reference, path_pose_pairs(coarse_path)));
  out.grid = compare_sequences(target, reference, out.f, cfg.dissimilarity);
  out.path = align(out.grid.error);

  const StudyDims dims = cfg.dims();
  out.tdm = compute_tdm(out.path, out.grid, cfg.dissimilarity.deviation_cap);
  out.pdm = compute_pdm(out.grid.error, dims.pdm_width);
  out.x = serialize(out.tdm, out.pdm, dims);
  return out;
}

inline PoseSequence key_pose_sequence(const std::vector<ImagePose>& frames, int key_poses) {
  return PoseSequence{select_key_poses(frames, static_cast<std::size_t>(key_poses))};
}

}  // namespace actstyle
