#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "actstyle/core.hpp"
#include "actstyle/dissimilarity.hpp"
#include "actstyle/geometry.hpp"

namespace actstyle {

/// Matching error matrix: rows are reference transitions, columns are target
/// transitions.
struct ErrorMatrix {
  Eigen::MatrixXd p;

  Eigen::Index rows() const { return p.rows(); }
  Eigen::Index cols() const { return p.cols(); }
};

/// Full comparison of two sequences: the error matrix plus every cell's
/// per-triplet deviations, kept for the triplet deviation matrix.
struct MatchingGrid {
  ErrorMatrix error;
  std::vector<TransitionResult> cells;  // row-major, rows = reference
  std::vector<bool> imputed;

  const TransitionResult& cell(Eigen::Index ref, Eigen::Index target) const {
    const auto idx = static_cast<std::size_t>(ref * error.cols() + target);
    if (ref < 0 || target < 0 || ref >= error.rows() || target >= error.cols() || idx >= cells.size())
      throw Error(ErrorKind::InternalConsistency, "missing cached transition comparison");
    return cells[idx];
  }
};

/// Compares every target transition (view 1) with every reference transition
/// (view 2). Cells without enough valid triplets are imputed with the largest
/// valid entry.
inline MatchingGrid compare_sequences(const PoseSequence& target, const PoseSequence& reference,
                                      const FundamentalMatrix& f, const DissimilarityConfig& cfg) {
  cfg.validate();
  const std::size_t m = target.transition_count();
  const std::size_t n = reference.transition_count();
  if (m == 0 || n == 0) throw Error(ErrorKind::EmptyInput, "sequence has no pose transitions");
  for (const auto* seq : {&target, &reference})
    for (const auto& pose : seq->key_poses)
      if (!pose.finite()) throw Error(ErrorKind::InvalidParameter, "non-finite joint coordinates");

  // Homographies depend only on the (target pose, reference pose) pair, so
  // they are computed once and shared by the transitions that use them.
  const std::size_t tp = target.key_poses.size();
  const std::size_t rp = reference.key_poses.size();
  std::vector<std::optional<TripletHomographies>> pose_pairs(tp * rp);
  auto homographies = [&](std::size_t t, std::size_t r) -> const TripletHomographies& {
    auto& slot = pose_pairs[t * rp + r];
    if (!slot) slot = triplet_homographies(target.key_poses[t], reference.key_poses[r], f);
    return *slot;
  };

  MatchingGrid grid;
  grid.error.p.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  grid.cells.resize(n * m);
  grid.imputed.assign(n * m, false);
  double max_valid = -1.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t t = 0; t < m; ++t) {
      TransitionResult res = combine_transition(homographies(t, r), homographies(t + 1, r + 1), cfg);
      if (res.sufficient) max_valid = std::max(max_valid, res.mad);
      grid.cells[r * m + t] = std::move(res);
    }
  }
  if (max_valid < 0.0)
    throw Error(ErrorKind::DegenerateConfiguration, "no transition pair has enough valid triplets");
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t t = 0; t < m; ++t) {
      const auto& res = grid.cells[r * m + t];
      grid.imputed[r * m + t] = !res.sufficient;
      grid.error.p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) =
          res.sufficient ? res.mad : max_valid;
    }
  return grid;
}

inline ErrorMatrix build_error_matrix(const PoseSequence& target, const PoseSequence& reference,
                                      const FundamentalMatrix& f, const DissimilarityConfig& cfg) {
  return compare_sequences(target, reference, f, cfg).error;
}

/// Column (0-based) of the smallest entry in a reference row; ties go to the
/// smallest column.
inline Eigen::Index best_match(const ErrorMatrix& p, Eigen::Index ref_index) {
  if (ref_index < 0 || ref_index >= p.rows())
    throw Error(ErrorKind::Bounds, "reference index " + std::to_string(ref_index) + " out of range");
  if (p.cols() == 0) throw Error(ErrorKind::EmptyInput, "error matrix has no columns");
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < p.cols(); ++j)
    if (p.p(ref_index, j) < p.p(ref_index, best)) best = j;
  return best;
}

struct AlignmentPath {
  /// (reference index, target index), 0-based, from (0,0) to (n-1,m-1).
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  double cumulative_cost = 0.0;
};

/// Minimal-cost monotone path with steps (+1,0), (0,+1), (+1,+1). Among
/// equal-cost predecessors the diagonal wins, then the reference advance.
inline AlignmentPath align(const ErrorMatrix& p) {
  const Eigen::Index n = p.rows();
  const Eigen::Index m = p.cols();
  if (n == 0 || m == 0) throw Error(ErrorKind::EmptyInput, "empty error matrix");

  constexpr double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, m, inf);
  // 0 = start, 1 = diagonal, 2 = reference advance, 3 = target advance
  Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic> from(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == 0 && j == 0) {
        cost(0, 0) = p.p(0, 0);
        from(0, 0) = 0;
        continue;
      }
      double best = inf;
      unsigned char step = 0;
      if (i > 0 && j > 0 && cost(i - 1, j - 1) < best) {
        best = cost(i - 1, j - 1);
        step = 1;
      }
      if (i > 0 && cost(i - 1, j) < best) {
        best = cost(i - 1, j);
        step = 2;
      }
      if (j > 0 && cost(i, j - 1) < best) {
        best = cost(i, j - 1);
        step = 3;
      }
      cost(i, j) = best + p.p(i, j);
      from(i, j) = step;
    }
  }

  AlignmentPath path;
  path.cumulative_cost = cost(n - 1, m - 1);
  Eigen::Index i = n - 1, j = m - 1;
  while (true) {
    path.pairs.emplace_back(i, j);
    const unsigned char step = from(i, j);
    if (step == 0) break;
    if (step == 1) {
      --i;
      --j;
    } else if (step == 2) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

/// Row-major CSV, one line per reference transition.
inline void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

}  // namespace actstyle
