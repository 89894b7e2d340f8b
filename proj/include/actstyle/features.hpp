#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "actstyle/alignment.hpp"
#include "actstyle/core.hpp"
#include "actstyle/dissimilarity.hpp"

namespace actstyle {

/// Triplet deviation matrix: one row per triplet, one column per reference
/// transition.
struct TDM {
  Eigen::MatrixXd t;
};

/// Pose deviation matrix: the error matrix resampled to a fixed width.
struct PDM {
  Eigen::MatrixXd p;
};

/// Style-vector layout shared by every sample of a study.
struct StudyDims {
  int triplets = static_cast<int>(kTripletCount);
  int reference_transitions = 15;
  int pdm_width = 15;

  int dimension() const {
    return triplets * reference_transitions + reference_transitions * pdm_width;
  }

  friend bool operator==(const StudyDims&, const StudyDims&) = default;
};

/// Row-major TDM followed by row-major PDM.
struct StyleVector {
  Eigen::VectorXd x;
};

inline TDM compute_tdm(const AlignmentPath& path, const MatchingGrid& grid, double deviation_cap) {
  const Eigen::Index n = grid.error.rows();
  if (path.pairs.empty()) throw Error(ErrorKind::InvalidParameter, "empty alignment path");
  TDM out;
  out.t = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(kTripletCount), n, deviation_cap);
  std::vector<Eigen::Index> chosen(static_cast<std::size_t>(n), -1);
  for (const auto& [ref, target] : path.pairs) {
    if (ref < 0 || ref >= n)
      throw Error(ErrorKind::InternalConsistency, "alignment path leaves the error matrix");
    grid.cell(ref, target);  // validates presence
    auto& best = chosen[static_cast<std::size_t>(ref)];
    if (best < 0 || grid.error.p(ref, target) < grid.error.p(ref, best)) best = target;
  }
  for (Eigen::Index ref = 0; ref < n; ++ref) {
    const Eigen::Index target = chosen[static_cast<std::size_t>(ref)];
    if (target < 0) throw Error(ErrorKind::InternalConsistency, "reference transition not on path");
    const auto& cell = grid.cell(ref, target);
    for (std::size_t i = 0; i < kTripletCount; ++i)
      if (cell.deviations[i].valid)
        out.t(static_cast<Eigen::Index>(i), ref) = std::min(cell.deviations[i].deviation, deviation_cap);
  }
  return out;
}

/// Linear resampling of each row to `width` columns with endpoints kept.
inline PDM compute_pdm(const ErrorMatrix& p, int width) {
  if (width < 2) throw Error(ErrorKind::InvalidParameter, "PDM width must be >= 2");
  if (p.rows() == 0 || p.cols() == 0) throw Error(ErrorKind::EmptyInput, "empty error matrix");
  const Eigen::Index m = p.cols();
  PDM out;
  out.p.resize(p.rows(), width);
  for (int k = 0; k < width; ++k) {
    if (m == 1) {
      out.p.col(k) = p.p.col(0);
      continue;
    }
    const double pos = static_cast<double>(k) * static_cast<double>(m - 1) / (width - 1);
    const auto lo = std::min(static_cast<Eigen::Index>(std::floor(pos)), m - 2);
    const double frac = pos - static_cast<double>(lo);
    out.p.col(k) = (1.0 - frac) * p.p.col(lo) + frac * p.p.col(lo + 1);
  }
  return out;
}

inline StyleVector serialize(const TDM& t, const PDM& p, const StudyDims& dims) {
  if (t.t.rows() != dims.triplets || t.t.cols() != dims.reference_transitions ||
      p.p.rows() != dims.reference_transitions || p.p.cols() != dims.pdm_width)
    throw Error(ErrorKind::Dimension, "TDM/PDM shape does not match the study layout");
  StyleVector out;
  out.x.resize(dims.dimension());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < t.t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.t.cols(); ++j) out.x(k++) = t.t(i, j);
  for (Eigen::Index i = 0; i < p.p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.p.cols(); ++j) out.x(k++) = p.p(i, j);
  return out;
}

inline std::pair<TDM, PDM> deserialize(const StyleVector& v, const StudyDims& dims) {
  if (v.x.size() != dims.dimension())
    throw Error(ErrorKind::Dimension, "style vector length does not match the study layout");
  TDM t{Eigen::MatrixXd(dims.triplets, dims.reference_transitions)};
  PDM p{Eigen::MatrixXd(dims.reference_transitions, dims.pdm_width)};
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < t.t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.t.cols(); ++j) t.t(i, j) = v.x(k++);
  for (Eigen::Index i = 0; i < p.p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.p.cols(); ++j) p.p(i, j) = v.x(k++);
  return {std::move(t), std::move(p)};
}

/// Binary 8-bit PGM, values mapped linearly from [0, cap] to [0, 255].
inline void write_pgm(const Eigen::MatrixXd& m, double cap, const std::string& path) {
  if (!(cap > 0.0)) throw Error(ErrorKind::InvalidParameter, "heatmap cap must be > 0");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  out << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = std::clamp(m(i, j) / cap, 0.0, 1.0);
      row[static_cast<std::size_t>(j)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

}  // namespace actstyle
