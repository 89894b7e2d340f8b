#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "actstyle/core.hpp"
#include "actstyle/features.hpp"

namespace actstyle {

/// Binary style label: w0 is female, w1 is male.
enum class Label : std::uint8_t { Female = 0, Male = 1 };

inline std::string_view to_string(Label l) { return l == Label::Female ? "female" : "male"; }

inline Label other(Label l) { return l == Label::Female ? Label::Male : Label::Female; }

inline Label parse_label(std::string_view s) {
  if (s == "female" || s == "w0" || s == "0") return Label::Female;
  if (s == "male" || s == "w1" || s == "1") return Label::Male;
  throw Error(ErrorKind::Parse, "unknown label '" + std::string(s) + "'");
}

namespace detail {

inline Eigen::MatrixXd stack_rows(std::span<const StyleVector> samples) {
  const Eigen::Index d = samples.front().x.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), d);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (samples[k].x.size() != d)
      throw Error(ErrorKind::Dimension, "style vectors of different dimensions in one study");
    if (!samples[k].x.allFinite()) throw Error(ErrorKind::InvalidParameter, "non-finite style vector");
    x.row(static_cast<Eigen::Index>(k)) = samples[k].x.transpose();
  }
  return x;
}

// Flips each column so that its largest-magnitude entry is positive.
inline void fix_column_signs(Eigen::MatrixXd& basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    Eigen::Index k = 0;
    basis.col(j).cwiseAbs().maxCoeff(&k);
    if (basis(k, j) < 0.0) basis.col(j) *= -1.0;
  }
}

}  // namespace detail

/// PCA model over style vectors: the eigenstyle basis.
struct EigenstyleModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;        // d x d', orthonormal columns
  Eigen::VectorXd eigenvalues;  // d' leading scatter eigenvalues, descending
  Eigen::VectorXd spectrum;     // every nonzero-rank scatter eigenvalue, descending
  int d_prime = 0;
  int requested_d_prime = 0;
  /// Sum of squared reconstruction residuals over the training samples.
  double reconstruction_error = 0.0;

  bool clamped() const { return d_prime < requested_d_prime; }

  /// Criterion value for a smaller subspace, from the retained spectrum.
  double reconstruction_error_at(int k) const {
    k = std::clamp(k, 0, static_cast<int>(spectrum.size()));
    return spectrum.tail(spectrum.size() - k).sum();
  }

  /// Same model restricted to its leading k eigenstyles.
  EigenstyleModel truncated(int k) const {
    if (k < 1) throw Error(ErrorKind::InvalidParameter, "d' must be >= 1");
    EigenstyleModel out = *this;
    out.requested_d_prime = k;
    out.d_prime = std::min(k, d_prime);
    out.basis = basis.leftCols(out.d_prime);
    out.eigenvalues = eigenvalues.head(out.d_prime);
    out.reconstruction_error = reconstruction_error_at(out.d_prime);
    return out;
  }
};

/// Eigenstyles from the n x n Gram matrix of centered samples; d' is clamped
/// to the scatter rank.
inline EigenstyleModel fit_pca(std::span<const StyleVector> samples, int d_prime) {
  if (samples.size() < 2) throw Error(ErrorKind::InsufficientData, "PCA needs at least two samples");
  if (d_prime < 1) throw Error(ErrorKind::InvalidParameter, "d' must be >= 1");
  const Eigen::MatrixXd x = detail::stack_rows(samples);

  EigenstyleModel model;
  model.requested_d_prime = d_prime;
  model.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd gram = centered * centered.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success)
    throw Error(ErrorKind::Conditioning, "Gram eigen-decomposition failed");

  // Ascending order from Eigen; walk it backwards.
  const Eigen::Index n = gram.rows();
  const double top = std::max(eig.eigenvalues()(n - 1), 0.0);
  const double tol = top * 1e-12 * static_cast<double>(n);
  int rank = 0;
  for (Eigen::Index i = n - 1; i >= 0 && eig.eigenvalues()(i) > tol; --i) ++rank;

  model.spectrum.resize(rank);
  for (int i = 0; i < rank; ++i) model.spectrum(i) = eig.eigenvalues()(n - 1 - i);
  model.d_prime = std::min(d_prime, rank);
  model.eigenvalues = model.spectrum.head(model.d_prime);
  model.basis.resize(x.cols(), model.d_prime);
  for (int i = 0; i < model.d_prime; ++i) {
    const Eigen::VectorXd u = eig.eigenvectors().col(n - 1 - i);
    model.basis.col(i) = centered.transpose() * u / std::sqrt(model.spectrum(i));
  }
  if (model.d_prime > 0) {
    // One Householder pass tightens orthonormality lost to small eigenvalues.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(model.basis);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(x.cols(), model.d_prime);
    const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(model.d_prime, model.d_prime);
    for (int i = 0; i < model.d_prime; ++i)
      if (r(i, i) < 0.0) q.col(i) *= -1.0;
    model.basis = std::move(q);
    detail::fix_column_signs(model.basis);
  }

  const Eigen::MatrixXd coords = centered * model.basis;
  model.reconstruction_error = (centered - coords * model.basis.transpose()).squaredNorm();
  return model;
}

struct StyleProjection {
  Eigen::VectorXd coords;
};

inline StyleProjection pca_project(const StyleVector& x, const EigenstyleModel& model) {
  if (x.x.size() != model.mean.size())
    throw Error(ErrorKind::Dimension, "style vector dimension " + std::to_string(x.x.size()) +
                                          " != model dimension " + std::to_string(model.mean.size()));
  return StyleProjection{model.basis.transpose() * (x.x - model.mean)};
}

inline StyleVector pca_reconstruct(const StyleProjection& p, const EigenstyleModel& model) {
  if (p.coords.size() != model.basis.cols())
    throw Error(ErrorKind::Dimension, "projection dimension does not match the model");
  return StyleVector{model.mean + model.basis * p.coords};
}

/// Closest odd integer to sqrt(n); the tie between two odd neighbours goes
/// up. Clamped to n.
inline int knn_k(std::size_t n) {
  if (n == 0) throw Error(ErrorKind::EmptyInput, "empty training set");
  const double half = (std::sqrt(static_cast<double>(n)) - 1.0) / 2.0;
  const int k = 2 * static_cast<int>(std::floor(half + 0.5)) + 1;
  return std::min<int>(std::max(k, 1), static_cast<int>(n));
}

struct LabeledProjection {
  StyleProjection projection;
  Label label = Label::Female;
};

/// Euclidean k-NN majority vote. Distance ties keep training order.
inline Label knn_classify(const StyleProjection& q, std::span<const LabeledProjection> train,
                          int k_override = 0) {
  if (train.empty()) throw Error(ErrorKind::EmptyInput, "empty training set");
  const int k = k_override > 0 ? std::min<int>(k_override, static_cast<int>(train.size()))
                               : knn_k(train.size());
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].projection.coords.size() != q.coords.size())
      throw Error(ErrorKind::Dimension, "projection dimensions differ");
    dist.emplace_back((train[i].projection.coords - q.coords).squaredNorm(), i);
  }
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  int male = 0;
  for (int i = 0; i < k; ++i)
    if (train[dist[static_cast<std::size_t>(i)].second].label == Label::Male) ++male;
  if (2 * male == k) return train[dist.front().second].label;  // only with an even override
  return 2 * male > k ? Label::Male : Label::Female;
}

/// Fisher discriminant: y = w.x, decided against the threshold c.
struct LdaModel {
  Eigen::VectorXd w;
  double c = 0.0;
  Label positive_label = Label::Female;  // side with w.x > c
  double ridge = 0.0;                    // lambda actually used
  double projected_mean_female = 0.0;
  double projected_mean_male = 0.0;
};

struct LdaOptions {
  /// Ridge lambda = ridge_scale * trace(S_W) / d; zero means plain inverse.
  double ridge_scale = 1e-6;
};

inline LdaModel fit_lda(std::span<const StyleVector> samples, std::span<const Label> labels,
                        const LdaOptions& opts = {}) {
  if (samples.size() != labels.size())
    throw Error(ErrorKind::Dimension, "sample and label counts differ");
  if (samples.empty()) throw Error(ErrorKind::MissingClass, "no training samples");
  const Eigen::MatrixXd x = detail::stack_rows(samples);
  const Eigen::Index d = x.cols();

  Eigen::VectorXd m0 = Eigen::VectorXd::Zero(d), m1 = Eigen::VectorXd::Zero(d);
  int n0 = 0, n1 = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (labels[k] == Label::Female) {
      m0 += samples[k].x;
      ++n0;
    } else {
      m1 += samples[k].x;
      ++n1;
    }
  }
  if (n0 == 0 || n1 == 0) throw Error(ErrorKind::MissingClass, "both classes must be present");
  m0 /= n0;
  m1 /= n1;
  const Eigen::VectorXd diff = m0 - m1;
  if (!(diff.norm() > 0.0)) throw Error(ErrorKind::DegenerateSeparation, "class means coincide");

  Eigen::MatrixXd centered(x.rows(), d);
  for (std::size_t k = 0; k < samples.size(); ++k)
    centered.row(static_cast<Eigen::Index>(k)) =
        (samples[k].x - (labels[k] == Label::Female ? m0 : m1)).transpose();
  const double trace = centered.squaredNorm();

  LdaModel model;
  model.ridge = opts.ridge_scale * trace / static_cast<double>(d);
  if (trace == 0.0) {
    model.w = diff;
  } else if (model.ridge > 0.0) {
    // (S_W + lambda I)^-1 diff through the thin SVD of the centered samples,
    // S_W = V diag(s^2) V^T, without forming the d x d matrix.
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::MatrixXd& v = svd.matrixV();
    const Eigen::VectorXd s2 = svd.singularValues().array().square();
    const Eigen::VectorXd coeff = v.transpose() * diff;
    const Eigen::VectorXd in_span = v * coeff;
    const Eigen::VectorXd scaled = (coeff.array() / (s2.array() + model.ridge)).matrix();
    model.w = (diff - in_span) / model.ridge + v * scaled;
  } else {
    const Eigen::MatrixXd sw = centered.transpose() * centered;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sw);
    if (!lu.isInvertible())
      throw Error(ErrorKind::DegenerateSeparation, "within-class scatter is singular");
    model.w = lu.solve(diff);
  }
  if (!model.w.allFinite() || !(model.w.norm() > 0.0))
    throw Error(ErrorKind::DegenerateSeparation, "discriminant direction vanished");

  model.projected_mean_female = model.w.dot(m0);
  model.projected_mean_male = model.w.dot(m1);
  model.c = 0.5 * (model.projected_mean_female + model.projected_mean_male);
  model.positive_label = model.projected_mean_female > model.c ? Label::Female : Label::Male;
  return model;
}

inline double lda_project(const StyleVector& x, const LdaModel& model) {
  if (x.x.size() != model.w.size())
    throw Error(ErrorKind::Dimension, "style vector dimension does not match the LDA model");
  return model.w.dot(x.x);
}

/// positive_label iff w.x > c; equality goes to the other label.
inline Label lda_classify(const StyleVector& x, const LdaModel& model) {
  const double y = lda_project(x, model);
  return y > model.c ? model.positive_label : other(model.positive_label);
}

}  // namespace actstyle
