#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "actstyle/core.hpp"
#include "actstyle/features.hpp"
#include "actstyle/style.hpp"

namespace actstyle {

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr char kModelMagic[4] = {'A', 'S', 'T', 'M'};
inline constexpr std::uint8_t kFlattenTdmThenPdmRowMajor = 1;

enum class ModelKind : std::uint8_t { Pca = 1, Lda = 2, Features = 3 };

/// PCA model plus the labeled training projections k-NN needs.
struct PcaClassifier {
  StudyDims dims;
  EigenstyleModel model;
  std::vector<LabeledProjection> training;
};

struct LdaClassifier {
  StudyDims dims;
  LdaModel model;
};

namespace detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

  template <typename T>
  void scalar(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    bytes(buf, sizeof(T));
  }

  void f64(double v) { scalar(v); }
  void u64(std::uint64_t v) { scalar(v); }

  void vec(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw Error(ErrorKind::Format, name_ + ": truncated model file");
  }

  template <typename T>
  T scalar() {
    unsigned char buf[sizeof(T)];
    bytes(buf, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }

  double f64() {
    const double v = scalar<double>();
    if (!std::isfinite(v)) throw Error(ErrorKind::Format, name_ + ": non-finite value in model file");
    return v;
  }

  std::uint64_t count(std::uint64_t limit, const char* what) {
    const auto v = scalar<std::uint64_t>();
    if (v > limit) throw Error(ErrorKind::Format, name_ + ": implausible " + what);
    return v;
  }

  Eigen::VectorXd vec(std::uint64_t n) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f64();
    return v;
  }

  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof())
      throw Error(ErrorKind::Format, name_ + ": trailing bytes after model data");
  }

  const std::string& name() const { return name_; }

 private:
  std::istream& in_;
  std::string name_;
};

inline void write_header(BinaryWriter& w, ModelKind kind, const StudyDims& dims) {
  w.bytes(kModelMagic, 4);
  w.scalar<std::uint32_t>(kModelFormatVersion);
  w.scalar<std::uint8_t>(static_cast<std::uint8_t>(kind));
  w.scalar<std::uint8_t>(kFlattenTdmThenPdmRowMajor);
  w.scalar<std::uint16_t>(0);
  w.u64(static_cast<std::uint64_t>(dims.dimension()));
  w.u64(static_cast<std::uint64_t>(dims.triplets));
  w.u64(static_cast<std::uint64_t>(dims.reference_transitions));
  w.u64(static_cast<std::uint64_t>(dims.pdm_width));
}

inline StudyDims read_header(BinaryReader& r, ModelKind expected) {
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kModelMagic, 4) != 0) throw Error(ErrorKind::Format, r.name() + ": not a model file");
  const auto version = r.scalar<std::uint32_t>();
  if (version != kModelFormatVersion)
    throw Error(ErrorKind::Format, r.name() + ": unsupported model format version " + std::to_string(version));
  const auto kind = r.scalar<std::uint8_t>();
  if (kind != static_cast<std::uint8_t>(expected))
    throw Error(ErrorKind::Format, r.name() + (expected == ModelKind::Pca   ? ": not a PCA model"
                                               : expected == ModelKind::Lda ? ": not an LDA model"
                                                                            : ": not a feature file"));
  if (r.scalar<std::uint8_t>() != kFlattenTdmThenPdmRowMajor)
    throw Error(ErrorKind::Format, r.name() + ": unknown flatten order");
  r.scalar<std::uint16_t>();
  constexpr std::uint64_t kMaxDim = 1u << 24;
  const auto d = r.count(kMaxDim, "dimension");
  StudyDims dims;
  dims.triplets = static_cast<int>(r.count(kMaxDim, "triplet count"));
  dims.reference_transitions = static_cast<int>(r.count(kMaxDim, "transition count"));
  dims.pdm_width = static_cast<int>(r.count(kMaxDim, "PDM width"));
  if (static_cast<std::uint64_t>(dims.dimension()) != d)
    throw Error(ErrorKind::Format, r.name() + ": dimension does not match N, n and W");
  return dims;
}

inline Label read_label(BinaryReader& r) {
  const auto v = r.scalar<std::uint8_t>();
  if (v > 1) throw Error(ErrorKind::Format, r.name() + ": bad label byte");
  return static_cast<Label>(v);
}

inline void write_sidecar(const std::filesystem::path& path, const nlohmann::json& meta) {
  std::ofstream out(path.string() + ".json", std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + ".json for writing");
  out << meta.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string() + ".json");
}

inline std::ofstream open_model(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  return out;
}

inline std::ifstream open_model_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return in;
}

}  // namespace detail

/// Binary layout after the common header: d', requested d', eigenvalues,
/// retained spectrum, mean, basis (column by column), then each training
/// sample as a label byte followed by its d' coordinates.
inline void save_pca(const PcaClassifier& c, const std::filesystem::path& path,
                     const nlohmann::json& metadata = nlohmann::json::object()) {
  const auto d = static_cast<Eigen::Index>(c.dims.dimension());
  if (c.model.mean.size() != d || c.model.basis.rows() != d || c.model.basis.cols() != c.model.d_prime)
    throw Error(ErrorKind::Dimension, "PCA model does not match the study layout");
  auto out = detail::open_model(path);
  detail::BinaryWriter w(out);
  detail::write_header(w, ModelKind::Pca, c.dims);
  w.u64(static_cast<std::uint64_t>(c.model.d_prime));
  w.u64(static_cast<std::uint64_t>(c.model.requested_d_prime));
  w.u64(static_cast<std::uint64_t>(c.model.spectrum.size()));
  w.u64(c.training.size());
  w.vec(c.model.eigenvalues);
  w.vec(c.model.spectrum);
  w.vec(c.model.mean);
  for (Eigen::Index j = 0; j < c.model.basis.cols(); ++j) w.vec(c.model.basis.col(j));
  for (const auto& t : c.training) {
    if (t.projection.coords.size() != c.model.d_prime)
      throw Error(ErrorKind::Dimension, "training projection has the wrong length");
    w.scalar<std::uint8_t>(static_cast<std::uint8_t>(t.label));
    w.vec(t.projection.coords);
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
  nlohmann::json meta = metadata;
  meta["kind"] = "pca";
  meta["format_version"] = kModelFormatVersion;
  meta["d"] = c.dims.dimension();
  meta["N"] = c.dims.triplets;
  meta["n"] = c.dims.reference_transitions;
  meta["W"] = c.dims.pdm_width;
  meta["flatten_order"] = "tdm_then_pdm_row_major";
  meta["d_prime"] = c.model.d_prime;
  meta["training_samples"] = c.training.size();
  detail::write_sidecar(path, meta);
}

inline PcaClassifier load_pca(const std::filesystem::path& path) {
  auto in = detail::open_model_in(path);
  detail::BinaryReader r(in, path.string());
  PcaClassifier c;
  c.dims = detail::read_header(r, ModelKind::Pca);
  const auto d = static_cast<std::uint64_t>(c.dims.dimension());
  c.model.d_prime = static_cast<int>(r.count(d, "d'"));
  c.model.requested_d_prime = static_cast<int>(r.count(1u << 24, "requested d'"));
  const auto rank = r.count(d, "spectrum length");
  const auto samples = r.count(1u << 24, "training sample count");
  if (static_cast<std::uint64_t>(c.model.d_prime) > rank)
    throw Error(ErrorKind::Format, path.string() + ": d' exceeds the spectrum length");
  c.model.eigenvalues = r.vec(static_cast<std::uint64_t>(c.model.d_prime));
  c.model.spectrum = r.vec(rank);
  c.model.mean = r.vec(d);
  c.model.basis.resize(static_cast<Eigen::Index>(d), c.model.d_prime);
  for (int j = 0; j < c.model.d_prime; ++j) c.model.basis.col(j) = r.vec(d);
  c.training.resize(samples);
  for (auto& t : c.training) {
    t.label = detail::read_label(r);
    t.projection.coords = r.vec(static_cast<std::uint64_t>(c.model.d_prime));
  }
  r.expect_end();
  c.model.reconstruction_error = c.model.reconstruction_error_at(c.model.d_prime);
  return c;
}

/// Binary layout after the common header: w, c, positive label byte, ridge,
/// projected class means (female, male).
inline void save_lda(const LdaClassifier& c, const std::filesystem::path& path,
                     const nlohmann::json& metadata = nlohmann::json::object()) {
  if (c.model.w.size() != c.dims.dimension())
    throw Error(ErrorKind::Dimension, "LDA model does not match the study layout");
  auto out = detail::open_model(path);
  detail::BinaryWriter w(out);
  detail::write_header(w, ModelKind::Lda, c.dims);
  w.vec(c.model.w);
  w.f64(c.model.c);
  w.scalar<std::uint8_t>(static_cast<std::uint8_t>(c.model.positive_label));
  w.f64(c.model.ridge);
  w.f64(c.model.projected_mean_female);
  w.f64(c.model.projected_mean_male);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
  nlohmann::json meta = metadata;
  meta["kind"] = "lda";
  meta["format_version"] = kModelFormatVersion;
  meta["d"] = c.dims.dimension();
  meta["N"] = c.dims.triplets;
  meta["n"] = c.dims.reference_transitions;
  meta["W"] = c.dims.pdm_width;
  meta["flatten_order"] = "tdm_then_pdm_row_major";
  meta["threshold"] = c.model.c;
  meta["positive_label"] = std::string(to_string(c.model.positive_label));
  detail::write_sidecar(path, meta);
}

inline LdaClassifier load_lda(const std::filesystem::path& path) {
  auto in = detail::open_model_in(path);
  detail::BinaryReader r(in, path.string());
  LdaClassifier c;
  c.dims = detail::read_header(r, ModelKind::Lda);
  c.model.w = r.vec(static_cast<std::uint64_t>(c.dims.dimension()));
  c.model.c = r.f64();
  c.model.positive_label = detail::read_label(r);
  c.model.ridge = r.f64();
  c.model.projected_mean_female = r.f64();
  c.model.projected_mean_male = r.f64();
  r.expect_end();
  return c;
}

/// One extracted style vector with its provenance.
struct FeatureRecord {
  std::string action;
  int subject = 0;
  int instance = 0;
  int camera = 0;
  Label label = Label::Female;
  StyleVector x;
};

struct FeatureSet {
  StudyDims dims;
  std::vector<FeatureRecord> records;
};

/// Binary layout after the common header: sample count, then per sample the
/// action name (length-prefixed), subject, instance, camera, label byte and
/// d values.
inline void save_features(const FeatureSet& fs, const std::filesystem::path& path) {
  auto out = detail::open_model(path);
  detail::BinaryWriter w(out);
  detail::write_header(w, ModelKind::Features, fs.dims);
  w.u64(fs.records.size());
  for (const auto& r : fs.records) {
    if (r.x.x.size() != fs.dims.dimension())
      throw Error(ErrorKind::Dimension, "feature vector does not match the study layout");
    w.u64(r.action.size());
    w.bytes(r.action.data(), r.action.size());
    w.scalar<std::int32_t>(r.subject);
    w.scalar<std::int32_t>(r.instance);
    w.scalar<std::int32_t>(r.camera);
    w.scalar<std::uint8_t>(static_cast<std::uint8_t>(r.label));
    w.vec(r.x.x);
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline FeatureSet load_features(const std::filesystem::path& path) {
  auto in = detail::open_model_in(path);
  detail::BinaryReader r(in, path.string());
  FeatureSet fs;
  fs.dims = detail::read_header(r, ModelKind::Features);
  const auto count = r.count(1u << 24, "sample count");
  fs.records.resize(count);
  for (auto& rec : fs.records) {
    rec.action.resize(r.count(256, "action name length"));
    r.bytes(rec.action.data(), rec.action.size());
    rec.subject = r.scalar<std::int32_t>();
    rec.instance = r.scalar<std::int32_t>();
    rec.camera = r.scalar<std::int32_t>();
    rec.label = detail::read_label(r);
    rec.x.x = r.vec(static_cast<std::uint64_t>(fs.dims.dimension()));
  }
  r.expect_end();
  return fs;
}

}  // namespace actstyle
