#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "actstyle/ingest.hpp"
#include "actstyle/model_io.hpp"

using namespace actstyle;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("actstyle_ingest_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TrackFile sample_track(int frames = 4) {
  TrackFile tf;
  tf.action = "kick";
  tf.subject = 7;
  tf.instance = 2;
  tf.camera = 3;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1280.0);
  for (int f = 0; f < frames; ++f) {
    ImagePose p;
    for (auto& j : p.joints) j = Eigen::Vector2d(u(rng), u(rng) / 3.0);
    tf.frames.push_back(p);
  }
  return tf;
}

std::string serialized(const TrackFile& tf) {
  std::ostringstream out;
  write_tracks(out, tf);
  return out.str();
}

ErrorKind parse_error_kind(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_tracks(in);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "parse succeeded";
  return ErrorKind::InternalConsistency;
}

std::string replace_line(std::string text, const std::string& prefix, const std::string& line) {
  const auto pos = text.find(prefix);
  const auto end = text.find('\n', pos);
  return text.replace(pos, end - pos, line);
}

}  // namespace

TEST(Tracks, RoundTripIsBitExact) {
  const TrackFile tf = sample_track();
  std::istringstream in(serialized(tf));
  const TrackFile back = parse_tracks(in);
  EXPECT_EQ(back.action, "kick");
  EXPECT_EQ(back.subject, 7);
  EXPECT_EQ(back.instance, 2);
  EXPECT_EQ(back.camera, 3);
  ASSERT_EQ(back.frames.size(), tf.frames.size());
  for (std::size_t f = 0; f < tf.frames.size(); ++f) EXPECT_TRUE(back.frames[f] == tf.frames[f]);
  EXPECT_EQ(serialized(back), serialized(tf));
}

TEST(Tracks, FileRoundTripAndName) {
  TempDir dir;
  const TrackFile tf = sample_track(3);
  const fs::path p = dir.path() / track_file_name("walk", 4, 1, 2);
  EXPECT_EQ(p.filename().string(), "walk_s04_i1_c2.trk");
  save_tracks(tf, p);
  const TrackFile back = load_tracks(p);
  for (std::size_t f = 0; f < tf.frames.size(); ++f) EXPECT_TRUE(back.frames[f] == tf.frames[f]);
  EXPECT_THROW(load_tracks(dir.path() / "missing.trk"), Error);
}

TEST(Tracks, TenJointsIsFormatError) {
  const std::string text = serialized(sample_track());
  std::string joints = "# joints:";
  for (std::size_t i = 0; i < 10; ++i) joints += " " + std::string(kJointLabels[i]);
  const std::string bad = replace_line(text, "# joints:", joints);
  std::istringstream in(bad);
  try {
    parse_tracks(in, "ten.trk");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
    EXPECT_NE(std::string(e.what()).find("10 joints"), std::string::npos) << e.what();
  }
}

TEST(Tracks, NonFiniteIsParseErrorWithFrameIndex) {
  TrackFile tf = sample_track();
  std::string text = serialized(tf);
  // Corrupt the third frame line.
  std::istringstream lines(text);
  std::string line, rebuilt;
  int data_line = 0;
  while (std::getline(lines, line)) {
    if (line[0] != '#' && data_line++ == 2) line = "nan" + line.substr(line.find(' '));
    rebuilt += line + "\n";
  }
  std::istringstream in(rebuilt);
  try {
    parse_tracks(in, "nan.trk");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("frame 2"), std::string::npos) << e.what();
  }
}

TEST(Tracks, HeaderProblems) {
  const std::string text = serialized(sample_track());
  EXPECT_EQ(parse_error_kind(replace_line(text, "# format_version:", "# format_version: 2")), ErrorKind::Format);
  EXPECT_EQ(parse_error_kind(replace_line(text, "# frames:", "# frames: 9")), ErrorKind::Format);
  EXPECT_EQ(parse_error_kind(replace_line(text, "# camera:", "# lens: 3")), ErrorKind::Format);
  EXPECT_EQ(parse_error_kind("# camera: 1\n" + text), ErrorKind::Format);
  EXPECT_EQ(parse_error_kind(text + "# late: 1\n"), ErrorKind::Format);
  EXPECT_EQ(parse_error_kind(replace_line(text, "# subject:", "# subject: seven")), ErrorKind::Parse);
  EXPECT_EQ(parse_error_kind(text + "1 2 3\n"), ErrorKind::Parse);
  EXPECT_EQ(parse_error_kind(""), ErrorKind::Format);
}

TEST(Results, HeaderOnlyWhenEmpty) {
  std::ostringstream out;
  write_results(out, {});
  EXPECT_EQ(out.str(), "action,method,d_prime,male_rate,female_rate\n");
}

TEST(Results, ThreeDecimalsAndRoundTrip) {
  TempDir dir;
  const std::vector<ResultRow> rows = {{"walk", "pca", 3, 0.8333333, 1.0}, {"walk", "lda", 0, 0.5, 0.0625}};
  std::ostringstream out;
  write_results(out, rows);
  EXPECT_EQ(out.str(),
            "action,method,d_prime,male_rate,female_rate\n"
            "walk,pca,3,0.833,1.000\n"
            "walk,lda,0,0.500,0.062\n");
  save_results(rows, dir.path() / "r.csv");
  const auto back = load_results(dir.path() / "r.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].action, "walk");
  EXPECT_EQ(back[1].method, "lda");
  EXPECT_EQ(back[0].d_prime, 3);
  EXPECT_DOUBLE_EQ(back[0].male_rate, 0.833);
  EXPECT_THROW(save_results({{"walk", "pca", 1, std::nan(""), 0.0}}, dir.path() / "bad.csv"), Error);
}

TEST(Labels, RoundTripAndDuplicates) {
  TempDir dir;
  const std::map<int, Label> labels = {{0, Label::Female}, {6, Label::Male}};
  save_labels(labels, dir.path() / "labels.csv");
  EXPECT_EQ(load_labels(dir.path() / "labels.csv"), labels);
  std::ofstream(dir.path() / "dup.csv") << "subject,label\n1,male\n1,female\n";
  EXPECT_THROW(load_labels(dir.path() / "dup.csv"), Error);
}

TEST(StudyConfigJson, DefaultsRoundTrip) {
  StudyConfig c;
  c.knn_k = 3;
  c.training_subjects = {1, 2, 7, 8};
  c.actions = {"walk", "kick"};
  const StudyConfig back = study_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.knn_k, std::optional<int>(3));
}

TEST(StudyConfigJson, RejectsUnknownKeysAndBadValues) {
  auto kind_of = [](const nlohmann::json& j) {
    try {
      study_config_from_json(j);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InternalConsistency;
  };
  EXPECT_EQ(kind_of({{"bogus", 1}}), ErrorKind::Config);
  EXPECT_EQ(kind_of({{"key_poses", "many"}}), ErrorKind::Config);
  EXPECT_EQ(kind_of({{"actions", {"juggle"}}}), ErrorKind::Config);
  EXPECT_EQ(kind_of({{"d_prime_min", 5}, {"d_prime_max", 2}}), ErrorKind::Config);
  EXPECT_EQ(kind_of(nlohmann::json::array()), ErrorKind::Config);
  EXPECT_NO_THROW(study_config_from_json({{"seed", 9}}));
}

TEST(StudyConfigJson, PipelineView) {
  StudyConfig c;
  c.key_poses = 10;
  c.pdm_width = 4;
  const PipelineConfig p = c.pipeline();
  EXPECT_EQ(p.dims(), (StudyDims{165, 9, 4}));
}

namespace {

StudyDims small_dims() { return StudyDims{165, 3, 4}; }

EigenstyleModel small_pca(std::vector<StyleVector>& samples) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 6; ++i) {
    StyleVector s{Eigen::VectorXd(small_dims().dimension())};
    for (Eigen::Index k = 0; k < s.x.size(); ++k) s.x(k) = g(rng);
    samples.push_back(std::move(s));
  }
  return fit_pca(samples, 3);
}

}  // namespace

TEST(ModelIo, PcaRoundTripIsBitExact) {
  TempDir dir;
  std::vector<StyleVector> samples;
  PcaClassifier c{small_dims(), small_pca(samples), {}};
  for (std::size_t i = 0; i < samples.size(); ++i)
    c.training.push_back({pca_project(samples[i], c.model), i % 2 ? Label::Male : Label::Female});
  const fs::path p = dir.path() / "m.model";
  save_pca(c, p, {{"action", "walk"}});
  const PcaClassifier back = load_pca(p);
  EXPECT_EQ(back.dims, c.dims);
  EXPECT_EQ(back.model.basis, c.model.basis);
  EXPECT_EQ(back.model.mean, c.model.mean);
  EXPECT_EQ(back.model.eigenvalues, c.model.eigenvalues);
  EXPECT_EQ(back.model.spectrum, c.model.spectrum);
  ASSERT_EQ(back.training.size(), c.training.size());
  for (std::size_t i = 0; i < c.training.size(); ++i) {
    EXPECT_EQ(back.training[i].label, c.training[i].label);
    EXPECT_EQ(back.training[i].projection.coords, c.training[i].projection.coords);
  }
  std::ifstream side(p.string() + ".json");
  nlohmann::json meta;
  side >> meta;
  EXPECT_EQ(meta["kind"], "pca");
  EXPECT_EQ(meta["d"], small_dims().dimension());
  EXPECT_EQ(meta["action"], "walk");
}

TEST(ModelIo, LdaRoundTripAndKindCheck) {
  TempDir dir;
  std::vector<StyleVector> samples;
  small_pca(samples);
  std::vector<Label> labels;
  for (std::size_t i = 0; i < samples.size(); ++i) labels.push_back(i < 3 ? Label::Female : Label::Male);
  const LdaClassifier c{small_dims(), fit_lda(samples, labels)};
  const fs::path p = dir.path() / "l.model";
  save_lda(c, p);
  const LdaClassifier back = load_lda(p);
  EXPECT_EQ(back.model.w, c.model.w);
  EXPECT_EQ(back.model.c, c.model.c);
  EXPECT_EQ(back.model.positive_label, c.model.positive_label);
  EXPECT_THROW(load_pca(p), Error);
}

TEST(ModelIo, TruncatedAndCorruptFilesAreRejected) {
  TempDir dir;
  std::vector<StyleVector> samples;
  std::vector<Label> labels;
  small_pca(samples);
  for (std::size_t i = 0; i < samples.size(); ++i) labels.push_back(i < 3 ? Label::Female : Label::Male);
  const fs::path p = dir.path() / "l.model";
  save_lda(LdaClassifier{small_dims(), fit_lda(samples, labels)}, p);
  std::string bytes;
  {
    std::ifstream in(p, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& b) { std::ofstream(p, std::ios::binary | std::ios::trunc) << b; };
  write(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(load_lda(p), Error);
  write(bytes + "x");
  EXPECT_THROW(load_lda(p), Error);
  std::string magic = bytes;
  magic[0] = 'X';
  write(magic);
  EXPECT_THROW(load_lda(p), Error);
}

TEST(ModelIo, FeaturesRoundTrip) {
  TempDir dir;
  FeatureSet fs{small_dims(), {}};
  std::vector<StyleVector> samples;
  small_pca(samples);
  for (std::size_t i = 0; i < samples.size(); ++i)
    fs.records.push_back({"walk", static_cast<int>(i), 1, 2, i % 2 ? Label::Male : Label::Female, samples[i]});
  save_features(fs, dir.path() / "f.bin");
  const FeatureSet back = load_features(dir.path() / "f.bin");
  EXPECT_EQ(back.dims, fs.dims);
  ASSERT_EQ(back.records.size(), fs.records.size());
  for (std::size_t i = 0; i < fs.records.size(); ++i) {
    EXPECT_EQ(back.records[i].action, "walk");
    EXPECT_EQ(back.records[i].subject, static_cast<int>(i));
    EXPECT_EQ(back.records[i].label, fs.records[i].label);
    EXPECT_EQ(back.records[i].x.x, fs.records[i].x.x);
  }
  FeatureSet wrong = fs;
  wrong.records[0].x.x.resize(5);
  EXPECT_THROW(save_features(wrong, dir.path() / "g.bin"), Error);
}
