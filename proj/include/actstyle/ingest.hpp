#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "actstyle/core.hpp"
#include "actstyle/pipeline.hpp"
#include "actstyle/style.hpp"
#include "actstyle/synth.hpp"

namespace actstyle {

inline constexpr int kTrackFormatVersion = 1;

/// One tracked sequence: 11 image joints per frame from one camera.
struct TrackFile {
  int format_version = kTrackFormatVersion;
  std::string action = "walk";
  int subject = 0;
  int instance = 0;
  int camera = 0;
  std::vector<ImagePose> frames;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorKind::Parse, where + ": malformed number '" + std::string(s) + "'");
  return v;
}

inline int parse_int(std::string_view s, const std::string& where) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw Error(ErrorKind::Parse, where + ": malformed integer '" + std::string(s) + "'");
  return v;
}

/// Shortest decimal text that round-trips the double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error(ErrorKind::Io, "number formatting failed");
  return std::string(buf, ptr);
}

}  // namespace detail

inline TrackFile parse_tracks(std::istream& in, const std::string& name = "<stream>") {
  TrackFile tf;
  std::map<std::string, std::string> header;
  std::string line;
  int line_no = 0;
  bool in_body = false;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = name + ":" + std::to_string(line_no);
    const std::string_view body = detail::trim(line);
    if (body.empty()) continue;
    if (body.front() == '#') {
      if (in_body) throw Error(ErrorKind::Format, where + ": header line after frame data");
      const std::string_view kv = body.substr(1);
      const auto colon = kv.find(':');
      if (colon == std::string_view::npos) throw Error(ErrorKind::Format, where + ": header without ':'");
      const std::string key(detail::trim(kv.substr(0, colon)));
      const std::string value(detail::trim(kv.substr(colon + 1)));
      if (header.count(key)) throw Error(ErrorKind::Format, where + ": duplicate header '" + key + "'");
      header[key] = value;
      continue;
    }
    if (!in_body) {
      in_body = true;
      static const char* kRequired[] = {"format_version", "action", "subject", "instance",
                                        "camera",         "joints", "frames"};
      for (const char* k : kRequired)
        if (!header.count(k)) throw Error(ErrorKind::Format, name + ": missing header '" + k + "'");
      for (const auto& [k, v] : header) {
        bool known = false;
        for (const char* r : kRequired) known = known || k == r;
        if (!known) throw Error(ErrorKind::Format, name + ": unknown header '" + k + "'");
      }
      tf.format_version = detail::parse_int(header["format_version"], name + ": format_version");
      if (tf.format_version != kTrackFormatVersion)
        throw Error(ErrorKind::Format, name + ": unsupported track format version " +
                                           std::to_string(tf.format_version));
      const auto labels = detail::split_ws(header["joints"]);
      bool canonical = labels.size() == kJointCount;
      for (std::size_t i = 0; canonical && i < kJointCount; ++i) canonical = labels[i] == kJointLabels[i];
      if (!canonical)
        throw Error(ErrorKind::Format, name + ": joint labels [" + header["joints"] + "] (" +
                                           std::to_string(labels.size()) +
                                           " joints) do not match the canonical 11-joint set");
      tf.action = header["action"];
      tf.subject = detail::parse_int(header["subject"], name + ": subject");
      tf.instance = detail::parse_int(header["instance"], name + ": instance");
      tf.camera = detail::parse_int(header["camera"], name + ": camera");
    }
    fields = detail::split_ws(body);
    const std::string frame_where = name + ": frame " + std::to_string(tf.frames.size());
    if (fields.size() != 2 * kJointCount)
      throw Error(ErrorKind::Parse, frame_where + ": expected " + std::to_string(2 * kJointCount) +
                                        " values, got " + std::to_string(fields.size()));
    ImagePose pose;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      pose[j].x() = detail::parse_double(fields[2 * j], frame_where);
      pose[j].y() = detail::parse_double(fields[2 * j + 1], frame_where);
    }
    if (!pose.finite()) throw Error(ErrorKind::Parse, frame_where + ": non-finite coordinate");
    tf.frames.push_back(pose);
  }
  if (!in_body) throw Error(ErrorKind::Format, name + ": no frame data");
  const int declared = detail::parse_int(header["frames"], name + ": frames");
  if (declared != static_cast<int>(tf.frames.size()))
    throw Error(ErrorKind::Format, name + ": header declares " + std::to_string(declared) +
                                       " frames, body has " + std::to_string(tf.frames.size()));
  return tf;
}

inline TrackFile load_tracks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return parse_tracks(in, path.string());
}

inline void write_tracks(std::ostream& out, const TrackFile& tf) {
  out << "# format_version: " << kTrackFormatVersion << '\n';
  out << "# action: " << tf.action << '\n';
  out << "# subject: " << tf.subject << '\n';
  out << "# instance: " << tf.instance << '\n';
  out << "# camera: " << tf.camera << '\n';
  out << "# joints:";
  for (auto l : kJointLabels) out << ' ' << l;
  out << '\n';
  out << "# frames: " << tf.frames.size() << '\n';
  for (const auto& pose : tf.frames) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      if (j) out << ' ';
      out << detail::format_double(pose[j].x()) << ' ' << detail::format_double(pose[j].y());
    }
    out << '\n';
  }
}

inline void save_tracks(const TrackFile& tf, const std::filesystem::path& path) {
  for (const auto& pose : tf.frames)
    if (!pose.finite()) throw Error(ErrorKind::InvalidParameter, "non-finite coordinate in track data");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  write_tracks(out, tf);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline std::string track_file_name(std::string_view action, int subject, int instance, int camera) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.*s_s%02d_i%d_c%d.trk", static_cast<int>(action.size()), action.data(),
                subject, instance, camera);
  return buf;
}

struct ResultRow {
  std::string action;
  std::string method;  // "pca" or "lda"
  int d_prime = 0;     // 0 for lda
  double male_rate = 0.0;
  double female_rate = 0.0;
};

inline constexpr std::string_view kResultsHeader = "action,method,d_prime,male_rate,female_rate";

inline std::string format_rate(double r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", r);
  return buf;
}

inline void write_results(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows)
    out << r.action << ',' << r.method << ',' << r.d_prime << ',' << format_rate(r.male_rate) << ','
        << format_rate(r.female_rate) << '\n';
}

inline void save_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  for (const auto& r : rows)
    if (r.action.empty() || r.method.empty() || r.action.find(',') != std::string::npos ||
        r.method.find(',') != std::string::npos || !std::isfinite(r.male_rate) || !std::isfinite(r.female_rate))
      throw Error(ErrorKind::InvalidParameter, "malformed result row");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  write_results(out, rows);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline std::vector<ResultRow> load_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kResultsHeader)
    throw Error(ErrorKind::Format, path.string() + ": missing results header");
  std::vector<ResultRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.emplace_back(detail::trim(cell));
    if (cells.size() != 5) throw Error(ErrorKind::Parse, where + ": expected 5 columns");
    rows.push_back({cells[0], cells[1], detail::parse_int(cells[2], where),
                    detail::parse_double(cells[3], where), detail::parse_double(cells[4], where)});
  }
  return rows;
}

/// Subject labels: CSV with header `subject,label`.
inline std::map<int, Label> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "subject,label")
    throw Error(ErrorKind::Format, path.string() + ": missing 'subject,label' header");
  std::map<int, Label> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto comma = body.find(',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (comma == std::string_view::npos) throw Error(ErrorKind::Parse, where + ": expected subject,label");
    const int subject = detail::parse_int(detail::trim(body.substr(0, comma)), where);
    if (out.count(subject)) throw Error(ErrorKind::Format, where + ": duplicate subject");
    out[subject] = parse_label(detail::trim(body.substr(comma + 1)));
  }
  return out;
}

inline void save_labels(const std::map<int, Label>& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "subject,label\n";
  for (const auto& [s, l] : labels) out << s << ',' << to_string(l) << '\n';
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

/// Study configuration; defaults give the desk-scale synthetic study.
struct StudyConfig {
  // Reference sequence (per action).
  int reference_subject = 0;
  int reference_instance = 0;
  int reference_camera = 2;
  // Features.
  int key_poses = 16;
  int pdm_width = 0;  // 0 = reference transition count
  double deviation_cap = 2.0;
  double mu = 1.0;
  int min_valid_triplets = 30;
  // Classifiers.
  int d_prime_min = 1;
  int d_prime_max = 13;
  std::optional<int> knn_k;
  int train_per_class = 2;
  std::vector<int> training_subjects;  // explicit split; empty = leave-one-subject-out
  double lda_ridge_scale = 1e-6;
  // Synthetic population.
  std::vector<std::string> actions = {"walk"};
  int subjects_per_class = 6;
  int instances = 3;
  int cameras = 5;
  int frames = 64;
  double jitter = 0.05;
  double class_separation = 2.0;
  double idiosyncrasy = 0.05;
  double noise_sigma = 0.0;
  double ring_radius = 6.0;
  double ring_height = 1.5;
  std::uint64_t seed = 1;
  int workers = 0;  // 0 = hardware concurrency

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorKind::Config, what); };
    if (key_poses < 3) bad("key_poses must be >= 3");
    if (pdm_width != 0 && pdm_width < 2) bad("pdm_width must be 0 or >= 2");
    if (!(deviation_cap > 0.0)) bad("deviation_cap must be > 0");
    if (!(mu > 0.0)) bad("mu must be > 0");
    if (min_valid_triplets < 1 || min_valid_triplets > static_cast<int>(kTripletCount))
      bad("min_valid_triplets must be in [1, 165]");
    if (d_prime_min < 1 || d_prime_max < d_prime_min) bad("d' range must satisfy 1 <= min <= max");
    if (knn_k && *knn_k < 1) bad("knn_k must be >= 1");
    if (train_per_class < 1) bad("train_per_class must be >= 1");
    if (!(lda_ridge_scale >= 0.0)) bad("lda_ridge_scale must be >= 0");
    if (actions.empty()) bad("at least one action is required");
    for (const auto& a : actions) {
      try {
        parse_action(a);
      } catch (const Error&) {
        bad("unknown action '" + a + "'");
      }
    }
    if (subjects_per_class < 1 || instances < 1 || cameras < 1) bad("population sizes must be >= 1");
    if (frames < key_poses) bad("frames must be >= key_poses");
    if (!(jitter >= 0.0 && jitter < 1.0)) bad("jitter must be in [0, 1)");
    if (!(idiosyncrasy >= 0.0 && idiosyncrasy < 1.0)) bad("idiosyncrasy must be in [0, 1)");
    if (!(class_separation >= 0.0) || class_separation > 2.0) bad("class_separation must be in [0, 2]");
    if (!(noise_sigma >= 0.0)) bad("noise_sigma must be >= 0");
    if (!(ring_radius > 0.0)) bad("ring_radius must be > 0");
    if (reference_camera < 0 || reference_subject < 0 || reference_instance < 0)
      bad("reference ids must be >= 0");
    if (workers < 0) bad("workers must be >= 0");
  }

  PipelineConfig pipeline() const {
    PipelineConfig p;
    p.dissimilarity = {mu, deviation_cap, min_valid_triplets};
    p.key_poses = key_poses;
    p.pdm_width = pdm_width;
    return p;
  }
};

inline nlohmann::json to_json(const StudyConfig& c) {
  nlohmann::json j = {
      {"reference_subject", c.reference_subject},
      {"reference_instance", c.reference_instance},
      {"reference_camera", c.reference_camera},
      {"key_poses", c.key_poses},
      {"pdm_width", c.pdm_width},
      {"deviation_cap", c.deviation_cap},
      {"mu", c.mu},
      {"min_valid_triplets", c.min_valid_triplets},
      {"d_prime_min", c.d_prime_min},
      {"d_prime_max", c.d_prime_max},
      {"train_per_class", c.train_per_class},
      {"training_subjects", c.training_subjects},
      {"lda_ridge_scale", c.lda_ridge_scale},
      {"actions", c.actions},
      {"subjects_per_class", c.subjects_per_class},
      {"instances", c.instances},
      {"cameras", c.cameras},
      {"frames", c.frames},
      {"jitter", c.jitter},
      {"class_separation", c.class_separation},
      {"idiosyncrasy", c.idiosyncrasy},
      {"noise_sigma", c.noise_sigma},
      {"ring_radius", c.ring_radius},
      {"ring_height", c.ring_height},
      {"seed", c.seed},
      {"workers", c.workers},
  };
  j["knn_k"] = c.knn_k ? nlohmann::json(*c.knn_k) : nlohmann::json(nullptr);
  return j;
}

inline StudyConfig study_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "study config must be a JSON object");
  StudyConfig c;
  const nlohmann::json defaults = to_json(c);
  for (const auto& [key, value] : j.items())
    if (!defaults.contains(key)) throw Error(ErrorKind::Config, "unknown study config key '" + key + "'");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("reference_subject", c.reference_subject);
    get("reference_instance", c.reference_instance);
    get("reference_camera", c.reference_camera);
    get("key_poses", c.key_poses);
    get("pdm_width", c.pdm_width);
    get("deviation_cap", c.deviation_cap);
    get("mu", c.mu);
    get("min_valid_triplets", c.min_valid_triplets);
    get("d_prime_min", c.d_prime_min);
    get("d_prime_max", c.d_prime_max);
    get("train_per_class", c.train_per_class);
    get("training_subjects", c.training_subjects);
    get("lda_ridge_scale", c.lda_ridge_scale);
    get("actions", c.actions);
    get("subjects_per_class", c.subjects_per_class);
    get("instances", c.instances);
    get("cameras", c.cameras);
    get("frames", c.frames);
    get("jitter", c.jitter);
    get("class_separation", c.class_separation);
    get("idiosyncrasy", c.idiosyncrasy);
    get("noise_sigma", c.noise_sigma);
    get("ring_radius", c.ring_radius);
    get("ring_height", c.ring_height);
    get("seed", c.seed);
    get("workers", c.workers);
    if (j.contains("knn_k") && !j.at("knn_k").is_null()) c.knn_k = j.at("knn_k").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("study config: ") + e.what());
  }
  c.validate();
  return c;
}

inline StudyConfig load_study_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
  return study_config_from_json(j);
}

}  // namespace actstyle
