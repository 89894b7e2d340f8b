#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "actstyle/core.hpp"
#include "actstyle/features.hpp"
#include "actstyle/ingest.hpp"
#include "actstyle/model_io.hpp"
#include "actstyle/pipeline.hpp"
#include "actstyle/study.hpp"

namespace actstyle::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalError = 3 };

struct Options {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  bool force = false;
  std::string action;
  std::string d_prime;
  std::string method = "both";
  std::string tracks;
  std::string reference;
  std::string target;
  std::string features;
  std::vector<std::string> models;
};

/// "a..b" or a single integer.
inline std::pair<int, int> parse_d_prime_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    std::size_t used = 0;
    if (dots == std::string::npos) {
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return {v, v};
    }
    const std::string a = s.substr(0, dots), b = s.substr(dots + 2);
    const int lo = std::stoi(a, &used);
    if (used != a.size()) throw std::invalid_argument(s);
    const int hi = std::stoi(b, &used);
    if (used != b.size()) throw std::invalid_argument(s);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Config, "--d-prime expects a..b, got '" + s + "'");
  }
}

inline StudyConfig effective_config(const Options& o) {
  StudyConfig cfg = o.config.empty() ? StudyConfig{} : load_study_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.d_prime.empty()) std::tie(cfg.d_prime_min, cfg.d_prime_max) = parse_d_prime_range(o.d_prime);
  if (!o.action.empty()) cfg.actions = {o.action};
  cfg.validate();
  return cfg;
}

inline fs::path require_out(const Options& o) {
  if (o.out.empty()) throw Error(ErrorKind::Config, "--out is required");
  return o.out;
}

/// Creates the output directory; a non-empty existing one needs --force.
inline void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::Config, dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !force)
      throw Error(ErrorKind::Config, "output directory " + dir.string() + " is not empty; pass --force to overwrite");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

/// Every *.trk file of a directory plus its labels.csv.
inline Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "track directory " + dir.string() + " not found");
  Dataset data;
  data.labels = load_labels(dir / "labels.csv");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".trk") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorKind::InsufficientData, "no track files in " + dir.string());
  for (const auto& f : files) {
    TrackFile tf = load_tracks(f);
    TrackKey key{tf.action, tf.subject, tf.instance, tf.camera};
    if (!data.tracks.emplace(key, std::move(tf.frames)).second)
      throw Error(ErrorKind::Format, f.string() + " duplicates another track's action/subject/instance/camera");
  }
  return data;
}

inline void save_dataset(const Dataset& data, const fs::path& dir) {
  for (const auto& [key, frames] : data.tracks) {
    TrackFile tf{kTrackFormatVersion, key.action, key.subject, key.instance, key.camera, frames};
    save_tracks(tf, dir / track_file_name(key.action, key.subject, key.instance, key.camera));
  }
  save_labels(data.labels, dir / "labels.csv");
}

inline void write_predictions(const fs::path& path, const std::vector<Prediction>& preds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "action,method,d_prime,subject,instance,camera,truth,predicted\n";
  for (const auto& p : preds)
    out << p.action << ',' << p.method << ',' << p.d_prime << ',' << p.key.subject << ',' << p.key.instance << ','
        << p.key.camera << ',' << to_string(p.truth) << ',' << to_string(p.predicted) << '\n';
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

/// Projection histograms of every LDA fold, 20 equal bins over the fold's
/// projection range.
inline void write_lda_histograms(const fs::path& path, const std::vector<LdaFold>& folds) {
  constexpr int kBins = 20;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "action,test_subject,label,bin,bin_lo,bin_hi,count\n";
  for (const auto& f : folds) {
    double lo = f.projections.front().second, hi = lo;
    for (const auto& [l, y] : f.projections) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    const double width = hi > lo ? (hi - lo) / kBins : 1.0;
    for (Label label : {Label::Female, Label::Male}) {
      std::vector<int> counts(kBins, 0);
      for (const auto& [l, y] : f.projections)
        if (l == label) ++counts[std::min(kBins - 1, static_cast<int>((y - lo) / width))];
      for (int b = 0; b < kBins; ++b)
        out << f.action << ',' << f.test_subject << ',' << to_string(label) << ',' << b << ','
            << detail::format_double(lo + b * width) << ',' << detail::format_double(lo + (b + 1) * width) << ','
            << counts[static_cast<std::size_t>(b)] << '\n';
    }
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline std::string threshold_caption(const std::string& action, double threshold) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s (threshold: %.2f)", action.c_str(), threshold);
  return buf;
}

inline nlohmann::json lda_metadata(const std::vector<LdaFold>& folds) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : folds)
    arr.push_back({{"action", f.action},
                   {"test_subject", f.test_subject},
                   {"training_subjects", f.training_subjects},
                   {"threshold", f.threshold},
                   {"positive_label", std::string(to_string(f.positive_label))},
                   {"caption", threshold_caption(f.action, f.threshold)}});
  return arr;
}

/// Class-mean TDM and PDM per action as PGM and CSV.
inline void write_class_heatmaps(const fs::path& dir, const ActionFeatures& feats,
                                 const std::map<int, Label>& labels, const StudyConfig& cfg) {
  const StudyDims dims = cfg.pipeline().dims();
  fs::create_directories(dir);
  for (Label label : {Label::Female, Label::Male}) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dims.dimension());
    int count = 0;
    for (std::size_t i = 0; i < feats.keys.size(); ++i)
      if (labels.at(feats.keys[i].subject) == label) {
        sum += feats.samples[i].x;
        ++count;
      }
    if (count == 0) continue;
    const auto [tdm, pdm] = deserialize(StyleVector{sum / count}, dims);
    const std::string stem = feats.action + "_" + std::string(to_string(label));
    write_pgm(tdm.t, cfg.deviation_cap, (dir / (stem + "_tdm.pgm")).string());
    write_pgm(pdm.p, cfg.deviation_cap, (dir / (stem + "_pdm.pgm")).string());
    write_matrix_csv(tdm.t, (dir / (stem + "_tdm.csv")).string());
    write_matrix_csv(pdm.p, (dir / (stem + "_pdm.csv")).string());
  }
}

/// Training subjects for the standalone train stages: the configured list,
/// or the first `train_per_class` subjects of each class.
inline std::vector<int> training_split(const std::set<int>& available, const std::map<int, Label>& labels,
                                       const StudyConfig& cfg) {
  if (!cfg.training_subjects.empty()) {
    const auto folds = make_folds(labels, available, cfg);
    return folds.front().training;
  }
  std::vector<int> out;
  int females = 0, males = 0;
  for (int s : available) {
    int& count = labels.at(s) == Label::Female ? females : males;
    if (count < cfg.train_per_class) {
      ++count;
      out.push_back(s);
    }
  }
  if (females < cfg.train_per_class || males < cfg.train_per_class)
    throw Error(ErrorKind::Config, "not enough subjects per class for the training split");
  return out;
}

inline int cmd_synth(const Options& o) {
  const StudyConfig cfg = effective_config(o);
  const fs::path out = require_out(o);
  const Dataset data = make_synthetic_dataset(cfg);
  prepare_out_dir(out, o.force);
  save_dataset(data, out);
  write_text(out / "study.json", to_json(cfg).dump(2) + "\n");
  std::cout << "wrote " << data.tracks.size() << " track files to " << out.string() << "\n";
  return kOk;
}

inline int cmd_align(const Options& o) {
  const StudyConfig cfg = effective_config(o);
  if (o.reference.empty() || o.target.empty())
    throw Error(ErrorKind::Config, "align needs --reference and --target track files");
  const fs::path out = require_out(o);
  const TrackFile ref = load_tracks(o.reference);
  const TrackFile tgt = load_tracks(o.target);
  const auto ex = extract_style(key_pose_sequence(tgt.frames, cfg.key_poses),
                                key_pose_sequence(ref.frames, cfg.key_poses), cfg.pipeline());
  prepare_out_dir(out, o.force);
  write_matrix_csv(ex.grid.error.p, (out / "error_matrix.csv").string());
  write_matrix_csv(ex.f.f, (out / "fundamental.csv").string());
  std::string path_csv = "reference,target\n";
  for (const auto& [r, t] : ex.path.pairs) path_csv += std::to_string(r) + "," + std::to_string(t) + "\n";
  write_text(out / "path.csv", path_csv);
  write_matrix_csv(ex.tdm.t, (out / "tdm.csv").string());
  write_matrix_csv(ex.pdm.p, (out / "pdm.csv").string());
  write_pgm(ex.tdm.t, cfg.deviation_cap, (out / "tdm.pgm").string());
  write_pgm(ex.pdm.p, cfg.deviation_cap, (out / "pdm.pgm").string());
  std::cout << "path cost " << ex.path.cumulative_cost << " over " << ex.path.pairs.size() << " steps\n";
  return kOk;
}

inline FeatureSet to_feature_set(const std::vector<ActionFeatures>& all, const std::map<int, Label>& labels,
                                 const StudyDims& dims) {
  FeatureSet set{dims, {}};
  for (const auto& feats : all)
    for (std::size_t i = 0; i < feats.keys.size(); ++i) {
      const auto& k = feats.keys[i];
      const auto it = labels.find(k.subject);
      if (it == labels.end()) throw Error(ErrorKind::Config, "subject " + std::to_string(k.subject) + " has no label");
      set.records.push_back({k.action, k.subject, k.instance, k.camera, it->second, feats.samples[i]});
    }
  return set;
}

inline int cmd_features(const Options& o) {
  const StudyConfig cfg = effective_config(o);
  if (o.tracks.empty()) throw Error(ErrorKind::Config, "features needs --tracks <dir>");
  const fs::path out = require_out(o);
  const Dataset data = load_dataset(o.tracks);
  std::vector<ActionFeatures> all;
  for (const auto& action : cfg.actions) all.push_back(extract_action_features(data, action, cfg));
  prepare_out_dir(out, o.force);
  save_features(to_feature_set(all, data.labels, cfg.pipeline().dims()), out / "features.bin");
  for (const auto& feats : all) write_class_heatmaps(out / "heatmaps", feats, data.labels, cfg);
  std::cout << "extracted features for " << cfg.actions.size() << " action(s)\n";
  return kOk;
}

struct TrainingData {
  std::vector<StyleVector> samples;
  std::vector<Label> labels;
  std::vector<int> subjects;
};

inline TrainingData select_training(const FeatureSet& fs, const std::string& action, const StudyConfig& cfg) {
  std::set<int> available;
  std::map<int, Label> labels;
  for (const auto& r : fs.records)
    if (r.action == action) {
      available.insert(r.subject);
      labels[r.subject] = r.label;
    }
  if (available.empty()) throw Error(ErrorKind::InsufficientData, "no features for action '" + action + "'");
  TrainingData td;
  td.subjects = training_split(available, labels, cfg);
  for (const auto& r : fs.records)
    if (r.action == action && std::find(td.subjects.begin(), td.subjects.end(), r.subject) != td.subjects.end()) {
      td.samples.push_back(r.x);
      td.labels.push_back(r.label);
    }
  return td;
}

inline int cmd_train(const Options& o, ModelKind kind) {
  const StudyConfig cfg = effective_config(o);
  if (o.features.empty()) throw Error(ErrorKind::Config, "training needs --features <file>");
  const fs::path out = require_out(o);
  const FeatureSet fs = load_features(o.features);
  if (!(fs.dims == cfg.pipeline().dims()))
    throw Error(ErrorKind::Config, "feature file layout does not match the configuration");
  prepare_out_dir(out, o.force);
  for (const auto& action : cfg.actions) {
    const TrainingData td = select_training(fs, action, cfg);
    nlohmann::json meta = {{"action", action},
                           {"training_subjects", td.subjects},
                           {"reference_subject", cfg.reference_subject},
                           {"seed", cfg.seed}};
    if (kind == ModelKind::Pca) {
      PcaClassifier c{fs.dims, fit_pca(td.samples, cfg.d_prime_max), {}};
      for (std::size_t i = 0; i < td.samples.size(); ++i)
        c.training.push_back({pca_project(td.samples[i], c.model), td.labels[i]});
      meta["clamped"] = c.model.clamped();
      save_pca(c, out / (action + "_pca.model"), meta);
    } else {
      LdaClassifier c{fs.dims, fit_lda(td.samples, td.labels, LdaOptions{cfg.lda_ridge_scale})};
      meta["caption"] = threshold_caption(action, c.model.c);
      save_lda(c, out / (action + "_lda.model"), meta);
    }
  }
  std::cout << "trained " << cfg.actions.size() << (kind == ModelKind::Pca ? " PCA" : " LDA") << " model(s)\n";
  return kOk;
}

inline nlohmann::json read_sidecar(const fs::path& model) {
  std::ifstream in(model.string() + ".json");
  if (!in) throw Error(ErrorKind::Io, "missing model sidecar " + model.string() + ".json");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, model.string() + ".json: " + e.what());
  }
}

inline int cmd_classify(const Options& o) {
  const StudyConfig cfg = effective_config(o);
  if (o.features.empty() || o.models.empty())
    throw Error(ErrorKind::Config, "classify needs --features <file> and at least one --model <file>");
  const fs::path out = require_out(o);
  const FeatureSet fs = load_features(o.features);
  StudyResult result;
  for (const auto& model_path : o.models) {
    const nlohmann::json meta = read_sidecar(model_path);
    std::string kind, action;
    std::vector<int> training;
    try {
      kind = meta.at("kind").get<std::string>();
      action = meta.at("action").get<std::string>();
      training = meta.at("training_subjects").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Format, model_path + ".json: " + e.what());
    }
    std::vector<const FeatureRecord*> test;
    for (const auto& r : fs.records)
      if (r.action == action && std::find(training.begin(), training.end(), r.subject) == training.end())
        test.push_back(&r);
    if (test.empty()) throw Error(ErrorKind::InsufficientData, "no test samples for action '" + action + "'");
    auto key_of = [](const FeatureRecord& r) { return TrackKey{r.action, r.subject, r.instance, r.camera}; };
    if (kind == "pca") {
      if (o.method == "lda") continue;
      const PcaClassifier c = load_pca(model_path);
      if (!(c.dims == fs.dims)) throw Error(ErrorKind::Config, "model and feature layouts differ");
      for (int d = cfg.d_prime_min; d <= cfg.d_prime_max; ++d) {
        const EigenstyleModel model = c.model.truncated(d);
        std::vector<LabeledProjection> train;
        for (const auto& t : c.training)
          train.push_back({StyleProjection{t.projection.coords.head(model.d_prime)}, t.label});
        std::vector<Prediction> preds;
        for (const auto* r : test)
          preds.push_back({action, "pca", d, key_of(*r), r->label,
                           knn_classify(pca_project(r->x, model), train, cfg.knn_k.value_or(0))});
        add_rates(result.rows, action, "pca", d, preds);
        result.predictions.insert(result.predictions.end(), preds.begin(), preds.end());
      }
    } else if (kind == "lda") {
      if (o.method == "pca") continue;
      const LdaClassifier c = load_lda(model_path);
      if (!(c.dims == fs.dims)) throw Error(ErrorKind::Config, "model and feature layouts differ");
      std::vector<Prediction> preds;
      for (const auto* r : test) preds.push_back({action, "lda", 0, key_of(*r), r->label, lda_classify(r->x, c.model)});
      add_rates(result.rows, action, "lda", 0, preds);
      result.predictions.insert(result.predictions.end(), preds.begin(), preds.end());
    } else {
      throw Error(ErrorKind::Format, model_path + ".json: unknown model kind '" + kind + "'");
    }
  }
  prepare_out_dir(out, o.force);
  save_results(result.rows, out / "results.csv");
  write_predictions(out / "predictions.csv", result.predictions);
  write_results(std::cout, result.rows);
  return kOk;
}

inline int cmd_eval(const Options& o) {
  const StudyConfig cfg = effective_config(o);
  const fs::path out = require_out(o);
  const Methods methods = parse_methods(o.method);
  const Dataset data = o.tracks.empty() ? make_synthetic_dataset(cfg) : load_dataset(o.tracks);
  StudyResult result;
  std::vector<ActionFeatures> all;
  for (const auto& action : cfg.actions) {
    all.push_back(extract_action_features(data, action, cfg));
    classify_action(all.back(), data.labels, cfg, methods, result);
  }
  prepare_out_dir(out, o.force);
  save_results(result.rows, out / "results.csv");
  write_predictions(out / "predictions.csv", result.predictions);
  if (!result.lda_folds.empty()) write_lda_histograms(out / "lda_histograms.csv", result.lda_folds);
  nlohmann::json meta = {{"config", to_json(cfg)}, {"lda", lda_metadata(result.lda_folds)}};
  write_text(out / "metadata.json", meta.dump(2) + "\n");
  for (const auto& feats : all) write_class_heatmaps(out / "heatmaps", feats, data.labels, cfg);
  write_results(std::cout, result.rows);
  return kOk;
}

/// Parses arguments and runs one subcommand. Errors are reported on `err`
/// and mapped to exit codes.
inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"View-invariant action style analysis"};
  app.require_subcommand(1, 1);
  Options o;
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Seed for all randomness");
    sub->add_option("--config", o.config, "Study configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_flag("--force", o.force, "Overwrite a non-empty output directory");
    sub->add_option("--action", o.action, "Restrict to one action");
    sub->add_option("--d-prime", o.d_prime, "d' sweep range a..b");
    sub->add_option("--method", o.method, "pca, lda or both")->check(CLI::IsMember({"pca", "lda", "both"}));
  };
  auto* synth = app.add_subcommand("synth", "Generate the synthetic population as track files");
  common(synth);
  auto* align_cmd = app.add_subcommand("align", "Align one target track file to a reference");
  common(align_cmd);
  align_cmd->add_option("--reference", o.reference, "Reference track file")->check(CLI::ExistingFile);
  align_cmd->add_option("--target", o.target, "Target track file")->check(CLI::ExistingFile);
  auto* features = app.add_subcommand("features", "Extract style vectors from a track directory");
  common(features);
  features->add_option("--tracks", o.tracks, "Track directory");
  auto* train_pca = app.add_subcommand("train-pca", "Fit eigenstyle models");
  common(train_pca);
  train_pca->add_option("--features", o.features, "Feature file")->check(CLI::ExistingFile);
  auto* train_lda = app.add_subcommand("train-lda", "Fit discriminant models");
  common(train_lda);
  train_lda->add_option("--features", o.features, "Feature file")->check(CLI::ExistingFile);
  auto* classify = app.add_subcommand("classify", "Classify feature vectors with trained models");
  common(classify);
  classify->add_option("--features", o.features, "Feature file")->check(CLI::ExistingFile);
  classify->add_option("--model", o.models, "Model file (repeatable)")->check(CLI::ExistingFile);
  auto* eval = app.add_subcommand("eval", "Run the full study");
  common(eval);
  eval->add_option("--tracks", o.tracks, "Track directory (default: synthesize in memory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(o);
    if (align_cmd->parsed()) return cmd_align(o);
    if (features->parsed()) return cmd_features(o);
    if (train_pca->parsed()) return cmd_train(o, ModelKind::Pca);
    if (train_lda->parsed()) return cmd_train(o, ModelKind::Lda);
    if (classify->parsed()) return cmd_classify(o);
    if (eval->parsed()) return cmd_eval(o);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.numerical() ? kNumericalError : kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace actstyle::cli
