#pragma once

#include <algorithm>
#include <atomic>
#include <compare>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "actstyle/core.hpp"
#include "actstyle/features.hpp"
#include "actstyle/ingest.hpp"
#include "actstyle/pipeline.hpp"
#include "actstyle/style.hpp"
#include "actstyle/synth.hpp"

namespace actstyle {

struct TrackKey {
  std::string action;
  int subject = 0;
  int instance = 0;
  int camera = 0;

  auto operator<=>(const TrackKey&) const = default;
  bool operator==(const TrackKey&) const = default;
};

/// Tracked sequences plus per-subject labels.
struct Dataset {
  std::map<TrackKey, std::vector<ImagePose>> tracks;
  std::map<int, Label> labels;
};

/// Runs `fn(i)` for i in [0, count) on at most `workers` threads. The first
/// exception (lowest index) is rethrown after all workers finish.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  std::size_t threads = workers > 0 ? static_cast<std::size_t>(workers)
                                    : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  std::vector<std::exception_ptr> errors(count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Synthetic population from the study configuration: every subject,
/// instance and ring camera for each configured action.
inline Dataset make_synthetic_dataset(const StudyConfig& cfg) {
  cfg.validate();
  Dataset data;
  const auto cameras = make_camera_ring(cfg.cameras, cfg.ring_radius, cfg.ring_height,
                                        derive_seed(cfg.seed, {0xc0ffee}));
  const auto population =
      make_style_population(default_class_styles(cfg.class_separation), cfg.subjects_per_class, cfg.instances,
                            cfg.jitter, derive_seed(cfg.seed, {0x909}), cfg.idiosyncrasy);
  for (const auto& m : population) data.labels[m.subject] = m.label;
  for (const auto& action_name : cfg.actions) {
    const Action action = parse_action(action_name);
    std::vector<SyntheticSequence> seqs(population.size());
    parallel_for(population.size(), cfg.workers, [&](std::size_t i) {
      StyleParams params = population[i].params;
      params.noise_sigma = cfg.noise_sigma;
      const auto seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(action),
                                               static_cast<std::uint64_t>(population[i].subject),
                                               static_cast<std::uint64_t>(population[i].instance)});
      seqs[i] = generate_sequence(action, params, cfg.frames, seed, cameras);
    });
    for (std::size_t i = 0; i < population.size(); ++i)
      for (std::size_t c = 0; c < cameras.size(); ++c)
        data.tracks[{action_name, population[i].subject, population[i].instance, static_cast<int>(c)}] =
            std::move(seqs[i].images[c]);
  }
  return data;
}

/// One classified test sample.
struct Prediction {
  std::string action;
  std::string method;
  int d_prime = 0;
  TrackKey key;
  Label truth = Label::Female;
  Label predicted = Label::Female;
};

/// LDA fit of one fold, kept for threshold reporting and histograms.
struct LdaFold {
  std::string action;
  int test_subject = 0;
  std::vector<int> training_subjects;
  double threshold = 0.0;
  Label positive_label = Label::Male;
  std::vector<std::pair<Label, double>> projections;  // training and test samples
};

struct ActionFeatures {
  std::string action;
  TrackKey reference;
  std::vector<TrackKey> keys;
  std::vector<StyleVector> samples;
};

struct StudyResult {
  std::vector<ResultRow> rows;
  std::vector<Prediction> predictions;
  std::vector<LdaFold> lda_folds;
};

enum class Methods { Pca, Lda, Both };

inline Methods parse_methods(std::string_view s) {
  if (s == "pca") return Methods::Pca;
  if (s == "lda") return Methods::Lda;
  if (s == "both") return Methods::Both;
  throw Error(ErrorKind::Config, "method must be pca, lda or both");
}

/// Style vectors of every non-reference-subject track of one action.
inline ActionFeatures extract_action_features(const Dataset& data, const std::string& action,
                                              const StudyConfig& cfg) {
  ActionFeatures out;
  out.action = action;
  out.reference = {action, cfg.reference_subject, cfg.reference_instance, cfg.reference_camera};
  const auto ref_it = data.tracks.find(out.reference);
  if (ref_it == data.tracks.end())
    throw Error(ErrorKind::Config, "reference track " + track_file_name(action, cfg.reference_subject,
                                                                        cfg.reference_instance,
                                                                        cfg.reference_camera) +
                                       " is missing");
  const PipelineConfig pipeline = cfg.pipeline();
  const PoseSequence reference = key_pose_sequence(ref_it->second, cfg.key_poses);
  for (const auto& [key, frames] : data.tracks)
    if (key.action == action && key.subject != cfg.reference_subject) out.keys.push_back(key);
  out.samples.resize(out.keys.size());
  parallel_for(out.keys.size(), cfg.workers, [&](std::size_t i) {
    const auto& frames = data.tracks.at(out.keys[i]);
    if (frames.size() < static_cast<std::size_t>(cfg.key_poses))
      throw Error(ErrorKind::InsufficientData, "track " + track_file_name(action, out.keys[i].subject,
                                                                          out.keys[i].instance,
                                                                          out.keys[i].camera) +
                                                   " has fewer frames than key poses");
    out.samples[i] = extract_style(key_pose_sequence(frames, cfg.key_poses), reference, pipeline).x;
  });
  return out;
}

/// A train/test split: training subjects and the subjects tested against them.
struct Fold {
  std::vector<int> training;
  int test_subject = 0;
};

/// Leave-one-subject-out folds over the non-reference subjects. Without an
/// explicit training list, each fold trains on the first `train_per_class`
/// subjects of each class other than the test subject.
inline std::vector<Fold> make_folds(const std::map<int, Label>& labels, const std::set<int>& available,
                                    const StudyConfig& cfg) {
  for (int s : available)
    if (!labels.count(s)) throw Error(ErrorKind::Config, "subject " + std::to_string(s) + " has no label");
  std::vector<Fold> folds;
  if (!cfg.training_subjects.empty()) {
    std::set<int> training;
    for (int s : cfg.training_subjects) {
      if (s == cfg.reference_subject)
        throw Error(ErrorKind::Config,
                    "subject " + std::to_string(s) + " is both the reference and a training subject");
      if (!available.count(s))
        throw Error(ErrorKind::Config, "training subject " + std::to_string(s) + " has no tracks");
      if (!training.insert(s).second)
        throw Error(ErrorKind::Config, "training subject " + std::to_string(s) + " listed twice");
    }
    bool female = false, male = false;
    for (int s : training) (labels.at(s) == Label::Female ? female : male) = true;
    if (!female || !male) throw Error(ErrorKind::Config, "training subjects must cover both classes");
    for (int s : available)
      if (!training.count(s)) folds.push_back({{training.begin(), training.end()}, s});
  } else {
    for (int test : available) {
      Fold f{{}, test};
      int females = 0, males = 0;
      for (int s : available) {
        if (s == test) continue;
        int& count = labels.at(s) == Label::Female ? females : males;
        if (count < cfg.train_per_class) {
          ++count;
          f.training.push_back(s);
        }
      }
      if (females < cfg.train_per_class || males < cfg.train_per_class)
        throw Error(ErrorKind::Config, "not enough subjects per class for the training split");
      folds.push_back(std::move(f));
    }
  }
  for (const auto& f : folds) {
    if (std::find(f.training.begin(), f.training.end(), f.test_subject) != f.training.end() ||
        f.test_subject == cfg.reference_subject)
      throw Error(ErrorKind::Config, "subject " + std::to_string(f.test_subject) + " appears in two splits");
  }
  if (folds.empty()) throw Error(ErrorKind::Config, "no test subjects remain after the training split");
  return folds;
}

inline void add_rates(std::vector<ResultRow>& rows, const std::string& action, const std::string& method,
                      int d_prime, const std::vector<Prediction>& preds) {
  int n[2] = {0, 0}, ok[2] = {0, 0};
  for (const auto& p : preds) {
    const int c = static_cast<int>(p.truth);
    ++n[c];
    ok[c] += p.truth == p.predicted;
  }
  auto rate = [](int good, int total) { return total ? static_cast<double>(good) / total : 0.0; };
  rows.push_back({action, method, d_prime, rate(ok[1], n[1]), rate(ok[0], n[0])});
}

/// Classification study over precomputed features of one action.
inline void classify_action(const ActionFeatures& feats, const std::map<int, Label>& labels,
                            const StudyConfig& cfg, Methods methods, StudyResult& result) {
  std::set<int> available;
  for (const auto& k : feats.keys) available.insert(k.subject);
  const auto folds = make_folds(labels, available, cfg);

  const int sweep = cfg.d_prime_max - cfg.d_prime_min + 1;
  std::vector<std::vector<Prediction>> pca_preds(static_cast<std::size_t>(sweep));
  std::vector<Prediction> lda_preds;
  for (const auto& fold : folds) {
    std::vector<StyleVector> train;
    std::vector<Label> train_labels;
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < feats.keys.size(); ++i) {
      const int s = feats.keys[i].subject;
      if (std::find(fold.training.begin(), fold.training.end(), s) != fold.training.end()) {
        train.push_back(feats.samples[i]);
        train_labels.push_back(labels.at(s));
      } else if (s == fold.test_subject) {
        test_idx.push_back(i);
      }
    }
    if (methods != Methods::Lda) {
      const EigenstyleModel full = fit_pca(train, cfg.d_prime_max);
      for (int d = cfg.d_prime_min; d <= cfg.d_prime_max; ++d) {
        const EigenstyleModel model = full.truncated(d);
        std::vector<LabeledProjection> reference;
        reference.reserve(train.size());
        for (std::size_t i = 0; i < train.size(); ++i)
          reference.push_back({pca_project(train[i], model), train_labels[i]});
        const int k = cfg.knn_k.value_or(0);
        for (std::size_t i : test_idx) {
          const Label predicted = knn_classify(pca_project(feats.samples[i], model), reference, k);
          pca_preds[static_cast<std::size_t>(d - cfg.d_prime_min)].push_back(
              {feats.action, "pca", d, feats.keys[i], labels.at(feats.keys[i].subject), predicted});
        }
      }
    }
    if (methods != Methods::Pca) {
      const LdaModel model = fit_lda(train, train_labels, LdaOptions{cfg.lda_ridge_scale});
      LdaFold record{feats.action, fold.test_subject, fold.training, model.c, model.positive_label, {}};
      for (std::size_t i = 0; i < train.size(); ++i)
        record.projections.emplace_back(train_labels[i], lda_project(train[i], model));
      for (std::size_t i : test_idx) {
        const Label truth = labels.at(feats.keys[i].subject);
        record.projections.emplace_back(truth, lda_project(feats.samples[i], model));
        lda_preds.push_back({feats.action, "lda", 0, feats.keys[i], truth, lda_classify(feats.samples[i], model)});
      }
      result.lda_folds.push_back(std::move(record));
    }
  }
  if (methods != Methods::Lda) {
    for (int d = cfg.d_prime_min; d <= cfg.d_prime_max; ++d) {
      auto& preds = pca_preds[static_cast<std::size_t>(d - cfg.d_prime_min)];
      add_rates(result.rows, feats.action, "pca", d, preds);
      result.predictions.insert(result.predictions.end(), preds.begin(), preds.end());
    }
  }
  if (methods != Methods::Pca) {
    add_rates(result.rows, feats.action, "lda", 0, lda_preds);
    result.predictions.insert(result.predictions.end(), lda_preds.begin(), lda_preds.end());
  }
}

inline StudyResult run_study(const Dataset& data, const StudyConfig& cfg, Methods methods = Methods::Both,
                             const std::vector<std::string>& actions = {}) {
  cfg.validate();
  StudyResult result;
  for (const auto& action : actions.empty() ? cfg.actions : actions) {
    const ActionFeatures feats = extract_action_features(data, action, cfg);
    classify_action(feats, data.labels, cfg, methods, result);
  }
  return result;
}

/// Overall accuracy of one results row (pooled over both classes).
inline double pooled_accuracy(const std::vector<Prediction>& preds, const std::string& method, int d_prime) {
  int n = 0, ok = 0;
  for (const auto& p : preds)
    if (p.method == method && p.d_prime == d_prime) {
      ++n;
      ok += p.truth == p.predicted;
    }
  return n ? static_cast<double>(ok) / n : 0.0;
}

}  // namespace actstyle
