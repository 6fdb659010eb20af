#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairvec/embedding_store.hpp"
#include "fairvec/nn.hpp"

namespace fairvec {

struct ProbeConfig {
  int epochs = 30;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double dropout = 0.5;
  std::uint64_t seed = 0;
  // Stop once the epoch-mean training loss improves by less than
  // `min_rel_improvement` for `patience` consecutive epochs.
  bool early_stop = true;
  int patience = 3;
  double min_rel_improvement = 0.01;
};

nlohmann::json to_json(const ProbeConfig& config);

/// dense(d->512) ReLU dropout, dense(512->512) ReLU dropout,
/// dense(512->256) ReLU dropout, dropout, dense(256->K).
nn::Sequential build_probe(std::size_t d, int num_subgroups, double dropout, std::uint64_t seed);

struct ProbeFold {
  nn::Sequential model;
  std::vector<double> epoch_loss;
};

/// One probe per fold, trained on the samples of the other folds. `views`
/// holds either a single set used for every fold or one set per fold; a
/// fold's probe trains and evaluates on its own view.
std::vector<ProbeFold> train_probe(std::span<const EmbeddingSet> views, const FoldAssignment& folds,
                                   const ProbeConfig& config);
std::vector<ProbeFold> train_probe(const EmbeddingSet& set, const FoldAssignment& folds,
                                   const ProbeConfig& config);

struct ProbeReport {
  int num_subgroups = 0;
  std::vector<std::string> labels;
  std::vector<std::vector<std::int64_t>> counts;  // [true][predicted]
  std::vector<std::vector<double>> confusion;     // counts, row-normalized
  std::vector<double> precision, recall, f1;
  double avg_precision = 0.0;
  double avg_recall = 0.0;
  double avg_f1 = 0.0;
  double accuracy = 0.0;
};

// Subgroup labels permuted across subjects (counts kept), for chance-level checks.
EmbeddingSet shuffle_subgroup_labels(const EmbeddingSet& set, std::uint64_t seed);

// Report from a pooled confusion count matrix.
ProbeReport report_from_counts(std::vector<std::vector<std::int64_t>> counts,
                               std::vector<std::string> labels);

// Each sample is classified by the probe of its own held-out fold.
ProbeReport evaluate_probe(std::span<ProbeFold> models, std::span<const EmbeddingSet> views,
                           const FoldAssignment& folds);
ProbeReport evaluate_probe(std::span<ProbeFold> models, const EmbeddingSet& set,
                           const FoldAssignment& folds);

struct PrivacyGap {
  std::vector<double> precision, recall, f1;  // baseline minus debiased, per subgroup
  double avg_precision = 0.0;
  double avg_recall = 0.0;
  double avg_f1 = 0.0;
  double accuracy = 0.0;
};

PrivacyGap privacy_gap(const ProbeReport& baseline, const ProbeReport& debiased);

nlohmann::json to_json(const ProbeReport& report);
ProbeReport probe_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PrivacyGap& gap);

// K x K row-normalized confusion with a header row of subgroup codes.
void save_confusion_csv(const ProbeReport& report, const std::filesystem::path& path);

}  // namespace fairvec
