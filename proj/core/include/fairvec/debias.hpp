#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairvec/embedding_store.hpp"
#include "fairvec/nn.hpp"
#include "fairvec/pairing.hpp"

namespace fairvec {

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lr_decay = 0.1;
  int max_decays = 2;
  int plateau_patience = 3;
  double plateau_tolerance = 0.01;  // relative improvement that resets patience
  double lambda = 1.0;
  int max_epochs = 50;
  std::uint64_t seed = 0;
  int checkpoint_every = 1;
  // L2-normalize the attribute head's input so its curvature does not grow
  // with the trunk's feature norm.
  bool normalize_attribute_input = true;
  double selection_far = 0.1;       // FAR at which validation TAR is measured
  double imposter_ratio = 2.84;     // for validation pairs
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Trunk M: dense(d->d) + ReLU + dense(d->d/2).
/// Identity head: dense(d/2->I). Attribute head: GRL(lambda) [+ L2Normalize] + dense(d/2->K).
struct DebiasModel {
  nn::Sequential trunk;
  nn::Sequential id_head;
  nn::Sequential att_head;
  std::size_t dim = 0;
  int num_identities = 0;
  int num_subgroups = 0;

  std::vector<nn::Param> params();
  void set_lambda(double lambda);
};

DebiasModel build_model(std::size_t d, int num_identities, int num_subgroups, double lambda,
                        std::uint64_t seed, bool normalize_attribute_input = true);

// Samples, identity targets re-indexed to the set's subjects, and subgroup targets.
struct LabeledBatch {
  nn::Tensor2 x;
  std::vector<int> identity;
  std::vector<int> subgroup;
};

LabeledBatch to_batch(const EmbeddingSet& set);

struct StepLosses {
  double l_id = 0.0;
  double l_att = 0.0;
  std::size_t id_correct = 0;
  std::size_t att_correct = 0;
};

// Forward and backward for one batch; gradients accumulate in the model.
// The trunk receives grad(L_ID) - lambda grad(L_ATT) through the reversal.
StepLosses forward_backward(DebiasModel& model, const nn::Tensor2& x, std::span<const int> identity,
                            std::span<const int> subgroup, bool training);

// L_ID - lambda L_ATT evaluated in eval mode (no gradients).
double adversarial_objective(DebiasModel& model, const LabeledBatch& batch, double lambda);

struct EpochLog {
  int epoch = 0;
  double l_id = 0.0;
  double l_att = 0.0;
  double total = 0.0;        // L_ID + L_ATT
  double adversarial = 0.0;  // L_ID - lambda L_ATT
  double val_id_acc = 0.0;   // validation TAR at the selection FAR
  double val_att_acc = 0.0;  // attribute-head accuracy on validation samples
  double train_att_acc = 0.0;
  double lr = 0.0;
};

struct Checkpoint {
  int epoch = 0;
  nn::Sequential trunk;
  nn::Sequential id_head;
  nn::Sequential att_head;
};

struct TrainResult {
  std::vector<EpochLog> logs;
  std::vector<Checkpoint> checkpoints;
};

struct Validation {
  EmbeddingSet set;
  PairList pairs;
};

// Validation set over the given samples with its own single-fold pair list.
Validation make_validation(const EmbeddingSet& set, std::span<const std::size_t> samples,
                           double imposter_ratio, std::uint64_t seed);

TrainResult train(DebiasModel& model, const EmbeddingSet& train_set, const TrainConfig& config,
                  const Validation* validation = nullptr);

// Index of the checkpoint whose epoch has the best val_id_acc; earliest wins ties.
std::size_t select_checkpoint(std::span<const EpochLog> logs, std::span<const Checkpoint> checkpoints);

// Eval-mode trunk applied to every sample, unit-normalized, dim d/2.
EmbeddingSet export_debiased(DebiasModel& model, const EmbeddingSet& set);

void save_epoch_log(std::span<const EpochLog> logs, const std::filesystem::path& path);

/// Cross-fold run: for fold f the model trains on the folds other than f and
/// (f+1) mod F, validates on (f+1) mod F, and exports fold f's samples.
struct FoldRun {
  int fold = 0;
  int selected_epoch = 0;
  std::vector<EpochLog> logs;
  DebiasModel model;   // selected checkpoint
  EmbeddingSet view;   // every sample through this fold's model
};

struct DebiasRun {
  EmbeddingSet debiased;  // each sample exported by the model of its own fold
  std::vector<FoldRun> folds;
};

DebiasRun run_debias(const EmbeddingSet& set, const FoldAssignment& folds,
                     const TrainConfig& config, int threads = 1);

}  // namespace fairvec
