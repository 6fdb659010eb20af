#include "fairvec/debias.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "fairvec/error.hpp"
#include "fairvec/matcher_metrics.hpp"
#include "fairvec/rng.hpp"
#include "io_util.hpp"

namespace fairvec {

nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"lr", c.lr},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"lr_decay", c.lr_decay},
          {"max_decays", c.max_decays},
          {"plateau_patience", c.plateau_patience},
          {"plateau_tolerance", c.plateau_tolerance},
          {"lambda", c.lambda},
          {"max_epochs", c.max_epochs},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"normalize_attribute_input", c.normalize_attribute_input},
          {"selection_far", c.selection_far},
          {"imposter_ratio", c.imposter_ratio}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.max_decays = j.value("max_decays", c.max_decays);
    c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
    c.plateau_tolerance = j.value("plateau_tolerance", c.plateau_tolerance);
    c.lambda = j.value("lambda", c.lambda);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.normalize_attribute_input = j.value("normalize_attribute_input", c.normalize_attribute_input);
    c.selection_far = j.value("selection_far", c.selection_far);
    c.imposter_ratio = j.value("imposter_ratio", c.imposter_ratio);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad train config: ") + e.what());
  }
  if (c.batch_size == 0) throw InputError("batch_size must be positive");
  if (!(c.lambda >= 0.0)) throw InputError("lambda must be >= 0");
  if (c.max_epochs < 1) throw InputError("max_epochs must be at least 1");
  if (c.checkpoint_every < 1) throw InputError("checkpoint_every must be at least 1");
  return c;
}

std::vector<nn::Param> DebiasModel::params() {
  auto out = trunk.params();
  for (auto* net : {&id_head, &att_head}) {
    for (auto p : net->params()) out.push_back(p);
  }
  return out;
}

void DebiasModel::set_lambda(double lambda) {
  att_head.for_each<nn::GradientReversal>([&](nn::GradientReversal& g) { g.set_lambda(lambda); });
}

DebiasModel build_model(std::size_t d, int num_identities, int num_subgroups, double lambda,
                        std::uint64_t seed, bool normalize_attribute_input) {
  if (d < 2 || d % 2 != 0) throw InputError("embedding dimension must be even, got " + std::to_string(d));
  if (num_identities < 2) throw InputError("need at least 2 identities to train");
  if (num_subgroups < 2) throw InputError("need at least 2 subgroups to train");
  Rng rng(seed);
  DebiasModel m;
  m.dim = d;
  m.num_identities = num_identities;
  m.num_subgroups = num_subgroups;
  m.trunk.add(std::make_unique<nn::Dense>(d, d, rng))
      .add(std::make_unique<nn::Relu>())
      .add(std::make_unique<nn::Dense>(d, d / 2, rng));
  m.id_head.add(std::make_unique<nn::Dense>(d / 2, static_cast<std::size_t>(num_identities), rng));
  m.att_head.add(std::make_unique<nn::GradientReversal>(lambda));
  if (normalize_attribute_input) m.att_head.add(std::make_unique<nn::L2Normalize>());
  m.att_head.add(std::make_unique<nn::Dense>(d / 2, static_cast<std::size_t>(num_subgroups), rng));
  return m;
}

LabeledBatch to_batch(const EmbeddingSet& set) {
  LabeledBatch b;
  b.x = nn::Tensor2(set.size(), set.dim);
  for (std::size_t n = 0; n < set.size(); ++n) {
    const auto& e = set.embeddings[n];
    std::copy(e.vector.begin(), e.vector.end(), b.x.row(n));
    b.identity.push_back(e.subject_id);
    b.subgroup.push_back(set.subgroup_index(n));
  }
  return b;
}

StepLosses forward_backward(DebiasModel& model, const nn::Tensor2& x, std::span<const int> identity,
                            std::span<const int> subgroup, bool training) {
  const auto f = model.trunk.forward(x, training);
  const auto id = nn::softmax_xent(model.id_head.forward(f, training), identity);
  const auto att = nn::softmax_xent(model.att_head.forward(f, training), subgroup);
  auto grad = model.id_head.backward(id.grad);
  const auto grad_att = model.att_head.backward(att.grad);
  auto& g = grad.data();
  const auto& ga = grad_att.data();
  for (std::size_t n = 0; n < g.size(); ++n) g[n] += ga[n];
  model.trunk.backward(grad);
  return {id.loss, att.loss, id.correct, att.correct};
}

double adversarial_objective(DebiasModel& model, const LabeledBatch& batch, double lambda) {
  const auto f = model.trunk.forward(batch.x, false);
  const auto id = nn::softmax_xent(model.id_head.forward(f, false), batch.identity);
  const auto att = nn::softmax_xent(model.att_head.forward(f, false), batch.subgroup);
  return id.loss - lambda * att.loss;
}

Validation make_validation(const EmbeddingSet& set, std::span<const std::size_t> samples,
                           double imposter_ratio, std::uint64_t seed) {
  Validation v{subset(set, samples), {}};
  FoldAssignment one{1, std::vector<int>(static_cast<std::size_t>(v.set.num_identities), 0)};
  v.pairs = build_pairs(v.set, one, PairPolicy{imposter_ratio, seed});
  return v;
}

namespace {

struct ValidationScore {
  double tar = 0.0;
  double att_acc = 0.0;
};

ValidationScore score_validation(DebiasModel& model, const Validation& v, double far) {
  auto exported = export_debiased(model, v.set);
  const auto scored = score_pairs(exported, v.pairs);
  const std::vector<double> target{far};
  ValidationScore out;
  out.tar = tar_at_far(scored, target).front();
  const auto batch = to_batch(v.set);
  const auto f = model.trunk.forward(batch.x, false);
  const auto logits = model.att_head.forward(f, false);
  const auto pred = nn::argmax_rows(logits);
  std::size_t correct = 0;
  for (std::size_t n = 0; n < pred.size(); ++n) correct += pred[n] == batch.subgroup[n];
  out.att_acc = static_cast<double>(correct) / static_cast<double>(pred.size());
  return out;
}

}  // namespace

TrainResult train(DebiasModel& model, const EmbeddingSet& train_set, const TrainConfig& config,
                  const Validation* validation) {
  if (train_set.dim != model.dim) throw InputError("training set dimension does not match the model");
  if (train_set.num_identities != model.num_identities) {
    throw InputError("training set has " + std::to_string(train_set.num_identities) +
                     " identities, model expects " + std::to_string(model.num_identities));
  }
  if (config.batch_size > train_set.size()) {
    throw InputError("batch_size " + std::to_string(config.batch_size) + " exceeds the " +
                     std::to_string(train_set.size()) + " training samples");
  }
  model.set_lambda(config.lambda);
  const auto data = to_batch(train_set);
  nn::OptimizerConfig oc;
  oc.kind = nn::OptimizerKind::sgd_momentum;
  oc.lr = config.lr;
  oc.momentum = config.momentum;
  oc.weight_decay = config.weight_decay;
  nn::Optimizer opt(oc, model.params());
  nn::PlateauScheduler plateau(config.lr_decay, config.plateau_patience, config.max_decays,
                               config.plateau_tolerance);

  Rng rng(derive_seed(config.seed, 0x5348));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    EpochLog log;
    log.epoch = epoch;
    log.lr = opt.lr();
    std::size_t att_correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const auto stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const auto xb = nn::gather_rows(data.x, idx);
      std::vector<int> yid;
      std::vector<int> yatt;
      for (auto i : idx) {
        yid.push_back(data.identity[i]);
        yatt.push_back(data.subgroup[i]);
      }
      opt.zero_grad();
      StepLosses s;
      try {
        s = forward_backward(model, xb, yid, yatt, true);
        opt.step();
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + ": " + e.what());
      }
      const double weight = static_cast<double>(idx.size());
      log.l_id += s.l_id * weight;
      log.l_att += s.l_att * weight;
      att_correct += s.att_correct;
    }
    const double n = static_cast<double>(order.size());
    log.l_id /= n;
    log.l_att /= n;
    log.total = log.l_id + log.l_att;
    log.adversarial = log.l_id - config.lambda * log.l_att;
    log.train_att_acc = static_cast<double>(att_correct) / n;
    if (validation) {
      const auto v = score_validation(model, *validation, config.selection_far);
      log.val_id_acc = v.tar;
      log.val_att_acc = v.att_acc;
    }
    result.logs.push_back(log);
    if (epoch % config.checkpoint_every == 0 || epoch == config.max_epochs) {
      result.checkpoints.push_back({epoch, model.trunk, model.id_head, model.att_head});
    }
    plateau.observe(log.l_id, opt);
  }
  return result;
}

std::size_t select_checkpoint(std::span<const EpochLog> logs, std::span<const Checkpoint> checkpoints) {
  if (checkpoints.empty()) throw InputError("no checkpoints to select from");
  std::optional<std::size_t> best;
  double best_score = 0.0;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const auto it = std::find_if(logs.begin(), logs.end(),
                                 [&](const EpochLog& l) { return l.epoch == checkpoints[c].epoch; });
    if (it == logs.end()) continue;
    if (!best || it->val_id_acc > best_score) {
      best = c;
      best_score = it->val_id_acc;
    }
  }
  if (!best) throw InputError("no checkpoint has a validation score");
  return *best;
}

EmbeddingSet export_debiased(DebiasModel& model, const EmbeddingSet& set) {
  if (set.dim != model.dim) {
    throw InputError("export: set dimension " + std::to_string(set.dim) + " != model dimension " +
                     std::to_string(model.dim));
  }
  EmbeddingSet out = set;
  out.dim = model.dim / 2;
  out.provenance = Provenance::debiased;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < set.size(); start += kChunk) {
    const auto stop = std::min(set.size(), start + kChunk);
    nn::Tensor2 x(stop - start, set.dim);
    for (std::size_t n = start; n < stop; ++n) {
      const auto& v = set.embeddings[n].vector;
      std::copy(v.begin(), v.end(), x.row(n - start));
    }
    const auto f = model.trunk.forward(x, false);
    for (std::size_t n = start; n < stop; ++n) {
      const double* row = f.row(n - start);
      double sq = 0.0;
      for (std::size_t c = 0; c < f.cols(); ++c) sq += row[c] * row[c];
      const double norm = std::sqrt(sq);
      if (!(norm > 1e-12)) {
        throw NumericError("debiased feature of '" + set.embeddings[n].sample_id + "' is zero");
      }
      auto& dst = out.embeddings[n].vector;
      dst.resize(f.cols());
      for (std::size_t c = 0; c < f.cols(); ++c) dst[c] = static_cast<float>(row[c] / norm);
    }
  }
  return out;
}

void save_epoch_log(std::span<const EpochLog> logs, const std::filesystem::path& path) {
  std::string out = "epoch,l_id,l_att,total,val_id_acc,val_att_acc,lr\n";
  for (const auto& l : logs) {
    out += std::to_string(l.epoch);
    for (double v : {l.l_id, l.l_att, l.total, l.val_id_acc, l.val_att_acc, l.lr}) {
      out += ',';
      out += detail::format_double(v);
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

namespace {

FoldRun run_fold(const EmbeddingSet& set, const FoldAssignment& folds, const TrainConfig& config,
                 int f) {
  const int val_fold = folds.num_folds >= 3 ? (f + 1) % folds.num_folds : -1;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  for (std::size_t n = 0; n < set.size(); ++n) {
    const int sf = folds.fold_of_sample(set, n);
    if (sf == f) continue;
    (sf == val_fold ? val_idx : train_idx).push_back(n);
  }
  const auto train_set = subset(set, train_idx);
  std::optional<Validation> validation;
  if (!val_idx.empty()) {
    validation = make_validation(set, val_idx, config.imposter_ratio,
                                 derive_seed(config.seed, 0x7661 + static_cast<std::uint64_t>(f)));
  }

  FoldRun run;
  run.fold = f;
  run.model = build_model(set.dim, train_set.num_identities, set.scheme.size(), config.lambda,
                          derive_seed(config.seed, static_cast<std::uint64_t>(f)),
                          config.normalize_attribute_input);
  TrainConfig fold_config = config;
  fold_config.seed = derive_seed(config.seed, 0x100 + static_cast<std::uint64_t>(f));
  auto result = train(run.model, train_set, fold_config, validation ? &*validation : nullptr);
  const std::size_t pick =
      validation ? select_checkpoint(result.logs, result.checkpoints) : result.checkpoints.size() - 1;
  auto& chosen = result.checkpoints[pick];
  run.selected_epoch = chosen.epoch;
  run.model.trunk = std::move(chosen.trunk);
  run.model.id_head = std::move(chosen.id_head);
  run.model.att_head = std::move(chosen.att_head);
  run.logs = std::move(result.logs);
  run.view = export_debiased(run.model, set);
  return run;
}

}  // namespace

DebiasRun run_debias(const EmbeddingSet& set, const FoldAssignment& folds,
                     const TrainConfig& config, int threads) {
  validate_folds(set, folds);
  DebiasRun run;
  run.folds.resize(static_cast<std::size_t>(folds.num_folds));
  const int workers = std::max(1, threads);
  for (int start = 0; start < folds.num_folds; start += workers) {
    std::vector<std::future<FoldRun>> jobs;
    const int stop = std::min(folds.num_folds, start + workers);
    for (int f = start; f < stop; ++f) {
      jobs.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred,
                                [&, f] { return run_fold(set, folds, config, f); }));
    }
    for (int f = start; f < stop; ++f) {
      run.folds[static_cast<std::size_t>(f)] = jobs[static_cast<std::size_t>(f - start)].get();
    }
  }
  run.debiased = set;
  run.debiased.dim = set.dim / 2;
  run.debiased.provenance = Provenance::debiased;
  for (std::size_t n = 0; n < set.size(); ++n) {
    const auto f = static_cast<std::size_t>(folds.fold_of_sample(set, n));
    run.debiased.embeddings[n].vector = run.folds[f].view.embeddings[n].vector;
  }
  return run;
}

}  // namespace fairvec
