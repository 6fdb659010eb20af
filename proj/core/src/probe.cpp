#include "fairvec/probe.hpp"

#include <cmath>
#include <numeric>

#include "fairvec/error.hpp"
#include "fairvec/rng.hpp"
#include "io_util.hpp"

namespace fairvec {

nlohmann::json to_json(const ProbeConfig& c) {
  return {{"epochs", c.epochs},       {"batch_size", c.batch_size},
          {"lr", c.lr},               {"dropout", c.dropout},
          {"seed", c.seed},           {"early_stop", c.early_stop},
          {"patience", c.patience},   {"min_rel_improvement", c.min_rel_improvement}};
}

nn::Sequential build_probe(std::size_t d, int num_subgroups, double dropout, std::uint64_t seed) {
  if (num_subgroups < 2) throw InputError("the probe needs at least 2 subgroups");
  Rng rng(seed);
  nn::Sequential net;
  std::uint64_t stream = 0;
  auto drop = [&] { return std::make_unique<nn::Dropout>(dropout, derive_seed(seed, ++stream)); };
  net.add(std::make_unique<nn::Dense>(d, 512, rng)).add(std::make_unique<nn::Relu>()).add(drop());
  net.add(std::make_unique<nn::Dense>(512, 512, rng)).add(std::make_unique<nn::Relu>()).add(drop());
  net.add(std::make_unique<nn::Dense>(512, 256, rng)).add(std::make_unique<nn::Relu>()).add(drop());
  net.add(drop()).add(std::make_unique<nn::Dense>(256, static_cast<std::size_t>(num_subgroups), rng));
  return net;
}

namespace {

const EmbeddingSet& view_for(std::span<const EmbeddingSet> views, int fold) {
  return views.size() == 1 ? views[0] : views[static_cast<std::size_t>(fold)];
}

void check_views(std::span<const EmbeddingSet> views, const FoldAssignment& folds) {
  if (views.empty()) throw InputError("no feature set to probe");
  if (views.size() != 1 && views.size() != static_cast<std::size_t>(folds.num_folds)) {
    throw InputError("expected 1 or " + std::to_string(folds.num_folds) + " feature views, got " +
                     std::to_string(views.size()));
  }
  for (const auto& v : views) {
    if (v.size() != views[0].size() || v.scheme != views[0].scheme) {
      throw InputError("feature views disagree in samples or subgroup scheme");
    }
    validate_folds(v, folds);
  }
}

nn::Tensor2 rows_of(const EmbeddingSet& set, std::span<const std::size_t> idx) {
  nn::Tensor2 x(idx.size(), set.dim);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& v = set.embeddings[idx[r]].vector;
    std::copy(v.begin(), v.end(), x.row(r));
  }
  return x;
}

ProbeFold train_one(const EmbeddingSet& set, const FoldAssignment& folds, const ProbeConfig& config,
                    int f) {
  std::vector<std::size_t> train_idx;
  for (std::size_t n = 0; n < set.size(); ++n) {
    if (folds.fold_of_sample(set, n) != f) train_idx.push_back(n);
  }
  const auto x = rows_of(set, train_idx);
  std::vector<int> y;
  for (auto n : train_idx) y.push_back(set.subgroup_index(n));

  const auto fold_seed = derive_seed(config.seed, static_cast<std::uint64_t>(f));
  ProbeFold out;
  out.model = build_probe(set.dim, set.scheme.size(), config.dropout, fold_seed);
  nn::OptimizerConfig oc;
  oc.kind = nn::OptimizerKind::adam;
  oc.lr = config.lr;
  nn::Optimizer opt(oc, out.model.params());

  Rng rng(derive_seed(fold_seed, 0x5348));
  std::vector<std::size_t> order(train_idx.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = 0.0;
  int stale = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const auto xb = nn::gather_rows(x, idx);
      std::vector<int> yb;
      for (auto i : idx) yb.push_back(y[i]);
      opt.zero_grad();
      const auto loss = nn::softmax_xent(out.model.forward(xb, true), yb);
      out.model.backward(loss.grad);
      opt.step();
      total += loss.loss * static_cast<double>(idx.size());
    }
    const double mean = total / static_cast<double>(order.size());
    if (!std::isfinite(mean)) throw NumericError("probe fold " + std::to_string(f) + ": non-finite loss");
    out.epoch_loss.push_back(mean);
    if (epoch == 0 || mean < best * (1.0 - config.min_rel_improvement)) {
      best = epoch == 0 ? mean : std::min(best, mean);
      stale = 0;
    } else {
      best = std::min(best, mean);
      if (config.early_stop && ++stale >= config.patience) break;
    }
  }
  return out;
}

}  // namespace

std::vector<ProbeFold> train_probe(std::span<const EmbeddingSet> views, const FoldAssignment& folds,
                                   const ProbeConfig& config) {
  check_views(views, folds);
  if (config.batch_size == 0 || config.epochs < 1) throw InputError("bad probe config");
  std::vector<ProbeFold> out;
  for (int f = 0; f < folds.num_folds; ++f) {
    out.push_back(train_one(view_for(views, f), folds, config, f));
  }
  return out;
}

std::vector<ProbeFold> train_probe(const EmbeddingSet& set, const FoldAssignment& folds,
                                   const ProbeConfig& config) {
  return train_probe(std::span<const EmbeddingSet>(&set, 1), folds, config);
}

EmbeddingSet shuffle_subgroup_labels(const EmbeddingSet& set, std::uint64_t seed) {
  std::vector<SubgroupLabel> label_of(static_cast<std::size_t>(set.num_identities));
  for (const auto& e : set.embeddings) label_of[static_cast<std::size_t>(e.subject_id)] = e.subgroup;
  Rng rng(seed);
  rng.shuffle(std::span<SubgroupLabel>(label_of));
  EmbeddingSet out = set;
  for (auto& e : out.embeddings) e.subgroup = label_of[static_cast<std::size_t>(e.subject_id)];
  return out;
}

ProbeReport report_from_counts(std::vector<std::vector<std::int64_t>> counts,
                               std::vector<std::string> labels) {
  const auto k = counts.size();
  ProbeReport r;
  r.num_subgroups = static_cast<int>(k);
  r.labels = std::move(labels);
  r.confusion.assign(k, std::vector<double>(k, 0.0));
  std::int64_t total = 0;
  std::int64_t correct = 0;
  for (std::size_t t = 0; t < k; ++t) {
    if (counts[t].size() != k) throw InputError("confusion counts must be square");
    const auto row = std::accumulate(counts[t].begin(), counts[t].end(), std::int64_t{0});
    total += row;
    correct += counts[t][t];
    for (std::size_t p = 0; p < k; ++p) {
      r.confusion[t][p] = row ? static_cast<double>(counts[t][p]) / static_cast<double>(row) : 0.0;
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    std::int64_t predicted = 0;
    std::int64_t actual = 0;
    for (std::size_t o = 0; o < k; ++o) {
      predicted += counts[o][c];
      actual += counts[c][o];
    }
    const auto tp = static_cast<double>(counts[c][c]);
    const double p = predicted ? tp / static_cast<double>(predicted) : 0.0;
    const double rc = actual ? tp / static_cast<double>(actual) : 0.0;
    r.precision.push_back(p);
    r.recall.push_back(rc);
    r.f1.push_back(p + rc > 0.0 ? 2.0 * p * rc / (p + rc) : 0.0);
  }
  auto mean = [&](const std::vector<double>& v) {
    return k ? std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(k) : 0.0;
  };
  r.avg_precision = mean(r.precision);
  r.avg_recall = mean(r.recall);
  r.avg_f1 = mean(r.f1);
  r.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  r.counts = std::move(counts);
  return r;
}

ProbeReport evaluate_probe(std::span<ProbeFold> models, std::span<const EmbeddingSet> views,
                           const FoldAssignment& folds) {
  check_views(views, folds);
  if (models.size() != static_cast<std::size_t>(folds.num_folds)) {
    throw InputError(std::to_string(models.size()) + " probe models for " +
                     std::to_string(folds.num_folds) + " folds");
  }
  const auto& scheme = views[0].scheme;
  const auto k = static_cast<std::size_t>(scheme.size());
  std::vector<std::vector<std::int64_t>> counts(k, std::vector<std::int64_t>(k, 0));
  for (int f = 0; f < folds.num_folds; ++f) {
    const auto& set = view_for(views, f);
    std::vector<std::size_t> idx;
    for (std::size_t n = 0; n < set.size(); ++n) {
      if (folds.fold_of_sample(set, n) == f) idx.push_back(n);
    }
    const auto logits = models[static_cast<std::size_t>(f)].model.forward(rows_of(set, idx), false);
    if (logits.cols() != k) throw InputError("probe output width does not match the subgroup count");
    const auto pred = nn::argmax_rows(logits);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      ++counts[static_cast<std::size_t>(set.subgroup_index(idx[r]))][static_cast<std::size_t>(pred[r])];
    }
  }
  std::vector<std::string> labels;
  for (int c = 0; c < scheme.size(); ++c) labels.push_back(to_string(scheme.decode(c)));
  return report_from_counts(std::move(counts), std::move(labels));
}

ProbeReport evaluate_probe(std::span<ProbeFold> models, const EmbeddingSet& set,
                           const FoldAssignment& folds) {
  return evaluate_probe(models, std::span<const EmbeddingSet>(&set, 1), folds);
}

PrivacyGap privacy_gap(const ProbeReport& baseline, const ProbeReport& debiased) {
  if (baseline.num_subgroups != debiased.num_subgroups) {
    throw InputError("probe reports cover different subgroup counts");
  }
  PrivacyGap g;
  for (int k = 0; k < baseline.num_subgroups; ++k) {
    const auto i = static_cast<std::size_t>(k);
    g.precision.push_back(baseline.precision[i] - debiased.precision[i]);
    g.recall.push_back(baseline.recall[i] - debiased.recall[i]);
    g.f1.push_back(baseline.f1[i] - debiased.f1[i]);
  }
  g.avg_precision = baseline.avg_precision - debiased.avg_precision;
  g.avg_recall = baseline.avg_recall - debiased.avg_recall;
  g.avg_f1 = baseline.avg_f1 - debiased.avg_f1;
  g.accuracy = baseline.accuracy - debiased.accuracy;
  return g;
}

nlohmann::json to_json(const ProbeReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t k = 0; k < r.labels.size(); ++k) {
    per.push_back({{"subgroup", r.labels[k]},
                   {"precision", r.precision[k]},
                   {"recall", r.recall[k]},
                   {"f1", r.f1[k]}});
  }
  return {{"labels", r.labels},
          {"counts", r.counts},
          {"confusion", r.confusion},
          {"per_subgroup", per},
          {"average", {{"precision", r.avg_precision}, {"recall", r.avg_recall}, {"f1", r.avg_f1}}},
          {"accuracy", r.accuracy}};
}

ProbeReport probe_report_from_json(const nlohmann::json& j) {
  try {
    return report_from_counts(j.at("counts").get<std::vector<std::vector<std::int64_t>>>(),
                              j.at("labels").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad probe report: ") + e.what());
  }
}

nlohmann::json to_json(const PrivacyGap& g) {
  return {{"precision", g.precision},
          {"recall", g.recall},
          {"f1", g.f1},
          {"average", {{"precision", g.avg_precision}, {"recall", g.avg_recall}, {"f1", g.avg_f1}}},
          {"accuracy", g.accuracy}};
}

void save_confusion_csv(const ProbeReport& report, const std::filesystem::path& path) {
  std::string out = "true\\predicted";
  for (const auto& l : report.labels) out += "," + l;
  out += '\n';
  for (std::size_t t = 0; t < report.labels.size(); ++t) {
    out += report.labels[t];
    for (double v : report.confusion[t]) out += "," + detail::format_double(v);
    out += '\n';
  }
  detail::write_file(path, out);
}

}  // namespace fairvec
