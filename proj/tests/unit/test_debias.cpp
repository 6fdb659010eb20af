#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "fairvec/debias.hpp"
#include "fairvec/error.hpp"
#include "fairvec/synthetic_data.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace fairvec {
namespace {

// Four subgroups, 4 subjects each, 3 samples per subject, d = 16.
EmbeddingSet toy_set(std::uint64_t seed) {
  Rng rng(seed);
  return l2_normalize(oracle::random_set(rng, 16, 4, 3, false));
}

struct Graph {
  DebiasModel model;
  LabeledBatch batch;
};

Graph toy_graph(double lambda, std::uint64_t seed = 3) {
  const auto set = toy_set(seed);
  return {build_model(set.dim, set.num_identities, set.scheme.size(), lambda, seed), to_batch(set)};
}

double loss_of(DebiasModel& m, const LabeledBatch& b, bool id, bool att, double lambda) {
  const auto f = m.trunk.forward(b.x, false);
  double out = 0.0;
  if (id) out += nn::softmax_xent(m.id_head.forward(f, false), b.identity).loss;
  if (att) out -= lambda * nn::softmax_xent(m.att_head.forward(f, false), b.subgroup).loss;
  return out;
}

TEST(DebiasModel, Shapes) {
  auto g = toy_graph(1.0);
  EXPECT_EQ(g.model.dim, 16u);
  EXPECT_EQ(g.model.num_identities, 16);
  EXPECT_EQ(g.model.num_subgroups, 4);
  const auto f = g.model.trunk.forward(g.batch.x, false);
  EXPECT_EQ(f.cols(), 8u);
  EXPECT_EQ(g.model.id_head.forward(f, false).cols(), 16u);
  EXPECT_EQ(g.model.att_head.forward(f, false).cols(), 4u);
  EXPECT_EQ(g.batch.x.rows(), 48u);
}

// Trunk gradients are those of L_ID - lambda L_ATT; each head sees its own loss.
TEST(DebiasModel, FullGraphGradientCheck) {
  for (bool normalize : {true, false}) {
    const auto set = toy_set(4);
    auto m = build_model(set.dim, set.num_identities, set.scheme.size(), 1.0, 4, normalize);
    const auto b = to_batch(set);
    const auto analytic = [&] {
      for (auto& p : m.params()) std::fill(p.grad->begin(), p.grad->end(), 0.0);
      forward_backward(m, b.x, b.identity, b.subgroup, true);
    };
    const auto trunk = nn::gradient_check(m.trunk.params(), [&] { return loss_of(m, b, true, true, 1.0); },
                                          analytic);
    const auto id = nn::gradient_check(m.id_head.params(), [&] { return loss_of(m, b, true, false, 1.0); },
                                       analytic);
    const auto att = nn::gradient_check(m.att_head.params(), [&] { return -loss_of(m, b, false, true, 1.0); },
                                        analytic);
    EXPECT_LT(trunk.max_relative_error, 1e-4) << trunk.worst;
    EXPECT_LT(id.max_relative_error, 1e-4) << id.worst;
    EXPECT_LT(att.max_relative_error, 1e-4) << att.worst;
  }
}

// A small step against the trunk gradient lowers L_ID - lambda L_ATT.
TEST(DebiasModel, TrunkStepFollowsAdversarialObjective) {
  auto g = toy_graph(1.0, 6);
  for (auto& p : g.model.params()) std::fill(p.grad->begin(), p.grad->end(), 0.0);
  forward_backward(g.model, g.batch.x, g.batch.identity, g.batch.subgroup, true);
  const double before = adversarial_objective(g.model, g.batch, 1.0);
  for (auto& p : g.model.trunk.params()) {
    for (std::size_t n = 0; n < p.value->size(); ++n) (*p.value)[n] -= 1e-3 * (*p.grad)[n];
  }
  EXPECT_LT(adversarial_objective(g.model, g.batch, 1.0), before);
}

// The reversal only scales what reaches the trunk; the attribute head's own
// gradients do not depend on lambda.
TEST(DebiasModel, AttributeHeadGradientsIgnoreLambda) {
  auto a = toy_graph(1.0, 7);
  auto b = toy_graph(5.0, 7);
  for (auto* g : {&a, &b}) {
    for (auto& p : g->model.params()) std::fill(p.grad->begin(), p.grad->end(), 0.0);
    forward_backward(g->model, g->batch.x, g->batch.identity, g->batch.subgroup, true);
  }
  const auto pa = a.model.att_head.params();
  const auto pb = b.model.att_head.params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t n = 0; n < pa.size(); ++n) EXPECT_EQ(*pa[n].grad, *pb[n].grad);
  // ...while the trunk's first layer gradients differ.
  EXPECT_NE(*a.model.trunk.params()[0].grad, *b.model.trunk.params()[0].grad);
}

TEST(SelectCheckpoint, BestValidationEarliestOnTies) {
  std::vector<EpochLog> logs(4);
  std::vector<Checkpoint> cps(4);
  const double acc[] = {0.5, 0.9, 0.9, 0.7};
  for (int e = 0; e < 4; ++e) {
    logs[e].epoch = cps[e].epoch = e + 1;
    logs[e].val_id_acc = acc[e];
  }
  EXPECT_EQ(select_checkpoint(logs, cps), 1u);
  // Only every second epoch checkpointed.
  std::vector<Checkpoint> sparse{cps[0], cps[2], cps[3]};
  EXPECT_EQ(select_checkpoint(logs, sparse), 1u);
  EXPECT_THROW(select_checkpoint(logs, std::vector<Checkpoint>{}), InputError);
}

TEST(Train, LogsCheckpointsAndDeterminism) {
  const auto set = toy_set(8);
  TrainConfig c;
  c.batch_size = 16;
  c.max_epochs = 4;
  c.checkpoint_every = 2;
  c.seed = 1;
  auto m1 = build_model(set.dim, set.num_identities, set.scheme.size(), 1.0, 2);
  auto m2 = build_model(set.dim, set.num_identities, set.scheme.size(), 1.0, 2);
  const auto r1 = train(m1, set, c);
  const auto r2 = train(m2, set, c);
  ASSERT_EQ(r1.logs.size(), 4u);
  ASSERT_EQ(r1.checkpoints.size(), 2u);
  EXPECT_EQ(r1.checkpoints[1].epoch, 4);
  for (std::size_t e = 0; e < 4; ++e) {
    EXPECT_EQ(r1.logs[e].l_id, r2.logs[e].l_id);
    EXPECT_DOUBLE_EQ(r1.logs[e].total, r1.logs[e].l_id + r1.logs[e].l_att);
  }
  c.batch_size = 1000;
  EXPECT_THROW(train(m1, set, c), InputError);
}

TEST(Export, UnitVectorsOfHalfWidth) {
  auto g = toy_graph(1.0, 9);
  const auto set = toy_set(9);
  const auto out = export_debiased(g.model, set);
  EXPECT_EQ(out.dim, 8u);
  EXPECT_EQ(out.provenance, Provenance::debiased);
  for (const auto& e : out.embeddings) {
    double sq = 0.0;
    for (float v : e.vector) sq += static_cast<double>(v) * v;
    EXPECT_NEAR(sq, 1.0, 1e-6);
  }
  Rng rng(1);
  EXPECT_THROW(export_debiased(g.model, oracle::random_set(rng, 6, 1, 1)), InputError);
}

TEST(EpochLog, Csv) {
  testing::TempDir dir;
  std::vector<EpochLog> logs(2);
  logs[0].epoch = 1;
  logs[0].l_id = 0.5;
  logs[1].epoch = 2;
  save_epoch_log(logs, dir / "log.csv");
  std::ifstream in(dir / "log.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "epoch,l_id,l_att,total,val_id_acc,val_att_acc,lr");
  EXPECT_EQ(first.substr(0, 6), "1,0.5,");
}

TEST(TrainConfigJson, RoundTrip) {
  TrainConfig c;
  c.lambda = 0.0;
  c.max_epochs = 7;
  const auto back = train_config_from_json(to_json(c));
  EXPECT_EQ(back.lambda, 0.0);
  EXPECT_EQ(back.max_epochs, 7);
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_THROW(train_config_from_json(nlohmann::json{{"lambda", -1.0}}), InputError);
}

TEST(RunDebias, EachSampleExportedByItsFoldModel) {
  const auto set = generate([] {
    auto c = default_biased_config(0);
    c.subjects_per_subgroup = 10;
    c.samples_per_subject = 2;
    c.dim = 32;
    c.identity_dim = 2;
    return c;
  }());
  const auto folds = assign_folds(set, 5, 0);
  TrainConfig c;
  c.batch_size = 32;
  c.max_epochs = 2;
  const auto run = run_debias(set, folds, c);
  ASSERT_EQ(run.folds.size(), 5u);
  EXPECT_EQ(run.debiased.dim, 16u);
  for (const auto& f : run.folds) {
    EXPECT_GE(f.selected_epoch, 1);
    for (std::size_t n = 0; n < set.size(); ++n) {
      if (folds.fold_of_sample(set, n) != f.fold) continue;
      EXPECT_EQ(run.debiased.embeddings[n].vector, f.view.embeddings[n].vector);
    }
  }
}

}  // namespace
}  // namespace fairvec
