// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "fairvec/audit.hpp"
#include "fairvec/debias.hpp"
#include "fairvec/embedding_store.hpp"
#include "fairvec/matcher_metrics.hpp"
#include "fairvec/probe.hpp"
#include "fairvec/synthetic_data.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace fairvec {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------- shared study

constexpr std::uint64_t kSeed = 0;
constexpr double kSelectionFar = 0.1;

struct TarStats {
  double mean = 0.0;
  double std = 0.0;
};

TarStats tar_stats(const EmbeddingSet& set, const PairList& pairs) {
  const auto scored = score_pairs(set, pairs);
  // One pooled threshold, TAR read per subgroup.
  const double threshold = threshold_for_far(scored, kSelectionFar).threshold;
  std::vector<double> tar;
  for (int k = 0; k < set.scheme.size(); ++k) {
    tar.push_back(rates(confusion(restrict_to_subgroup(scored, pairs, k), threshold)).tar);
  }
  TarStats s;
  s.mean = std::accumulate(tar.begin(), tar.end(), 0.0) / static_cast<double>(tar.size());
  for (double t : tar) s.std += (t - s.mean) * (t - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(tar.size()));
  return s;
}

// Baseline set, debias runs and probes, each computed once and timed.
class Study {
 public:
  Study() : config_(default_biased_config(kSeed)), set_(generate(config_)) {
    folds_ = assign_folds(set_, 5, kSeed);
    pairs_ = build_pairs(set_, folds_, PairPolicy{2.84, kSeed});
  }

  const EmbeddingSet& set() const { return set_; }
  const PairList& pairs() const { return pairs_; }

  struct Debiased {
    DebiasRun run;
    double seconds = 0.0;
  };
  const Debiased& debiased(double lambda) {
    auto& slot = lambda == 0.0 ? lambda0_ : lambda1_;
    if (!slot) {
      const auto t0 = Clock::now();
      TrainConfig c;
      c.lambda = lambda;
      c.max_epochs = 50;
      c.seed = kSeed;
      slot = Debiased{run_debias(set_, folds_, c), 0.0};
      slot->seconds = seconds_since(t0);
    }
    return *slot;
  }

  struct Probed {
    double accuracy = 0.0;
    double seconds = 0.0;
  };
  // Each fold's probe reads the features of that fold's own debiasing model.
  Probed probe(std::span<const EmbeddingSet> views) {
    const auto t0 = Clock::now();
    ProbeConfig c;
    c.seed = kSeed;
    auto models = train_probe(views, folds_, c);
    return {evaluate_probe(models, views, folds_).accuracy, seconds_since(t0)};
  }
  const Probed& baseline_probe() {
    if (!baseline_probe_) baseline_probe_ = probe(std::span<const EmbeddingSet>(&set_, 1));
    return *baseline_probe_;
  }
  const Probed& debiased_probe(double lambda) {
    auto& slot = lambda == 0.0 ? probe0_ : probe1_;
    if (!slot) {
      std::vector<EmbeddingSet> views;
      for (const auto& f : debiased(lambda).run.folds) views.push_back(f.view);
      slot = probe(views);
    }
    return *slot;
  }

 private:
  SyntheticConfig config_;
  EmbeddingSet set_;
  FoldAssignment folds_;
  PairList pairs_;
  std::optional<Debiased> lambda0_, lambda1_;
  std::optional<Probed> baseline_probe_, probe0_, probe1_;
};

// ---------------------------------------------------------------- criteria

ScoredPairs as_scored(const oracle::Scored& s) { return {s.scores, s.labels}; }

PairList tag_pairs(const oracle::Scored& s, int k) {
  PairList list;
  list.scheme = k == 8 ? SubgroupScheme() : SubgroupScheme({Ethnicity::A, Ethnicity::B}, {Gender::F, Gender::M});
  for (std::size_t n = 0; n < s.scores.size(); ++n) {
    list.pairs.push_back({0, 1, s.labels[n] ? PairLabel::genuine : PairLabel::imposter, s.subgroup[n]});
    list.fold_of_pair.push_back(0);
  }
  list.num_folds = 1;
  return list;
}

Outcome metric_oracle_equivalence() {
  std::size_t mismatches = 0;
  std::size_t checks = 0;
  double worst = 0.0;
  auto rate = [&](double a, double b) {
    ++checks;
    worst = std::max(worst, std::abs(a - b));
    if (!(std::abs(a - b) <= 1e-12)) ++mismatches;
  };
  auto exact = [&](bool same) {
    ++checks;
    if (!same) ++mismatches;
  };
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(derive_seed(77, static_cast<std::uint64_t>(trial)));
    const int k = trial % 2 == 0 ? 8 : 4;
    const auto s = oracle::random_scored(rng, 40 + rng.below(961), k, trial % 3 == 0);
    const auto scored = as_scored(s);
    const auto cand = oracle::candidates(s);
    exact(threshold_candidates(scored) == cand);
    for (double t : cand) {
      const auto mine = confusion(scored, t);
      const auto ref = oracle::count_at(s, t);
      exact(mine.tp == ref.tp && mine.fp == ref.fp && mine.tn == ref.tn && mine.fn == ref.fn);
      const auto r = rates(mine);
      const auto o = oracle::rates_of(ref);
      rate(r.fnr, o.fnr);
      rate(r.far, o.far);
      rate(r.tar, o.tar);
      rate(r.tnr, o.tnr);
      rate(r.accuracy, o.acc);
    }
    const auto ts = calibrate_per_subgroup(scored, tag_pairs(s, k));
    exact(ts.global == oracle::best_threshold(s));
    for (int g = 0; g < k; ++g) {
      exact(ts.per_subgroup[static_cast<std::size_t>(g)] == oracle::best_threshold(oracle::only_subgroup(s, g)));
    }
    for (double target : {0.3, 0.1, 0.01}) {
      if (static_cast<double>(std::count(s.labels.begin(), s.labels.end(), 0)) * target < 1.0) continue;
      exact(threshold_for_far(scored, target).threshold == oracle::far_threshold(s, target));
    }
    for (std::size_t points : {std::size_t{0}, std::size_t{25}}) {
      const auto mine = det_curve(scored, points);
      const auto ref = oracle::det(s, points);
      exact(mine.size() == ref.size());
      for (std::size_t i = 0; i < std::min(mine.size(), ref.size()); ++i) {
        exact(mine[i].threshold == ref[i].threshold);
        rate(mine[i].far, ref[i].far);
        rate(mine[i].fnr, ref[i].fnr);
      }
    }
  }
  return {mismatches == 0,
          fmt::format("{} comparisons, {} mismatches, worst rate gap {:.1e}", checks, mismatches, worst)};
}

Outcome gradient_correctness(Study& study) {
  double probe_err = 0.0;
  double graph_err = 0.0;
  double linear_err = 0.0;

  // Probe: dropout masks frozen after one training pass.
  {
    Rng rng(3);
    auto net = build_probe(64, 8, 0.5, 3);
    nn::Tensor2 x(16, 64);
    for (auto& v : x.data()) v = rng.normal() / 8.0;
    std::vector<int> y(16);
    for (std::size_t n = 0; n < y.size(); ++n) y[n] = static_cast<int>(n % 8);
    net.forward(x, true);
    net.for_each<nn::Dropout>([](nn::Dropout& d) { d.freeze_mask(true); });
    probe_err = nn::gradient_check(
                    net.params(), [&] { return nn::softmax_xent(net.forward(x, true), y).loss; },
                    [&] {
                      net.zero_grad();
                      net.backward(nn::softmax_xent(net.forward(x, true), y).grad);
                    },
                    40, 1e-5, 1)
                    .max_relative_error;
  }

  // Full two-head graph on a batch of the study set. The trunk sees
  // L_ID - lambda L_ATT, each head its own loss.
  {
    const auto& set = study.set();
    std::vector<std::size_t> pick(200);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    for (auto& p : pick) p *= 8;
    const auto sub = subset(set, pick);
    const auto batch = to_batch(sub);
    auto model = build_model(sub.dim, sub.num_identities, sub.scheme.size(), 1.0, 5);
    auto loss = [&](bool id, bool att) {
      const auto f = model.trunk.forward(batch.x, false);
      double out = 0.0;
      if (id) out += nn::softmax_xent(model.id_head.forward(f, false), batch.identity).loss;
      if (att) out -= nn::softmax_xent(model.att_head.forward(f, false), batch.subgroup).loss;
      return out;
    };
    const auto analytic = [&] {
      for (auto& p : model.params()) std::fill(p.grad->begin(), p.grad->end(), 0.0);
      forward_backward(model, batch.x, batch.identity, batch.subgroup, true);
    };
    graph_err = std::max({
        nn::gradient_check(model.trunk.params(), [&] { return loss(true, true); }, analytic, 40, 1e-5, 2)
            .max_relative_error,
        nn::gradient_check(model.id_head.params(), [&] { return loss(true, false); }, analytic, 40, 1e-5, 3)
            .max_relative_error,
        nn::gradient_check(model.att_head.params(), [&] { return -loss(false, true); }, analytic, 40, 1e-5, 4)
            .max_relative_error,
    });
  }

  // Linear graph: two dense layers and a linear read-out.
  {
    Rng rng(4);
    nn::Sequential net;
    net.add(std::make_unique<nn::Dense>(12, 8, rng)).add(std::make_unique<nn::Dense>(8, 5, rng));
    nn::Tensor2 x(10, 12), w(10, 5);
    for (auto& v : x.data()) v = rng.normal();
    for (auto& v : w.data()) v = rng.normal();
    auto loss = [&] {
      const auto y = net.forward(x, false);
      return std::inner_product(y.data().begin(), y.data().end(), w.data().begin(), 0.0);
    };
    linear_err = nn::gradient_check(
                     net.params(), loss,
                     [&] {
                       net.zero_grad();
                       net.forward(x, false);
                       net.backward(w);
                     },
                     50, 1e-4, 5)
                     .max_relative_error;
  }

  const bool pass = probe_err < 1e-4 && graph_err < 1e-4 && linear_err < 1e-7;
  return {pass, fmt::format("max relative error: probe {:.2e}, two-head graph {:.2e}, linear {:.2e}", probe_err,
                            graph_err, linear_err)};
}

Outcome bias_reproduction(Study& study) {
  AuditOptions options;
  options.far_targets = {0.3, 0.1, 0.01};
  options.det_points = 0;
  const auto audit = run_audit(study.set(), study.pairs(), options);
  bool pass = true;
  std::string detail;
  for (std::size_t t = 0; t < options.far_targets.size(); ++t) {
    const auto& g = audit.at("global").at(t);
    const auto& o = audit.at("per_subgroup_threshold").at(t);
    if (!g.at("reachable").get<bool>()) return {false, "pooled target unreachable"};
    double lo = 1e300, hi = -1e300, global_max = 0.0, own_max = 0.0;
    for (const auto& s : g.at("subgroups")) {
      const double pd = s.at("percent_difference").get<double>();
      lo = std::min(lo, pd);
      hi = std::max(hi, pd);
      global_max = std::max(global_max, std::abs(pd));
    }
    for (const auto& s : o.at("subgroups")) {
      if (s.at("percent_difference").is_null()) {
        pass = false;
        continue;
      }
      own_max = std::max(own_max, std::abs(s.at("percent_difference").get<double>()));
    }
    if (!(own_max < global_max)) pass = false;
    if (options.far_targets[t] == 0.01 && !(hi - lo >= 25.0)) pass = false;
    detail += fmt::format("{}FAR {}: spread {:.1f} pts, max |pd| global {:.1f} vs own {:.1f}", t ? "; " : "",
                          options.far_targets[t], hi - lo, global_max, own_max);
  }
  return {pass, detail};
}

Outcome debias_efficacy(Study& study, double& seconds) {
  const auto base = tar_stats(study.set(), study.pairs());
  const auto& d = study.debiased(1.0);
  seconds = d.seconds;
  const auto deb = tar_stats(d.run.debiased, study.pairs());
  const bool pass = deb.std <= 0.7 * base.std && deb.mean >= base.mean - 0.01;
  return {pass, fmt::format("TAR@FAR0.1 std {:.4f} -> {:.4f} (ratio {:.2f}), mean {:.4f} -> {:.4f}", base.std,
                            deb.std, deb.std / base.std, base.mean, deb.mean)};
}

Outcome privacy_efficacy(Study& study, double& seconds) {
  const auto& b = study.baseline_probe();
  const auto& d = study.debiased_probe(1.0);
  seconds = b.seconds + d.seconds + study.debiased(1.0).seconds;
  const double drop = b.accuracy - d.accuracy;
  return {drop >= 0.15 && b.accuracy >= 0.80,
          fmt::format("probe accuracy {:.3f} -> {:.3f} (drop {:.3f})", b.accuracy, d.accuracy, drop)};
}

Outcome lambda_zero_ablation(Study& study, double& seconds) {
  const auto& b = study.baseline_probe();
  const auto& d = study.debiased_probe(0.0);
  seconds = d.seconds + study.debiased(0.0).seconds;
  const double drop = b.accuracy - d.accuracy;
  return {drop < 0.05, fmt::format("lambda 0: probe accuracy {:.3f} -> {:.3f} (drop {:.3f})", b.accuracy,
                                   d.accuracy, drop)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The CLI pipeline twice with identical arguments into two directories.
Outcome determinism() {
  testing::TempDir root("accept");
  auto pipeline = [&](const std::filesystem::path& d) {
    const auto s = [&](const char* rel) { return (d / rel).string(); };
    const std::vector<std::vector<std::string>> steps{
        {"generate", "-o", s("gen/emb.fve"), "--seed", "0"},
        {"pairs", "--embeddings", s("gen/emb.fve"), "--out-dir", s("pairs")},
        {"audit", "--embeddings", s("gen/emb.fve"), "--pairs", s("pairs/pairs.csv"), "--out-dir", s("audit_b")},
        {"debias", "--embeddings", s("gen/emb.fve"), "--folds", s("pairs/folds.csv"), "--epochs", "3", "--out-dir",
         s("debias")},
        {"audit", "--embeddings", s("debias/debiased.fve"), "--pairs", s("pairs/pairs.csv"), "--out-dir",
         s("audit_d")},
        {"probe", "--embeddings", s("gen/emb.fve"), "--folds", s("pairs/folds.csv"), "--epochs", "1", "--out-dir",
         s("probe_b")},
        {"probe", "--embeddings", s("debias/debiased.fve"), "--folds", s("pairs/folds.csv"), "--epochs", "1",
         "--out-dir", s("probe_d")},
        {"report", "--audit-baseline", s("audit_b/audit.json"), "--audit-debiased", s("audit_d/audit.json"),
         "--probe-baseline", s("probe_b/probe.json"), "--probe-debiased", s("probe_d/probe.json"), "--out-dir",
         s("report")},
    };
    for (auto args : steps) {
      args.insert(args.begin(), "fairvec");
      if (cli::run_cli(args) != cli::kOk) return false;
    }
    return true;
  };
  if (!pipeline(root / "a") || !pipeline(root / "b")) return {false, "a pipeline step failed"};
  std::vector<std::string> files{"gen/emb.fve",        "pairs/folds.csv",  "pairs/pairs.csv",
                                 "debias/debiased.fve", "audit_b/audit.json", "audit_d/audit.json",
                                 "probe_b/probe.json", "probe_d/probe.json", "report/report.json",
                                 "report/table3.csv",  "report/table4.csv"};
  for (int f = 0; f < 5; ++f) files.push_back("debias/fold" + std::to_string(f) + ".fvnn");
  std::vector<std::string> differing;
  for (const auto& f : files) {
    const auto a = slurp(root / "a" / f);
    if (a.empty() || a != slurp(root / "b" / f)) differing.push_back(f);
  }
  std::string detail = fmt::format("{} files compared", files.size());
  for (const auto& f : differing) detail += ", differs: " + f;
  return {differing.empty(), detail};
}

Outcome format_round_trips() {
  testing::TempDir dir("accept");
  Rng rng(123);
  int bad_binary = 0;
  int bad_csv = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto set = oracle::random_set(rng, 1 + rng.below(32), 1 + static_cast<int>(rng.below(3)),
                                  1 + static_cast<int>(rng.below(3)), trial % 2 == 0);
    // Mix magnitudes so CSV printing is exercised beyond the unit range.
    for (auto& e : set.embeddings) {
      for (auto& v : e.vector) v = static_cast<float>(v * std::pow(10.0, static_cast<double>(rng.below(9)) - 4.0));
    }
    save_embeddings(set, dir / "x.fve", EmbeddingFormat::binary);
    save_embeddings(set, dir / "x.csv", EmbeddingFormat::csv);
    const auto bin = load_embeddings(dir / "x.fve", EmbeddingFormat::binary);
    const auto csv = load_embeddings(dir / "x.csv", EmbeddingFormat::csv);
    bool bin_ok = bin.size() == set.size() && bin.dim == set.dim && bin.scheme == set.scheme;
    bool csv_ok = csv.size() == set.size() && csv.dim == set.dim;
    for (std::size_t n = 0; bin_ok && n < set.size(); ++n) {
      const auto& a = set.embeddings[n];
      const auto& b = bin.embeddings[n];
      bin_ok = a.sample_id == b.sample_id && a.subject_id == b.subject_id && a.subgroup == b.subgroup &&
               std::memcmp(a.vector.data(), b.vector.data(), a.vector.size() * sizeof(float)) == 0;
    }
    for (std::size_t n = 0; csv_ok && n < set.size(); ++n) {
      csv_ok = csv.embeddings[n].sample_id == set.embeddings[n].sample_id &&
               csv.embeddings[n].subgroup == set.embeddings[n].subgroup;
      for (std::size_t c = 0; csv_ok && c < set.dim; ++c) {
        const double gap = std::abs(static_cast<double>(csv.embeddings[n].vector[c]) - set.embeddings[n].vector[c]);
        worst = std::max(worst, gap);
        csv_ok = gap <= 1e-8;
      }
    }
    bad_binary += !bin_ok;
    bad_csv += !csv_ok;
  }
  return {bad_binary == 0 && bad_csv == 0,
          fmt::format("1000 sets: {} binary and {} CSV failures, worst CSV gap {:.1e}", bad_binary, bad_csv, worst)};
}

}  // namespace
}  // namespace fairvec

// Usage: fairvec_acceptance [--expect-fail ID]...
// An expected failure still prints FAIL but does not set the exit status;
// an expected failure that passes does.
int main(int argc, char** argv) {
  using namespace fairvec;
  std::vector<int> expected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--expect-fail") == 0 && i + 1 < argc) {
      expected.push_back(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: %s [--expect-fail ID]...\n", argv[0]);
      return 2;
    }
  }
  int failures = 0;
  int surprises = 0;
  auto report = [&](int id, const char* name, double limit, double seconds, const Outcome& o) {
    const bool pass = o.pass && (limit <= 0.0 || seconds < limit);
    const bool expect_fail = std::find(expected.begin(), expected.end(), id) != expected.end();
    failures += !pass;
    surprises += pass == expect_fail;
    const std::string limit_text = limit > 0.0 ? fmt::format(", limit {:.0f} s", limit) : "";
    std::printf("%s  %d %s (%.1f s%s): %s%s\n", pass ? "PASS" : "FAIL", id, name, seconds, limit_text.c_str(),
                o.detail.c_str(), expect_fail ? (pass ? " [expected to fail]" : " [expected]") : "");
    std::fflush(stdout);
  };
  auto timed = [&](int id, const char* name, double limit, const std::function<Outcome()>& fn) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    report(id, name, limit, seconds_since(t0), o);
  };

  timed(1, "metric oracle equivalence", 10.0, [] { return metric_oracle_equivalence(); });
  Study study;
  timed(2, "gradient correctness", 60.0, [&] { return gradient_correctness(study); });
  timed(3, "bias reproduction", 30.0, [&] { return bias_reproduction(study); });

  // 4 to 6 share trained models; each reports the time of the work it needs.
  auto shared = [&](int id, const char* name, double limit, Outcome (*fn)(Study&, double&)) {
    double seconds = 0.0;
    Outcome o;
    try {
      o = fn(study, seconds);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    report(id, name, limit, seconds, o);
  };
  shared(4, "debias efficacy", 600.0, debias_efficacy);
  shared(5, "privacy efficacy", 600.0, privacy_efficacy);
  shared(6, "lambda 0 ablation", 0.0, lambda_zero_ablation);

  timed(7, "determinism", 0.0, [] { return determinism(); });
  timed(8, "format round trips", 0.0, [] { return format_round_trips(); });

  std::printf("%d of 8 criteria passed\n", 8 - failures);
  return surprises == 0 ? 0 : 1;
}
