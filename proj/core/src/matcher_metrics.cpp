#include "fairvec/matcher_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fairvec/error.hpp"

namespace fairvec {

ScoredPairs score_pairs(const EmbeddingSet& set, const PairList& pairs) {
  std::vector<double> norms(set.size());
  for (std::size_t n = 0; n < set.size(); ++n) {
    double sq = 0.0;
    for (float v : set.embeddings[n].vector) sq += static_cast<double>(v) * v;
    norms[n] = std::sqrt(sq);
  }
  ScoredPairs out;
  out.scores.reserve(pairs.size());
  out.labels.reserve(pairs.size());
  for (const auto& p : pairs.pairs) {
    if (p.i >= set.size() || p.j >= set.size()) throw InputError("pair refers to a missing sample");
    for (auto idx : {p.i, p.j}) {
      if (!(norms[idx] > 0.0)) {
        throw NumericError("zero-norm vector for sample '" + set.embeddings[idx].sample_id + "'");
      }
    }
    const auto& a = set.embeddings[p.i].vector;
    const auto& b = set.embeddings[p.j].vector;
    double dot = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) dot += static_cast<double>(a[c]) * b[c];
    out.scores.push_back(dot / (norms[p.i] * norms[p.j]));
    out.labels.push_back(p.label == PairLabel::genuine ? 1 : 0);
  }
  return out;
}

ScoredPairs restrict_to_subgroup(const ScoredPairs& scored, const PairList& pairs, int subgroup) {
  if (scored.size() != pairs.size()) throw InputError("scores and pairs differ in length");
  ScoredPairs out;
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    if (pairs.pairs[n].subgroup != subgroup) continue;
    out.scores.push_back(scored.scores[n]);
    out.labels.push_back(scored.labels[n]);
  }
  return out;
}

Confusion confusion(const ScoredPairs& scored, double threshold) {
  Confusion c;
  c.threshold = threshold;
  for (std::size_t n = 0; n < scored.size(); ++n) {
    const bool accept = scored.scores[n] > threshold;
    if (scored.labels[n]) {
      ++(accept ? c.tp : c.fn);
    } else {
      ++(accept ? c.fp : c.tn);
    }
  }
  return c;
}

RateReport rates(const Confusion& conf) {
  const auto p = conf.positives();
  const auto n = conf.negatives();
  if (p == 0) throw NumericError("no genuine pairs: TAR and FNR are undefined");
  if (n == 0) throw NumericError("no imposter pairs: FAR and TNR are undefined");
  RateReport r;
  r.tar = static_cast<double>(conf.tp) / static_cast<double>(p);
  r.fnr = static_cast<double>(conf.fn) / static_cast<double>(p);
  r.far = static_cast<double>(conf.fp) / static_cast<double>(n);
  r.tnr = static_cast<double>(conf.tn) / static_cast<double>(n);
  r.accuracy = static_cast<double>(conf.tp + conf.tn) / static_cast<double>(p + n);
  return r;
}

namespace {

struct Level {
  double value;
  std::int64_t genuine;
  std::int64_t imposter;
};

// Distinct scores ascending with their class counts.
std::vector<Level> levels(const ScoredPairs& scored) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scored.scores[a] < scored.scores[b]; });
  std::vector<Level> out;
  for (auto n : order) {
    const double s = scored.scores[n];
    if (!std::isfinite(s)) throw NumericError("non-finite score");
    if (out.empty() || out.back().value != s) out.push_back({s, 0, 0});
    ++(scored.labels[n] ? out.back().genuine : out.back().imposter);
  }
  return out;
}

double between(double a, double b) {
  const double mid = a + (b - a) / 2.0;
  return (mid > a && mid < b) ? mid : a;
}

std::vector<double> candidates_of(const std::vector<Level>& lv) {
  std::vector<double> out;
  if (lv.empty()) return out;
  out.reserve(lv.size() + 1);
  out.push_back(lv.front().value - 1.0);
  for (std::size_t n = 0; n + 1 < lv.size(); ++n) out.push_back(between(lv[n].value, lv[n + 1].value));
  out.push_back(lv.back().value + 1.0);
  return out;
}

void require_both_classes(const ScoredPairs& scored, const char* what) {
  const auto pos = std::count(scored.labels.begin(), scored.labels.end(), std::uint8_t{1});
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(scored.size())) {
    throw NumericError(std::string(what) + " needs at least one genuine and one imposter pair");
  }
}

}  // namespace

std::vector<double> threshold_candidates(const ScoredPairs& scored) {
  return candidates_of(levels(scored));
}

std::vector<Confusion> sweep(const ScoredPairs& scored) {
  const auto lv = levels(scored);
  const auto cand = candidates_of(lv);
  std::int64_t pos = 0;
  std::int64_t neg = 0;
  for (const auto& l : lv) {
    pos += l.genuine;
    neg += l.imposter;
  }
  // Candidate n sits between level n-1 and level n: levels n.. are accepted.
  std::vector<Confusion> out(cand.size());
  std::int64_t rejected_pos = 0;
  std::int64_t rejected_neg = 0;
  for (std::size_t n = 0; n < cand.size(); ++n) {
    if (n > 0) {
      rejected_pos += lv[n - 1].genuine;
      rejected_neg += lv[n - 1].imposter;
    }
    out[n] = {cand[n], pos - rejected_pos, neg - rejected_neg, rejected_neg, rejected_pos};
  }
  return out;
}

double calibrate_global(const ScoredPairs& scored) {
  require_both_classes(scored, "threshold calibration");
  const auto table = sweep(scored);
  std::size_t best = 0;
  for (std::size_t n = 1; n < table.size(); ++n) {
    if (table[n].tp + table[n].tn > table[best].tp + table[best].tn) best = n;
  }
  return table[best].threshold;
}

ThresholdSet calibrate_per_subgroup(const ScoredPairs& scored, const PairList& pairs) {
  ThresholdSet out;
  out.global = calibrate_global(scored);
  for (int k = 0; k < pairs.scheme.size(); ++k) {
    const auto sub = restrict_to_subgroup(scored, pairs, k);
    try {
      out.per_subgroup.push_back(calibrate_global(sub));
    } catch (const NumericError&) {
      throw NumericError("subgroup " + to_string(pairs.scheme.decode(k)) +
                         " lacks genuine or imposter pairs for calibration");
    }
  }
  return out;
}

FarThreshold threshold_for_far(const ScoredPairs& scored, double target_far) {
  if (!(target_far > 0.0 && target_far < 1.0)) {
    throw InputError("target FAR must lie in (0, 1)");
  }
  const auto negatives = std::count(scored.labels.begin(), scored.labels.end(), std::uint8_t{0});
  if (negatives == 0) throw NumericError("FAR calibration needs imposter pairs");
  if (static_cast<double>(negatives) * target_far < 1.0) {
    throw NumericError("target FAR " + std::to_string(target_far) + " is unreachable with " +
                       std::to_string(negatives) + " imposter pairs; at least " +
                       std::to_string(static_cast<long long>(std::ceil(1.0 / target_far))) +
                       " are needed, build more pairs");
  }
  const auto table = sweep(scored);
  for (const auto& c : table) {
    const double far = static_cast<double>(c.fp) / static_cast<double>(c.negatives());
    if (far <= target_far) return {c.threshold, far};
  }
  return {table.back().threshold, 0.0};
}

std::vector<double> tar_at_far(const ScoredPairs& scored, std::span<const double> fars) {
  require_both_classes(scored, "TAR at FAR");
  std::vector<double> out;
  for (double target : fars) {
    const auto t = threshold_for_far(scored, target);
    out.push_back(rates(confusion(scored, t.threshold)).tar);
  }
  return out;
}

std::vector<DetPoint> det_curve(const ScoredPairs& scored, std::size_t num_points) {
  require_both_classes(scored, "a DET curve");
  const auto table = sweep(scored);
  std::vector<DetPoint> full;
  full.reserve(table.size());
  for (const auto& c : table) {
    const auto r = rates(c);
    full.push_back({c.threshold, r.far, r.fnr});
  }
  if (num_points == 0 || num_points >= full.size()) return full;
  std::vector<DetPoint> out;
  out.reserve(num_points);
  if (num_points == 1) {
    out.push_back(full.front());
    return out;
  }
  const double step = static_cast<double>(full.size() - 1) / static_cast<double>(num_points - 1);
  for (std::size_t n = 0; n < num_points; ++n) {
    out.push_back(full[static_cast<std::size_t>(std::llround(step * static_cast<double>(n)))]);
  }
  return out;
}

double percent_error(double reported_far, double actual_far) {
  if (reported_far == 0.0) throw NumericError("percent error is undefined for a reported FAR of 0");
  return 100.0 * (reported_far - actual_far) / reported_far;
}

double percent_difference(double reported_far, double actual_far) {
  if (reported_far == 0.0) throw NumericError("percent difference is undefined for a reported FAR of 0");
  return 100.0 * (actual_far - reported_far) / reported_far;
}

FarAudit subgroup_far_audit(const ScoredPairs& scored, const PairList& pairs, double threshold) {
  if (scored.size() != pairs.size()) throw InputError("scores and pairs differ in length");
  const auto k_count = static_cast<std::size_t>(pairs.scheme.size());
  std::vector<std::int64_t> fa(k_count, 0);
  std::vector<std::int64_t> neg(k_count, 0);
  for (std::size_t n = 0; n < scored.size(); ++n) {
    if (scored.labels[n]) continue;
    const auto k = static_cast<std::size_t>(pairs.pairs[n].subgroup);
    ++neg[k];
    if (scored.scores[n] > threshold) ++fa[k];
  }
  const auto total_neg = std::accumulate(neg.begin(), neg.end(), std::int64_t{0});
  const auto total_fa = std::accumulate(fa.begin(), fa.end(), std::int64_t{0});
  if (total_neg == 0) throw NumericError("FAR audit needs imposter pairs");

  FarAudit out;
  out.threshold = threshold;
  out.reported_far = static_cast<double>(total_fa) / static_cast<double>(total_neg);
  for (std::size_t k = 0; k < k_count; ++k) {
    if (neg[k] == 0) {
      throw NumericError("subgroup " + to_string(pairs.scheme.decode(static_cast<int>(k))) +
                         " has no imposter pairs");
    }
    SubgroupFar s;
    s.subgroup = static_cast<int>(k);
    s.false_accepts = fa[k];
    s.imposters = neg[k];
    s.actual_far = static_cast<double>(fa[k]) / static_cast<double>(neg[k]);
    s.percent_difference =
        out.reported_far > 0.0 ? percent_difference(out.reported_far, s.actual_far) : 0.0;
    out.subgroups.push_back(s);
  }
  return out;
}

Quantiles summarize(std::vector<double> values) {
  if (values.empty()) throw NumericError("cannot summarize an empty score list");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto nearest_rank = [&](double p) {
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return values[rank - 1];
  };
  Quantiles q;
  q.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  q.median = n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
  q.p5 = nearest_rank(5.0);
  q.p95 = nearest_rank(95.0);
  return q;
}

std::vector<ScoreDistribution> score_distribution_summary(const ScoredPairs& scored,
                                                          const PairList& pairs) {
  std::vector<ScoreDistribution> out;
  for (int k = 0; k < pairs.scheme.size(); ++k) {
    const auto sub = restrict_to_subgroup(scored, pairs, k);
    std::vector<double> gen;
    std::vector<double> imp;
    for (std::size_t n = 0; n < sub.size(); ++n) (sub.labels[n] ? gen : imp).push_back(sub.scores[n]);
    if (gen.empty() || imp.empty()) {
      throw NumericError("subgroup " + to_string(pairs.scheme.decode(k)) +
                         " lacks genuine or imposter scores");
    }
    out.push_back({k, summarize(std::move(gen)), summarize(std::move(imp))});
  }
  return out;
}

}  // namespace fairvec
