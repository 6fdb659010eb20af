#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fairvec/embedding_store.hpp"
#include "fairvec/pairing.hpp"

namespace fairvec {

struct ScoredPairs {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;  // 1 genuine, 0 imposter

  std::size_t size() const { return scores.size(); }
};

// Cosine similarity per pair, in pair order.
ScoredPairs score_pairs(const EmbeddingSet& set, const PairList& pairs);

// Entries of `scored` whose pair belongs to `subgroup`.
ScoredPairs restrict_to_subgroup(const ScoredPairs& scored, const PairList& pairs, int subgroup);

struct Confusion {
  double threshold = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t positives() const { return tp + fn; }
  std::int64_t negatives() const { return fp + tn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

// Genuine is predicted iff score > threshold.
Confusion confusion(const ScoredPairs& scored, double threshold);

struct RateReport {
  double fnr = 0.0;
  double far = 0.0;
  double tar = 0.0;
  double tnr = 0.0;
  double accuracy = 0.0;
};

RateReport rates(const Confusion& conf);

// Ascending candidate thresholds: one below the minimum score, the midpoints
// of consecutive distinct scores, and one above the maximum.
std::vector<double> threshold_candidates(const ScoredPairs& scored);

// Confusion at every candidate, in candidate order.
std::vector<Confusion> sweep(const ScoredPairs& scored);

// Accuracy-maximizing candidate; the smallest wins ties.
double calibrate_global(const ScoredPairs& scored);

struct ThresholdSet {
  double global = 0.0;
  std::vector<double> per_subgroup;  // indexed by subgroup
};

ThresholdSet calibrate_per_subgroup(const ScoredPairs& scored, const PairList& pairs);

struct FarThreshold {
  double threshold = 0.0;
  double achieved_far = 0.0;
};

// Smallest candidate whose FAR is at most `target_far`. Throws NumericError
// when there are fewer than 1 / target_far imposters.
FarThreshold threshold_for_far(const ScoredPairs& scored, double target_far);

inline const std::vector<double>& default_far_targets() {
  static const std::vector<double> targets{0.3, 0.1, 0.01, 0.001, 0.0001};
  return targets;
}

std::vector<double> tar_at_far(const ScoredPairs& scored, std::span<const double> fars);

struct DetPoint {
  double threshold = 0.0;
  double far = 0.0;
  double fnr = 0.0;
};

// Staircase over all candidates with FAR falling and FNR rising; when
// num_points > 0 and smaller than the staircase it is thinned to num_points
// entries at evenly spaced indices, keeping both ends.
std::vector<DetPoint> det_curve(const ScoredPairs& scored, std::size_t num_points);

// 100 * (reported - actual) / reported
double percent_error(double reported_far, double actual_far);
// 100 * (actual - reported) / reported
double percent_difference(double reported_far, double actual_far);

struct SubgroupFar {
  int subgroup = 0;
  std::int64_t false_accepts = 0;
  std::int64_t imposters = 0;
  double actual_far = 0.0;
  double percent_difference = 0.0;
};

struct FarAudit {
  double threshold = 0.0;
  double reported_far = 0.0;  // pooled FAR at threshold
  std::vector<SubgroupFar> subgroups;
};

FarAudit subgroup_far_audit(const ScoredPairs& scored, const PairList& pairs, double threshold);

struct Quantiles {
  double mean = 0.0;
  double median = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
};

// Nearest-rank percentiles; the median averages the two middle values of an
// even-sized sample.
Quantiles summarize(std::vector<double> values);

struct ScoreDistribution {
  int subgroup = 0;
  Quantiles genuine;
  Quantiles imposter;
};

std::vector<ScoreDistribution> score_distribution_summary(const ScoredPairs& scored,
                                                          const PairList& pairs);

}  // namespace fairvec
