#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "fairvec/embedding_store.hpp"
#include "fairvec/matcher_metrics.hpp"
#include "fairvec/pairing.hpp"

namespace fairvec {

struct AuditOptions {
  std::vector<double> far_targets = default_far_targets();
  std::size_t det_points = 200;
};

/// Full verification audit of one feature set.
///
/// JSON layout:
///   counts                  genuine / imposter pair counts, pooled and per subgroup
///   global[]                per FAR target: pooled threshold, achieved FAR, pooled TAR and
///                           per subgroup actual FAR, percent difference, TAR
///   per_subgroup_threshold[] per FAR target: each subgroup's own threshold, FAR, TAR
///   calibration             t_g and t_o fit on training folds, accuracy on test folds
///   distribution            per subgroup genuine / imposter mean, median, p5, p95
///   det                     thinned DET staircases, pooled and per subgroup
/// Entries that a target cannot reach (too few imposters) are null.
nlohmann::json run_audit(const EmbeddingSet& set, const PairList& pairs, const AuditOptions& options);

// DET staircase (pooled plus one per subgroup), thinned to `points`.
struct DetCurves {
  std::vector<DetPoint> pooled;
  std::vector<std::vector<DetPoint>> subgroups;
};

DetCurves det_curves(const ScoredPairs& scored, const PairList& pairs, std::size_t points);

}  // namespace fairvec
