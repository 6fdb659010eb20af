#pragma once

// Brute-force reference implementations used to check the library. They share
// no code with core/ and favour obviousness over speed.

#include <cstdint>
#include <vector>

#include "fairvec/embedding_store.hpp"
#include "fairvec/rng.hpp"

namespace fairvec::oracle {

struct Counts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct Rates {
  double fnr = 0, far = 0, tar = 0, tnr = 0, acc = 0;
};

struct DetRow {
  double threshold = 0, far = 0, fnr = 0;
};

// A scored pair list with subgroup tags.
struct Scored {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  std::vector<int> subgroup;
};

Counts count_at(const Scored& s, double threshold);
Rates rates_of(const Counts& c);

// Every threshold the library may pick, recomputed from scratch.
std::vector<double> candidates(const Scored& s);

// Accuracy-maximizing candidate; smallest wins ties. Quadratic.
double best_threshold(const Scored& s);

// Smallest candidate whose false-accept fraction is at most the target.
double far_threshold(const Scored& s, double target);

std::vector<DetRow> det(const Scored& s, std::size_t points);

Scored only_subgroup(const Scored& s, int k);

// Random pair set: n pairs over k subgroups, each subgroup with both classes.
// With `ties`, scores are rounded to a coarse grid.
Scored random_scored(Rng& rng, std::size_t n, int k, bool ties);

// A small labelled set with random vectors, `per_subject` samples each.
EmbeddingSet random_set(Rng& rng, std::size_t dim, int subjects_per_subgroup, int per_subject,
                        bool full_scheme = true);

}  // namespace fairvec::oracle
