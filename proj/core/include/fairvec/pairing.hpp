#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "fairvec/embedding_store.hpp"

namespace fairvec {

enum class PairLabel : std::uint8_t { imposter = 0, genuine = 1 };

struct Pair {
  std::uint32_t i = 0;  // sample index, i < j
  std::uint32_t j = 0;
  PairLabel label = PairLabel::imposter;
  int subgroup = 0;  // dense subgroup index shared by both samples

  friend bool operator==(const Pair&, const Pair&) = default;
};

struct PairList {
  std::vector<Pair> pairs;
  std::vector<int> fold_of_pair;
  int num_folds = 0;
  SubgroupScheme scheme;

  std::size_t size() const { return pairs.size(); }
  friend bool operator==(const PairList&, const PairList&) = default;
};

struct PairPolicy {
  // Imposters sampled per subgroup = round(imposter_ratio * genuine count),
  // capped by what the folds allow. A ratio <= 0 keeps every imposter pair.
  double imposter_ratio = 2.84;
  std::uint64_t seed = 0;
};

// All same-subject pairs plus seeded within-subgroup, within-fold imposters.
PairList build_pairs(const EmbeddingSet& set, const FoldAssignment& folds,
                     const PairPolicy& policy);

enum class Split { train, test };

// test: pairs of subjects in `fold`; train: every other pair.
PairList pairs_for_fold(const PairList& list, int fold, Split split);

// Pairs of one subgroup only.
PairList pairs_for_subgroup(const PairList& list, int subgroup);

std::size_t count_label(const PairList& list, PairLabel label);

// CSV `sample_id_i,sample_id_j,label,subgroup,fold`.
void save_pairs(const EmbeddingSet& set, const PairList& list, const std::filesystem::path& path);
PairList load_pairs(const EmbeddingSet& set, const std::filesystem::path& path);

}  // namespace fairvec
