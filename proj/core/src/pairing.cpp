#include "fairvec/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "fairvec/error.hpp"
#include "fairvec/rng.hpp"
#include "io_util.hpp"

namespace fairvec {

PairList build_pairs(const EmbeddingSet& set, const FoldAssignment& folds,
                     const PairPolicy& policy) {
  validate_folds(set, folds);
  const int k_count = set.scheme.size();

  // Samples grouped by subgroup, then subject.
  std::vector<std::vector<std::vector<std::uint32_t>>> by_subject(static_cast<std::size_t>(k_count));
  std::vector<int> local(static_cast<std::size_t>(set.num_identities), -1);
  std::vector<std::vector<int>> subjects_of(static_cast<std::size_t>(k_count));
  for (std::size_t n = 0; n < set.size(); ++n) {
    const auto& e = set.embeddings[n];
    const auto k = static_cast<std::size_t>(set.subgroup_index(n));
    auto& slot = local[static_cast<std::size_t>(e.subject_id)];
    if (slot < 0) {
      slot = static_cast<int>(by_subject[k].size());
      by_subject[k].emplace_back();
      subjects_of[k].push_back(e.subject_id);
    }
    by_subject[k][static_cast<std::size_t>(slot)].push_back(static_cast<std::uint32_t>(n));
  }

  PairList out;
  out.num_folds = folds.num_folds;
  out.scheme = set.scheme;
  auto push = [&](std::uint32_t a, std::uint32_t b, PairLabel label, int k, int fold) {
    out.pairs.push_back({std::min(a, b), std::max(a, b), label, k});
    out.fold_of_pair.push_back(fold);
  };

  for (int k = 0; k < k_count; ++k) {
    const auto& groups = by_subject[static_cast<std::size_t>(k)];
    const auto& subjects = subjects_of[static_cast<std::size_t>(k)];
    if (groups.size() < 2) {
      throw InputError("subgroup " + to_string(set.scheme.decode(k)) +
                       " has a single subject; no imposter pairs are possible");
    }

    std::size_t genuine = 0;
    for (std::size_t s = 0; s < groups.size(); ++s) {
      const auto& g = groups[s];
      const int fold = folds.fold_of_subject[static_cast<std::size_t>(subjects[s])];
      for (std::size_t a = 0; a < g.size(); ++a) {
        for (std::size_t b = a + 1; b < g.size(); ++b) {
          push(g[a], g[b], PairLabel::genuine, k, fold);
          ++genuine;
        }
      }
    }

    struct Candidate {
      std::uint32_t a, b;
      int fold;
    };
    std::vector<Candidate> candidates;
    for (std::size_t s = 0; s < groups.size(); ++s) {
      const int fs = folds.fold_of_subject[static_cast<std::size_t>(subjects[s])];
      for (std::size_t t = s + 1; t < groups.size(); ++t) {
        if (folds.fold_of_subject[static_cast<std::size_t>(subjects[t])] != fs) continue;
        for (auto a : groups[s]) {
          for (auto b : groups[t]) candidates.push_back({a, b, fs});
        }
      }
    }
    if (candidates.empty()) {
      throw InputError("subgroup " + to_string(set.scheme.decode(k)) +
                       " has no two subjects sharing a fold; no imposter pairs are possible");
    }

    std::size_t take = candidates.size();
    if (policy.imposter_ratio > 0.0) {
      const auto target =
          static_cast<std::size_t>(std::llround(policy.imposter_ratio * static_cast<double>(genuine)));
      take = std::min(target, candidates.size());
      Rng rng(derive_seed(policy.seed, static_cast<std::uint64_t>(k)));
      // Partial Fisher-Yates: the first `take` slots are a uniform sample.
      for (std::size_t n = 0; n < take; ++n) {
        const auto r = n + static_cast<std::size_t>(rng.below(candidates.size() - n));
        std::swap(candidates[n], candidates[r]);
      }
      candidates.resize(take);
      std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
        return std::pair(x.a, x.b) < std::pair(y.a, y.b);
      });
    }
    for (const auto& c : candidates) push(c.a, c.b, PairLabel::imposter, k, c.fold);
  }
  return out;
}

namespace {

PairList filtered(const PairList& list, auto keep) {
  PairList out;
  out.num_folds = list.num_folds;
  out.scheme = list.scheme;
  for (std::size_t n = 0; n < list.size(); ++n) {
    if (!keep(n)) continue;
    out.pairs.push_back(list.pairs[n]);
    out.fold_of_pair.push_back(list.fold_of_pair[n]);
  }
  return out;
}

}  // namespace

PairList pairs_for_fold(const PairList& list, int fold, Split split) {
  if (fold < 0 || fold >= list.num_folds) {
    throw InputError("fold " + std::to_string(fold) + " outside [0, " +
                     std::to_string(list.num_folds) + ")");
  }
  return filtered(list, [&](std::size_t n) {
    return (list.fold_of_pair[n] == fold) == (split == Split::test);
  });
}

PairList pairs_for_subgroup(const PairList& list, int subgroup) {
  return filtered(list, [&](std::size_t n) { return list.pairs[n].subgroup == subgroup; });
}

std::size_t count_label(const PairList& list, PairLabel label) {
  return static_cast<std::size_t>(std::count_if(list.pairs.begin(), list.pairs.end(),
                                                [&](const Pair& p) { return p.label == label; }));
}

void save_pairs(const EmbeddingSet& set, const PairList& list, const std::filesystem::path& path) {
  std::string out = "sample_id_i,sample_id_j,label,subgroup,fold\n";
  for (std::size_t n = 0; n < list.size(); ++n) {
    const auto& p = list.pairs[n];
    out += set.embeddings[p.i].sample_id;
    out += ',';
    out += set.embeddings[p.j].sample_id;
    out += p.label == PairLabel::genuine ? ",genuine," : ",imposter,";
    out += to_string(list.scheme.decode(p.subgroup));
    out += ',';
    out += std::to_string(list.fold_of_pair[n]);
    out += '\n';
  }
  detail::write_file(path, out);
}

PairList load_pairs(const EmbeddingSet& set, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  const auto text = detail::read_file(path);
  const auto rows = detail::lines(text);
  const std::string ctx = path.string();
  if (rows.empty() || rows[0] != "sample_id_i,sample_id_j,label,subgroup,fold") {
    throw InputError(ctx + ": malformed header (expected 'sample_id_i,sample_id_j,label,subgroup,fold')");
  }
  std::unordered_map<std::string_view, std::uint32_t> index;
  for (std::size_t n = 0; n < set.size(); ++n) {
    index.emplace(set.embeddings[n].sample_id, static_cast<std::uint32_t>(n));
  }

  PairList out;
  out.scheme = set.scheme;
  int max_fold = -1;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    const std::string where = ctx + " line " + std::to_string(r + 1);
    const auto f = detail::split(rows[r], ',');
    if (f.size() != 5) throw InputError(where + ": expected 5 fields");
    const auto a = index.find(f[0]);
    const auto b = index.find(f[1]);
    if (a == index.end() || b == index.end()) {
      throw InputError(where + ": unknown sample id");
    }
    Pair p;
    p.i = std::min(a->second, b->second);
    p.j = std::max(a->second, b->second);
    if (f[2] == "genuine") {
      p.label = PairLabel::genuine;
    } else if (f[2] == "imposter") {
      p.label = PairLabel::imposter;
    } else {
      throw InputError(where + ": label must be genuine or imposter");
    }
    p.subgroup = set.scheme.encode(parse_subgroup(f[3]));
    if (p.i == p.j) throw InputError(where + ": a sample cannot pair with itself");
    const auto& ei = set.embeddings[p.i];
    const auto& ej = set.embeddings[p.j];
    if ((ei.subject_id == ej.subject_id) != (p.label == PairLabel::genuine)) {
      throw InputError(where + ": label disagrees with subject ids");
    }
    if (set.subgroup_index(p.i) != p.subgroup || set.subgroup_index(p.j) != p.subgroup) {
      throw InputError(where + ": pair subgroup disagrees with sample labels");
    }
    int fold = 0;
    if (!detail::parse_number(f[4], fold) || fold < 0) throw InputError(where + ": bad fold");
    max_fold = std::max(max_fold, fold);
    out.pairs.push_back(p);
    out.fold_of_pair.push_back(fold);
  }
  out.num_folds = max_fold + 1;
  return out;
}

}  // namespace fairvec
