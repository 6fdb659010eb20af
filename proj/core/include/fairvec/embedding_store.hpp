#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fairvec {

enum class Gender : std::uint8_t { F = 0, M = 1 };
enum class Ethnicity : std::uint8_t { A = 0, B = 1, I = 2, W = 3 };

inline constexpr int kNumGenders = 2;
inline constexpr int kNumEthnicities = 4;

struct SubgroupLabel {
  Ethnicity ethnicity = Ethnicity::A;
  Gender gender = Gender::F;

  friend bool operator==(const SubgroupLabel&, const SubgroupLabel&) = default;
  friend auto operator<=>(const SubgroupLabel&, const SubgroupLabel&) = default;
};

char to_char(Gender g);
char to_char(Ethnicity e);
Gender parse_gender(std::string_view text);
Ethnicity parse_ethnicity(std::string_view text);

// Two-letter code, ethnicity first: "AF", "WM", ...
std::string to_string(SubgroupLabel label);
SubgroupLabel parse_subgroup(std::string_view code);

/// The declared ethnicity and gender values of a set and the dense subgroup
/// index k = position(ethnicity) * |genders| + position(gender).
///
/// The full scheme (A, B, I, W) x (F, M) gives K = 8 in the order
/// AF, AM, BF, BM, IF, IM, WF, WM. Smaller schemes keep K equal to the product
/// of the two declared enums.
class SubgroupScheme {
 public:
  SubgroupScheme();
  SubgroupScheme(std::vector<Ethnicity> ethnicities, std::vector<Gender> genders);

  // Sorted distinct values observed in `labels`.
  static SubgroupScheme from_labels(std::span<const SubgroupLabel> labels);

  int size() const { return static_cast<int>(ethnicities_.size() * genders_.size()); }
  bool contains(SubgroupLabel label) const;
  int encode(SubgroupLabel label) const;
  SubgroupLabel decode(int index) const;

  const std::vector<Ethnicity>& ethnicities() const { return ethnicities_; }
  const std::vector<Gender>& genders() const { return genders_; }

  friend bool operator==(const SubgroupScheme&, const SubgroupScheme&) = default;

 private:
  std::vector<Ethnicity> ethnicities_;
  std::vector<Gender> genders_;
};

struct Embedding {
  std::string sample_id;
  int subject_id = 0;          // dense index in [0, num_identities)
  std::string source_subject;  // identifier as it appeared in the source file
  SubgroupLabel subgroup;
  std::vector<float> vector;
};

enum class Provenance { loaded, synthetic, debiased };

std::string to_string(Provenance p);

struct EmbeddingSet {
  std::vector<Embedding> embeddings;
  std::size_t dim = 0;
  int num_identities = 0;
  SubgroupScheme scheme;
  Provenance provenance = Provenance::loaded;

  std::size_t size() const { return embeddings.size(); }
  int subgroup_index(std::size_t sample) const {
    return scheme.encode(embeddings[sample].subgroup);
  }
  // Subgroup index of every dense subject.
  std::vector<int> subject_subgroups() const;
};

/// Builds a validated set from raw records: checks dimensions, unique sample
/// ids, and that no subject spans two subgroups; re-indexes subjects densely
/// in ascending order of their source id. The scheme is inferred from the
/// labels unless one is given.
EmbeddingSet make_embedding_set(std::vector<Embedding> records, std::size_t dim,
                                Provenance provenance);
EmbeddingSet make_embedding_set(std::vector<Embedding> records, std::size_t dim,
                                Provenance provenance, SubgroupScheme scheme);

enum class EmbeddingFormat { csv, binary };

EmbeddingFormat parse_format(std::string_view name);
// ".csv" selects csv; anything else is binary.
EmbeddingFormat format_for_path(const std::filesystem::path& path);

EmbeddingSet load_embeddings(const std::filesystem::path& path, EmbeddingFormat format);
void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path,
                     EmbeddingFormat format);

EmbeddingSet l2_normalize(const EmbeddingSet& set);

// The listed samples in the given order, subjects re-indexed densely, scheme kept.
EmbeddingSet subset(const EmbeddingSet& set, std::span<const std::size_t> samples);

struct FoldAssignment {
  int num_folds = 0;
  std::vector<int> fold_of_subject;  // indexed by dense subject id

  int fold_of_sample(const EmbeddingSet& set, std::size_t sample) const {
    return fold_of_subject[static_cast<std::size_t>(set.embeddings[sample].subject_id)];
  }
  friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

/// Subject-disjoint stratified folds. Subjects of each subgroup are shuffled
/// with a seeded stream and dealt round-robin, continuing the deal across
/// subgroups, so per-subgroup fold counts differ by at most one and so do the
/// fold totals.
FoldAssignment assign_folds(const EmbeddingSet& set, int num_folds, std::uint64_t seed);

// Throws InputError unless every subject has a fold in range and every fold
// holds at least one subject of every subgroup.
void validate_folds(const EmbeddingSet& set, const FoldAssignment& folds);

// CSV `subject_id,fold` keyed by source subject id.
void save_folds(const EmbeddingSet& set, const FoldAssignment& folds,
                const std::filesystem::path& path);
FoldAssignment load_folds(const EmbeddingSet& set, const std::filesystem::path& path);

}  // namespace fairvec
