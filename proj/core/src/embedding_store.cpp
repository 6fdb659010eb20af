#include "fairvec/embedding_store.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "fairvec/error.hpp"
#include "fairvec/rng.hpp"
#include "io_util.hpp"

namespace fairvec {

char to_char(Gender g) { return g == Gender::F ? 'F' : 'M'; }

char to_char(Ethnicity e) {
  switch (e) {
    case Ethnicity::A: return 'A';
    case Ethnicity::B: return 'B';
    case Ethnicity::I: return 'I';
    case Ethnicity::W: return 'W';
  }
  return '?';
}

Gender parse_gender(std::string_view text) {
  if (text == "F") return Gender::F;
  if (text == "M") return Gender::M;
  throw InputError("unknown gender '" + std::string(text) + "' (expected F or M)");
}

Ethnicity parse_ethnicity(std::string_view text) {
  if (text == "A") return Ethnicity::A;
  if (text == "B") return Ethnicity::B;
  if (text == "I") return Ethnicity::I;
  if (text == "W") return Ethnicity::W;
  throw InputError("unknown ethnicity '" + std::string(text) + "' (expected A, B, I or W)");
}

std::string to_string(SubgroupLabel label) {
  return {to_char(label.ethnicity), to_char(label.gender)};
}

SubgroupLabel parse_subgroup(std::string_view code) {
  if (code.size() != 2) throw InputError("malformed subgroup code '" + std::string(code) + "'");
  return {parse_ethnicity(code.substr(0, 1)), parse_gender(code.substr(1, 1))};
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::loaded: return "loaded";
    case Provenance::synthetic: return "synthetic";
    case Provenance::debiased: return "debiased";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// SubgroupScheme

SubgroupScheme::SubgroupScheme()
    : ethnicities_{Ethnicity::A, Ethnicity::B, Ethnicity::I, Ethnicity::W},
      genders_{Gender::F, Gender::M} {}

SubgroupScheme::SubgroupScheme(std::vector<Ethnicity> ethnicities, std::vector<Gender> genders)
    : ethnicities_(std::move(ethnicities)), genders_(std::move(genders)) {
  std::sort(ethnicities_.begin(), ethnicities_.end());
  std::sort(genders_.begin(), genders_.end());
  if (std::adjacent_find(ethnicities_.begin(), ethnicities_.end()) != ethnicities_.end() ||
      std::adjacent_find(genders_.begin(), genders_.end()) != genders_.end()) {
    throw InputError("subgroup scheme declares a value twice");
  }
  if (ethnicities_.empty() || genders_.empty()) {
    throw InputError("subgroup scheme needs at least one ethnicity and one gender");
  }
}

SubgroupScheme SubgroupScheme::from_labels(std::span<const SubgroupLabel> labels) {
  std::vector<Ethnicity> eth;
  std::vector<Gender> gen;
  for (const auto& l : labels) {
    if (std::find(eth.begin(), eth.end(), l.ethnicity) == eth.end()) eth.push_back(l.ethnicity);
    if (std::find(gen.begin(), gen.end(), l.gender) == gen.end()) gen.push_back(l.gender);
  }
  if (eth.empty()) return SubgroupScheme();
  return SubgroupScheme(std::move(eth), std::move(gen));
}

bool SubgroupScheme::contains(SubgroupLabel label) const {
  return std::find(ethnicities_.begin(), ethnicities_.end(), label.ethnicity) !=
             ethnicities_.end() &&
         std::find(genders_.begin(), genders_.end(), label.gender) != genders_.end();
}

int SubgroupScheme::encode(SubgroupLabel label) const {
  const auto e = std::find(ethnicities_.begin(), ethnicities_.end(), label.ethnicity);
  const auto g = std::find(genders_.begin(), genders_.end(), label.gender);
  if (e == ethnicities_.end() || g == genders_.end()) {
    throw InputError("subgroup " + to_string(label) + " is not part of the scheme");
  }
  return static_cast<int>(e - ethnicities_.begin()) * static_cast<int>(genders_.size()) +
         static_cast<int>(g - genders_.begin());
}

SubgroupLabel SubgroupScheme::decode(int index) const {
  if (index < 0 || index >= size()) {
    throw InputError("subgroup index " + std::to_string(index) + " out of range");
  }
  const auto g = static_cast<std::size_t>(index) % genders_.size();
  const auto e = static_cast<std::size_t>(index) / genders_.size();
  return {ethnicities_[e], genders_[g]};
}

// ---------------------------------------------------------------------------
// EmbeddingSet construction

std::vector<int> EmbeddingSet::subject_subgroups() const {
  std::vector<int> out(static_cast<std::size_t>(num_identities), -1);
  for (const auto& e : embeddings) {
    out[static_cast<std::size_t>(e.subject_id)] = scheme.encode(e.subgroup);
  }
  return out;
}

namespace {

std::uint32_t parse_subject(std::string_view text, std::string_view context) {
  std::uint32_t v = 0;
  if (!detail::parse_number(text, v)) {
    throw InputError(std::string(context) + ": subject_id '" + std::string(text) +
                     "' is not an unsigned integer");
  }
  return v;
}

}  // namespace

EmbeddingSet make_embedding_set(std::vector<Embedding> records, std::size_t dim,
                                Provenance provenance) {
  std::vector<SubgroupLabel> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.subgroup);
  auto scheme = SubgroupScheme::from_labels(labels);
  return make_embedding_set(std::move(records), dim, provenance, std::move(scheme));
}

EmbeddingSet make_embedding_set(std::vector<Embedding> records, std::size_t dim,
                                Provenance provenance, SubgroupScheme scheme) {
  std::unordered_set<std::string> seen_ids;
  std::map<std::uint32_t, SubgroupLabel> subject_label;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.vector.size() != dim) {
      throw InputError("dimension mismatch: record " + std::to_string(i) + " ('" + r.sample_id +
                       "') has " + std::to_string(r.vector.size()) + " values, expected " +
                       std::to_string(dim));
    }
    if (r.sample_id.empty()) throw InputError("record " + std::to_string(i) + " has an empty sample_id");
    if (!seen_ids.insert(r.sample_id).second) {
      throw InputError("duplicate sample_id '" + r.sample_id + "'");
    }
    if (!scheme.contains(r.subgroup)) {
      throw InputError("sample '" + r.sample_id + "' has subgroup " + to_string(r.subgroup) +
                       " outside the declared scheme");
    }
    const auto source = parse_subject(r.source_subject, r.sample_id);
    auto [it, inserted] = subject_label.emplace(source, r.subgroup);
    if (!inserted && it->second != r.subgroup) {
      throw InputError("subject " + r.source_subject + " spans subgroups " +
                       to_string(it->second) + " and " + to_string(r.subgroup));
    }
  }

  std::unordered_map<std::uint32_t, int> dense;
  int next = 0;
  for (const auto& [source, label] : subject_label) dense[source] = next++;

  EmbeddingSet set;
  set.dim = dim;
  set.num_identities = next;
  set.scheme = std::move(scheme);
  set.provenance = provenance;
  set.embeddings = std::move(records);
  for (auto& e : set.embeddings) {
    e.subject_id = dense.at(parse_subject(e.source_subject, e.sample_id));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Formats

EmbeddingFormat parse_format(std::string_view name) {
  if (name == "csv") return EmbeddingFormat::csv;
  if (name == "binary" || name == "bin") return EmbeddingFormat::binary;
  throw InputError("unknown embedding format '" + std::string(name) + "'");
}

EmbeddingFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? EmbeddingFormat::csv : EmbeddingFormat::binary;
}

namespace {

constexpr std::string_view kMagic = "FVE1";

EmbeddingSet load_csv(const std::filesystem::path& path) {
  const auto text = detail::read_file(path);
  const auto rows = detail::lines(text);
  const std::string ctx = path.string();
  if (rows.empty()) throw InputError(ctx + ": malformed header (file is empty)");

  const auto header = detail::split(rows[0], ',');
  static constexpr std::string_view kFixed[] = {"sample_id", "subject_id", "gender", "ethnicity"};
  if (header.size() < 5) throw InputError(ctx + ": malformed header (need at least one feature column)");
  for (std::size_t i = 0; i < 4; ++i) {
    if (header[i] != kFixed[i]) {
      throw InputError(ctx + ": malformed header (column " + std::to_string(i) + " is '" +
                       std::string(header[i]) + "', expected '" + std::string(kFixed[i]) + "')");
    }
  }
  const std::size_t dim = header.size() - 4;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[4 + j] != "f" + std::to_string(j)) {
      throw InputError(ctx + ": malformed header (feature column " + std::to_string(j) +
                       " is '" + std::string(header[4 + j]) + "')");
    }
  }

  std::vector<Embedding> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    const auto fields = detail::split(rows[r], ',');
    const std::string where = ctx + " line " + std::to_string(r + 1);
    if (fields.size() != header.size()) {
      throw InputError("dimension mismatch at " + where + ": " +
                       std::to_string(fields.size() < 4 ? 0 : fields.size() - 4) +
                       " feature values, expected " + std::to_string(dim));
    }
    Embedding e;
    e.sample_id = std::string(fields[0]);
    e.source_subject = std::string(fields[1]);
    e.subgroup = {parse_ethnicity(fields[3]), parse_gender(fields[2])};
    e.vector.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      if (!detail::parse_number(fields[4 + j], e.vector[j]) || !std::isfinite(e.vector[j])) {
        throw InputError(where + ": bad value '" + std::string(fields[4 + j]) + "' in f" +
                         std::to_string(j));
      }
    }
    records.push_back(std::move(e));
  }
  return make_embedding_set(std::move(records), dim, Provenance::loaded);
}

EmbeddingSet load_binary(const std::filesystem::path& path) {
  const auto data = detail::read_file(path);
  detail::ByteReader in(data, path.string());
  if (in.remaining() < 4 || in.bytes(4) != kMagic) {
    throw InputError(path.string() + ": malformed header (bad magic)");
  }
  const std::size_t dim = in.u32();
  const std::uint32_t count = in.u32();
  if (dim == 0) throw InputError(path.string() + ": malformed header (dimension 0)");

  std::vector<Embedding> records;
  records.reserve(std::min<std::size_t>(count, in.remaining() / (10 + 4 * dim)));
  for (std::uint32_t i = 0; i < count; ++i) {
    Embedding e;
    const auto len = in.u32();
    e.sample_id = std::string(in.bytes(len));
    e.source_subject = std::to_string(in.u32());
    const auto g = in.u8();
    const auto eth = in.u8();
    if (g >= kNumGenders || eth >= kNumEthnicities) {
      throw InputError(path.string() + ": record " + std::to_string(i) + " has bad label codes");
    }
    e.subgroup = {static_cast<Ethnicity>(eth), static_cast<Gender>(g)};
    e.vector.resize(dim);
    for (auto& v : e.vector) v = in.f32();
    records.push_back(std::move(e));
  }
  if (in.remaining() != 0) {
    throw InputError(path.string() + ": " + std::to_string(in.remaining()) +
                     " trailing bytes after the last record");
  }
  return make_embedding_set(std::move(records), dim, Provenance::loaded);
}

void save_csv(const EmbeddingSet& set, const std::filesystem::path& path) {
  std::string out = "sample_id,subject_id,gender,ethnicity";
  for (std::size_t j = 0; j < set.dim; ++j) out += ",f" + std::to_string(j);
  out += '\n';
  for (const auto& e : set.embeddings) {
    if (e.sample_id.find_first_of(",\r\n") != std::string::npos) {
      throw InputError("sample_id '" + e.sample_id + "' cannot be written to CSV");
    }
    out += e.sample_id;
    out += ',';
    out += e.source_subject;
    out += ',';
    out += to_char(e.subgroup.gender);
    out += ',';
    out += to_char(e.subgroup.ethnicity);
    for (float v : e.vector) {
      out += ',';
      out += detail::format_float(v, 9);
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

void save_binary(const EmbeddingSet& set, const std::filesystem::path& path) {
  std::string out(kMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(set.dim));
  detail::put_u32(out, static_cast<std::uint32_t>(set.size()));
  for (const auto& e : set.embeddings) {
    detail::put_u32(out, static_cast<std::uint32_t>(e.sample_id.size()));
    out += e.sample_id;
    std::uint32_t subject = 0;
    if (!detail::parse_number(std::string_view(e.source_subject), subject)) {
      throw InputError("subject id '" + e.source_subject + "' does not fit the binary format");
    }
    detail::put_u32(out, subject);
    out.push_back(static_cast<char>(e.subgroup.gender));
    out.push_back(static_cast<char>(e.subgroup.ethnicity));
    for (float v : e.vector) detail::put_f32(out, v);
  }
  detail::write_file(path, out);
}

}  // namespace

EmbeddingSet load_embeddings(const std::filesystem::path& path, EmbeddingFormat format) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  return format == EmbeddingFormat::csv ? load_csv(path) : load_binary(path);
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path,
                     EmbeddingFormat format) {
  if (format == EmbeddingFormat::csv) {
    save_csv(set, path);
  } else {
    save_binary(set, path);
  }
}

EmbeddingSet l2_normalize(const EmbeddingSet& set) {
  EmbeddingSet out = set;
  for (auto& e : out.embeddings) {
    double sq = 0.0;
    for (float v : e.vector) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    if (!(norm > 1e-12)) {
      throw NumericError("cannot normalize sample '" + e.sample_id + "': zero-norm vector");
    }
    for (auto& v : e.vector) v = static_cast<float>(v / norm);
  }
  return out;
}

EmbeddingSet subset(const EmbeddingSet& set, std::span<const std::size_t> samples) {
  std::vector<Embedding> records;
  records.reserve(samples.size());
  for (auto n : samples) records.push_back(set.embeddings.at(n));
  return make_embedding_set(std::move(records), set.dim, set.provenance, set.scheme);
}

// ---------------------------------------------------------------------------
// Folds

FoldAssignment assign_folds(const EmbeddingSet& set, int num_folds, std::uint64_t seed) {
  if (num_folds < 1) throw InputError("num_folds must be at least 1");
  const auto subgroup_of = set.subject_subgroups();
  const int k_count = set.scheme.size();

  std::vector<std::vector<int>> by_subgroup(static_cast<std::size_t>(k_count));
  for (int s = 0; s < set.num_identities; ++s) {
    by_subgroup[static_cast<std::size_t>(subgroup_of[static_cast<std::size_t>(s)])].push_back(s);
  }
  for (int k = 0; k < k_count; ++k) {
    const auto n = by_subgroup[static_cast<std::size_t>(k)].size();
    if (n < static_cast<std::size_t>(num_folds)) {
      throw InputError("subgroup " + to_string(set.scheme.decode(k)) + " has " +
                       std::to_string(n) + " subjects; need at least " +
                       std::to_string(num_folds) + " for " + std::to_string(num_folds) +
                       " folds");
    }
  }

  FoldAssignment folds;
  folds.num_folds = num_folds;
  folds.fold_of_subject.assign(static_cast<std::size_t>(set.num_identities), 0);
  std::size_t dealt = 0;
  for (int k = 0; k < k_count; ++k) {
    auto& subjects = by_subgroup[static_cast<std::size_t>(k)];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    rng.shuffle(std::span<int>(subjects));
    for (int s : subjects) {
      folds.fold_of_subject[static_cast<std::size_t>(s)] =
          static_cast<int>(dealt++ % static_cast<std::size_t>(num_folds));
    }
  }
  return folds;
}

void validate_folds(const EmbeddingSet& set, const FoldAssignment& folds) {
  if (folds.num_folds < 1) throw InputError("fold assignment declares no folds");
  if (folds.fold_of_subject.size() != static_cast<std::size_t>(set.num_identities)) {
    throw InputError("fold assignment covers " + std::to_string(folds.fold_of_subject.size()) +
                     " subjects, set has " + std::to_string(set.num_identities));
  }
  const auto subgroup_of = set.subject_subgroups();
  const auto k_count = static_cast<std::size_t>(set.scheme.size());
  std::vector<std::vector<int>> counts(static_cast<std::size_t>(folds.num_folds),
                                       std::vector<int>(k_count, 0));
  for (std::size_t s = 0; s < folds.fold_of_subject.size(); ++s) {
    const int f = folds.fold_of_subject[s];
    if (f < 0 || f >= folds.num_folds) {
      throw InputError("subject " + std::to_string(s) + " has fold " + std::to_string(f) +
                       " outside [0, " + std::to_string(folds.num_folds) + ")");
    }
    ++counts[static_cast<std::size_t>(f)][static_cast<std::size_t>(subgroup_of[s])];
  }
  for (int f = 0; f < folds.num_folds; ++f) {
    for (std::size_t k = 0; k < k_count; ++k) {
      if (counts[static_cast<std::size_t>(f)][k] == 0) {
        throw InputError("fold " + std::to_string(f) + " has no subject of subgroup " +
                         to_string(set.scheme.decode(static_cast<int>(k))));
      }
    }
  }
}

void save_folds(const EmbeddingSet& set, const FoldAssignment& folds,
                const std::filesystem::path& path) {
  std::vector<std::string> source(static_cast<std::size_t>(set.num_identities));
  for (const auto& e : set.embeddings) source[static_cast<std::size_t>(e.subject_id)] = e.source_subject;
  std::string out = "subject_id,fold\n";
  for (std::size_t s = 0; s < source.size(); ++s) {
    out += source[s] + "," + std::to_string(folds.fold_of_subject[s]) + "\n";
  }
  detail::write_file(path, out);
}

FoldAssignment load_folds(const EmbeddingSet& set, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  const auto text = detail::read_file(path);
  const auto rows = detail::lines(text);
  if (rows.empty() || rows[0] != "subject_id,fold") {
    throw InputError(path.string() + ": malformed header (expected 'subject_id,fold')");
  }
  std::unordered_map<std::string, int> dense;
  for (const auto& e : set.embeddings) dense.emplace(e.source_subject, e.subject_id);

  FoldAssignment folds;
  folds.fold_of_subject.assign(static_cast<std::size_t>(set.num_identities), -1);
  int max_fold = -1;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    const auto fields = detail::split(rows[r], ',');
    int fold = 0;
    if (fields.size() != 2 || !detail::parse_number(fields[1], fold) || fold < 0) {
      throw InputError(path.string() + " line " + std::to_string(r + 1) + ": malformed row");
    }
    const auto it = dense.find(std::string(fields[0]));
    if (it == dense.end()) {
      throw InputError(path.string() + ": subject " + std::string(fields[0]) +
                       " is not in the embedding set");
    }
    folds.fold_of_subject[static_cast<std::size_t>(it->second)] = fold;
    max_fold = std::max(max_fold, fold);
  }
  for (std::size_t s = 0; s < folds.fold_of_subject.size(); ++s) {
    if (folds.fold_of_subject[s] < 0) {
      throw InputError(path.string() + ": no fold for subject index " + std::to_string(s));
    }
  }
  folds.num_folds = max_fold + 1;
  return folds;
}

}  // namespace fairvec
