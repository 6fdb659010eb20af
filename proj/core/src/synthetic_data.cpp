#include "fairvec/synthetic_data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "fairvec/error.hpp"
#include "fairvec/matcher_metrics.hpp"
#include "fairvec/pairing.hpp"
#include "fairvec/rng.hpp"
#include "io_util.hpp"

namespace fairvec {
namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize_in_place(Vec& v) {
  const double n = std::sqrt(dot(v, v));
  for (auto& x : v) x /= n;
}

// Gaussian draws orthogonalized in a fixed sweep (modified Gram-Schmidt),
// also against every vector of `against`.
std::vector<Vec> orthonormal_basis(Rng& rng, std::size_t dim, std::size_t count,
                                   const std::vector<Vec>& against = {}) {
  std::vector<Vec> basis;
  while (basis.size() < count) {
    Vec v(dim);
    for (auto& x : v) x = rng.normal();
    auto remove = [&](const std::vector<Vec>& qs) {
      for (const auto& q : qs) {
        const double p = dot(v, q);
        for (std::size_t i = 0; i < dim; ++i) v[i] -= p * q[i];
      }
    };
    remove(against);
    remove(basis);
    if (std::sqrt(dot(v, v)) < 1e-8) continue;
    normalize_in_place(v);
    basis.push_back(std::move(v));
  }
  return basis;
}

SubgroupScheme scheme_of(const SyntheticConfig& config) {
  std::vector<SubgroupLabel> labels;
  for (const auto& p : config.profiles) labels.push_back(p.subgroup);
  return SubgroupScheme::from_labels(labels);
}

}  // namespace

void validate(const SyntheticConfig& config) {
  if (config.profiles.empty()) throw InputError("synthetic config has no profiles");
  if (config.subjects_per_subgroup < 1 || config.samples_per_subject < 1) {
    throw InputError("subjects_per_subgroup and samples_per_subject must be at least 1");
  }
  std::set<SubgroupLabel> seen;
  for (const auto& p : config.profiles) {
    if (!seen.insert(p.subgroup).second) {
      throw InputError("two profiles for subgroup " + to_string(p.subgroup));
    }
    if (!(p.center_spread >= 0.0) || !(p.within_subject_noise >= 0.0) ||
        !(p.subgroup_axis_concentration >= 0.0)) {
      throw InputError("profile " + to_string(p.subgroup) + " has a negative or non-finite knob");
    }
  }
  const auto scheme = scheme_of(config);
  if (static_cast<std::size_t>(scheme.size()) != config.profiles.size()) {
    throw InputError("profiles must cover every ethnicity x gender combination they declare (" +
                     std::to_string(scheme.size()) + " expected, " +
                     std::to_string(config.profiles.size()) + " given)");
  }
  const auto k = config.profiles.size();
  if (config.dim < k) {
    throw InputError("dim " + std::to_string(config.dim) + " cannot hold " + std::to_string(k) +
                     " orthogonal subgroup axes");
  }
  if (config.dim < k + config.identity_dim) {
    throw InputError("dim " + std::to_string(config.dim) + " cannot hold " + std::to_string(k) +
                     " subgroup axes plus an identity subspace of " +
                     std::to_string(config.identity_dim));
  }
}

EmbeddingSet generate(const SyntheticConfig& config) {
  validate(config);
  const auto scheme = scheme_of(config);
  const auto d = config.dim;
  const auto r = config.identity_dim;
  const auto k_count = config.profiles.size();

  Rng rng(config.seed);
  const auto axes = orthonormal_basis(rng, d, k_count);
  // identity[k] spans subgroup k's identity directions.
  std::vector<std::vector<Vec>> identity;
  if (config.shared_identity_basis) {
    identity.assign(k_count, orthonormal_basis(rng, d, r, axes));
  } else {
    for (std::size_t k = 0; k < k_count; ++k) identity.push_back(orthonormal_basis(rng, d, r, axes));
  }

  // Profiles in scheme order so subject ids follow subgroup order.
  auto profiles = config.profiles;
  std::sort(profiles.begin(), profiles.end(), [&](const auto& a, const auto& b) {
    return scheme.encode(a.subgroup) < scheme.encode(b.subgroup);
  });

  std::vector<Embedding> records;
  records.reserve(k_count * static_cast<std::size_t>(config.subjects_per_subgroup) *
                  static_cast<std::size_t>(config.samples_per_subject));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double inv_sqrt_r = r > 0 ? 1.0 / std::sqrt(static_cast<double>(r)) : 0.0;
  int subject = 0;
  for (const auto& prof : profiles) {
    const auto k = static_cast<std::size_t>(scheme.encode(prof.subgroup));
    const auto& axis = axes[k];
    for (int s = 0; s < config.subjects_per_subgroup; ++s, ++subject) {
      Vec c(d);
      for (std::size_t i = 0; i < d; ++i) c[i] = prof.subgroup_axis_concentration * axis[i];
      if (r > 0) {
        for (std::size_t m = 0; m < r; ++m) {
          const double z = rng.normal() * prof.center_spread * inv_sqrt_r;
          const auto& b = identity[k][m];
          for (std::size_t i = 0; i < d; ++i) c[i] += z * b[i];
        }
      } else {
        for (std::size_t i = 0; i < d; ++i) c[i] += rng.normal() * prof.center_spread * inv_sqrt_d;
      }
      if (std::sqrt(dot(c, c)) < 1e-12) throw NumericError("degenerate subject centroid");
      normalize_in_place(c);

      for (int n = 0; n < config.samples_per_subject; ++n) {
        Vec x = c;
        if (prof.within_subject_noise > 0.0) {
          for (std::size_t i = 0; i < d; ++i) x[i] += rng.normal() * prof.within_subject_noise * inv_sqrt_d;
        }
        normalize_in_place(x);
        Embedding e;
        e.sample_id = to_string(prof.subgroup) + "_" + std::to_string(subject) + "_" + std::to_string(n);
        e.source_subject = std::to_string(subject);
        e.subgroup = prof.subgroup;
        e.vector.assign(x.begin(), x.end());
        records.push_back(std::move(e));
      }
    }
  }
  return make_embedding_set(std::move(records), d, Provenance::synthetic, scheme);
}

BiasCheck check_bias(const SyntheticConfig& config, const EmbeddingSet& set) {
  FoldAssignment one_fold{1, std::vector<int>(static_cast<std::size_t>(set.num_identities), 0)};
  const auto pairs = build_pairs(set, one_fold, PairPolicy{2.84, config.seed});
  const auto scored = score_pairs(set, pairs);

  BiasCheck out;
  out.global_threshold = calibrate_global(scored);
  const int k_count = set.scheme.size();
  std::vector<double> noise(static_cast<std::size_t>(k_count), 0.0);
  for (const auto& p : config.profiles) {
    noise[static_cast<std::size_t>(set.scheme.encode(p.subgroup))] = p.within_subject_noise;
  }
  for (int k = 0; k < k_count; ++k) {
    const auto sub = restrict_to_subgroup(scored, pairs, k);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n < sub.size(); ++n) {
      if (!sub.labels[n]) continue;
      sum += sub.scores[n];
      ++count;
    }
    out.genuine_mean.push_back(count ? sum / static_cast<double>(count) : 0.0);
    out.accuracy_at_t_g.push_back(rates(confusion(sub, out.global_threshold)).accuracy);
  }

  std::vector<int> by_noise(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) by_noise[static_cast<std::size_t>(k)] = k;
  std::stable_sort(by_noise.begin(), by_noise.end(), [&](int a, int b) {
    return noise[static_cast<std::size_t>(a)] < noise[static_cast<std::size_t>(b)];
  });
  bool monotone = true;
  for (std::size_t n = 1; n < by_noise.size(); ++n) {
    const auto a = static_cast<std::size_t>(by_noise[n - 1]);
    const auto b = static_cast<std::size_t>(by_noise[n]);
    if (noise[a] < noise[b] && !(out.genuine_mean[b] < out.genuine_mean[a])) monotone = false;
  }
  const auto [lo, hi] = std::minmax_element(out.accuracy_at_t_g.begin(), out.accuracy_at_t_g.end());
  const auto noisiest = static_cast<std::size_t>(by_noise.back());
  const bool noisiest_lowest = out.accuracy_at_t_g[noisiest] == *lo;
  out.passed = monotone && (*hi - *lo >= 0.04) && noisiest_lowest;
  return out;
}

SyntheticConfig default_biased_config(std::uint64_t seed) {
  SyntheticConfig config;
  config.dim = 64;
  config.subjects_per_subgroup = 20;
  config.samples_per_subject = 10;
  config.identity_dim = 16;
  const SubgroupScheme scheme;
  for (int k = 0; k < scheme.size(); ++k) {
    SubgroupProfile p;
    p.subgroup = scheme.decode(k);
    p.center_spread = 1.5;
    p.within_subject_noise = 0.6 + 0.6 * static_cast<double>(k) / static_cast<double>(scheme.size() - 1);
    p.subgroup_axis_concentration = 1.0;
    config.profiles.push_back(p);
  }
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    config.seed = seed + attempt;
    if (check_bias(config, generate(config)).passed) return config;
  }
  throw NumericError("no seed in [" + std::to_string(seed) + ", " + std::to_string(seed + 63) +
                     "] produced a biased set");
}

nlohmann::json to_json(const SyntheticConfig& config) {
  nlohmann::json profiles = nlohmann::json::array();
  for (const auto& p : config.profiles) {
    profiles.push_back({{"subgroup", to_string(p.subgroup)},
                        {"center_spread", p.center_spread},
                        {"within_subject_noise", p.within_subject_noise},
                        {"subgroup_axis_concentration", p.subgroup_axis_concentration}});
  }
  return {{"dim", config.dim},
          {"subjects_per_subgroup", config.subjects_per_subgroup},
          {"samples_per_subject", config.samples_per_subject},
          {"identity_dim", config.identity_dim},
          {"shared_identity_basis", config.shared_identity_basis},
          {"seed", config.seed},
          {"profiles", profiles}};
}

SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
  try {
    SyntheticConfig c;
    c.dim = j.at("dim").get<std::size_t>();
    c.subjects_per_subgroup = j.at("subjects_per_subgroup").get<int>();
    c.samples_per_subject = j.at("samples_per_subject").get<int>();
    c.identity_dim = j.value("identity_dim", std::size_t{0});
    c.shared_identity_basis = j.value("shared_identity_basis", true);
    c.seed = j.value("seed", std::uint64_t{0});
    for (const auto& p : j.at("profiles")) {
      SubgroupProfile prof;
      prof.subgroup = parse_subgroup(p.at("subgroup").get<std::string>());
      prof.center_spread = p.at("center_spread").get<double>();
      prof.within_subject_noise = p.at("within_subject_noise").get<double>();
      prof.subgroup_axis_concentration = p.at("subgroup_axis_concentration").get<double>();
      c.profiles.push_back(prof);
    }
    validate(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad synthetic config: ") + e.what());
  }
}

SyntheticConfig load_synthetic_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  try {
    return synthetic_config_from_json(nlohmann::json::parse(detail::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void save_synthetic_config(const SyntheticConfig& config, const std::filesystem::path& path) {
  detail::write_file(path, to_json(config).dump(2) + "\n");
}

}  // namespace fairvec
