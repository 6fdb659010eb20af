#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairvec/embedding_store.hpp"

namespace fairvec {

struct SubgroupProfile {
  SubgroupLabel subgroup;
  double center_spread = 1.0;                // scatter of subject centroids
  double within_subject_noise = 0.5;         // scatter of samples around a centroid
  double subgroup_axis_concentration = 1.0;  // weight of the subgroup axis in a centroid

  friend bool operator==(const SubgroupProfile&, const SubgroupProfile&) = default;
};

/// Generative process, per subgroup k with axis a_k:
///   centroid  c = normalize(concentration * a_k + center_spread * u)
///   sample    x = normalize(c + within_subject_noise * g / sqrt(dim))
/// with g standard normal in R^dim. When identity_dim > 0, u = (z B_k) / sqrt(identity_dim)
/// for z ~ N(0, I) and an orthonormal identity basis B_k orthogonal to every
/// subgroup axis. All subgroups share one basis unless `shared_identity_basis`
/// is cleared, in which case each draws its own. When identity_dim = 0, u = g' / sqrt(dim).
struct SyntheticConfig {
  std::size_t dim = 64;
  int subjects_per_subgroup = 20;
  int samples_per_subject = 10;
  std::size_t identity_dim = 16;
  bool shared_identity_basis = true;
  std::vector<SubgroupProfile> profiles;
  std::uint64_t seed = 0;

  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

// Throws InputError unless the config can be generated.
void validate(const SyntheticConfig& config);

EmbeddingSet generate(const SyntheticConfig& config);

/// Eight subgroups in scheme order with noise rising from AF to WM, d = 64,
/// 20 subjects per subgroup, 10 samples per subject. Starting from `seed`,
/// seeds are scanned upward until the generated set passes the bias checks:
/// genuine means strictly falling with noise, Acc@t_g spread >= 0.04, and the
/// noisiest subgroup lowest.
SyntheticConfig default_biased_config(std::uint64_t seed);

struct BiasCheck {
  std::vector<double> genuine_mean;      // per subgroup
  std::vector<double> accuracy_at_t_g;   // per subgroup
  double global_threshold = 0.0;
  bool passed = false;
};

// Runs the checks `default_biased_config` applies to a generated set.
BiasCheck check_bias(const SyntheticConfig& config, const EmbeddingSet& set);

nlohmann::json to_json(const SyntheticConfig& config);
SyntheticConfig synthetic_config_from_json(const nlohmann::json& j);
SyntheticConfig load_synthetic_config(const std::filesystem::path& path);
void save_synthetic_config(const SyntheticConfig& config, const std::filesystem::path& path);

}  // namespace fairvec
