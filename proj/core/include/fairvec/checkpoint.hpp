#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairvec/nn.hpp"

namespace fairvec {

/// Binary layout, little-endian throughout:
///   "FVNN", u32 version (1), u32 network count
///   per network: u32 layer count
///   per layer:   u8 kind, u32 in, u32 out, f64 scalar, then for dense layers
///                in*out weights (row-major) and out biases as f64
/// Non-dense layers store in = out = 0. Several networks (a trunk and its
/// heads) share one file.
std::string encode_checkpoint(const std::vector<const nn::Sequential*>& nets);
std::vector<nn::Sequential> decode_checkpoint(std::string_view bytes, const std::string& context);

void save_checkpoint(const std::vector<const nn::Sequential*>& nets,
                     const std::filesystem::path& path, const nlohmann::json& sidecar);
std::vector<nn::Sequential> load_checkpoint(const std::filesystem::path& path);

// Architecture summary of a network for sidecars.
nlohmann::json describe(const nn::Sequential& net);

// The sidecar path for a checkpoint: `<path>.json`.
std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace fairvec
