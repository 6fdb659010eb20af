#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace fairvec::cli {

// 64-bit FNV-1a, printed as 16 hex digits.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// One manifest per output directory. Everything except `wall_clock_seconds`
/// is a pure function of the command's inputs.
class Manifest {
 public:
  Manifest(std::string command, nlohmann::json config);

  void seed(const std::string& name, std::uint64_t value);
  void input(const std::string& role, const std::filesystem::path& path);
  void output(const std::filesystem::path& path);

  // Writes <dir>/manifest.json.
  void write(const std::filesystem::path& dir) const;

 private:
  std::string command_;
  nlohmann::json config_;
  nlohmann::json seeds_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace fairvec::cli
