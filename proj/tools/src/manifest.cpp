#include "manifest.hpp"

#include <fstream>
#include <iterator>

#include "fairvec/error.hpp"

namespace fairvec::cli {

#ifndef FAIRVEC_VERSION_STRING
#define FAIRVEC_VERSION_STRING "unknown"
#endif

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return out;
}

Manifest::Manifest(std::string command, nlohmann::json config)
    : command_(std::move(command)), config_(std::move(config)), start_(std::chrono::steady_clock::now()) {}

void Manifest::seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }

void Manifest::input(const std::string& role, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  inputs_.push_back({{"role", role}, {"path", path.string()}, {"fnv1a", hex64(fnv1a(bytes))}});
}

void Manifest::output(const std::filesystem::path& path) { outputs_.push_back(path.filename().string()); }

void Manifest::write(const std::filesystem::path& dir) const {
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  nlohmann::json j{{"tool", "fairvec"},
                   {"version", FAIRVEC_VERSION_STRING},
                   {"command", command_},
                   {"config", config_},
                   {"config_hash", hex64(fnv1a(config_.dump()))},
                   {"seeds", seeds_},
                   {"inputs", inputs_},
                   {"outputs", outputs_},
                   {"wall_clock_seconds", seconds}};
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace fairvec::cli
