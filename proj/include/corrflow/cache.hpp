#pragma once

// Spectrum cache: diagonalization dominates runtime, so full spectra are
// stored on disk keyed by the content hash of the chain spec. Thermal
// (beta-dependent) objects are never cached.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "corrflow/io.hpp"
#include "corrflow/spectral.hpp"
#include "corrflow/spinchain.hpp"

namespace corrflow {

struct CacheCorruption : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr char kSpectrumMagic[8] = {'C', 'F', 'S', 'P', 'E', 'C', 'v', '1'};
inline constexpr const char* kCacheEnvVar = "CORRFLOW_CACHE_DIR";

inline std::filesystem::path cache_dir() {
  if (const char* env = std::getenv(kCacheEnvVar); env && *env)
    return std::filesystem::path(env);
  return std::filesystem::path(".corrflow_cache");
}

inline std::filesystem::path spectrum_cache_path(const SpinChainSpec& spec) {
  return cache_dir() / (hex64(spec_hash(spec)) + ".spectrum.bin");
}

inline void save_spectrum(const std::filesystem::path& path,
                          const SpinChainSpec& spec, const Spectrum& s) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cache: cannot open " + path.string());
  out.write(kSpectrumMagic, sizeof(kSpectrumMagic));
  std::uint32_t version = 1;
  std::uint32_t length = spec.length;
  std::uint64_t hash = spec_hash(spec);
  std::uint64_t dim = s.dim();
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&length), sizeof(length));
  out.write(reinterpret_cast<const char*>(&hash), sizeof(hash));
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  out.write(reinterpret_cast<const char*>(s.energies.data()),
            sizeof(double) * dim);
  // column-major, interleaved (re, im)
  out.write(reinterpret_cast<const char*>(s.eigenvectors.data()),
            sizeof(double) * 2 * dim * dim);
  if (!out) throw std::runtime_error("cache: write failed " + path.string());
}

inline Spectrum load_spectrum(const std::filesystem::path& path,
                              const SpinChainSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cache: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kSpectrumMagic, sizeof(magic)) != 0)
    throw CacheCorruption("cache: bad magic in " + path.string());
  std::uint32_t version = 0, length = 0;
  std::uint64_t hash = 0, dim = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&length), sizeof(length));
  in.read(reinterpret_cast<char*>(&hash), sizeof(hash));
  in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  if (!in || version != 1)
    throw CacheCorruption("cache: bad header in " + path.string());
  if (hash != spec_hash(spec) || length != static_cast<std::uint32_t>(spec.length) ||
      dim != spec.dimension())
    throw CacheCorruption("cache: spec hash mismatch in " + path.string());
  Spectrum s;
  s.energies.resize(dim);
  s.eigenvectors.resize(dim, dim);
  in.read(reinterpret_cast<char*>(s.energies.data()), sizeof(double) * dim);
  in.read(reinterpret_cast<char*>(s.eigenvectors.data()),
          sizeof(double) * 2 * dim * dim);
  if (!in) throw CacheCorruption("cache: truncated file " + path.string());
  in.peek();
  if (!in.eof())
    throw CacheCorruption("cache: trailing bytes in " + path.string());
  return s;
}

/// Loads the spectrum from cache or diagonalizes and stores it.
inline Spectrum load_or_diagonalize(const SpinChainSpec& spec,
                                    bool use_cache = true,
                                    bool* cache_hit = nullptr) {
  if (cache_hit) *cache_hit = false;
  const auto path = spectrum_cache_path(spec);
  if (use_cache && std::filesystem::exists(path)) {
    Spectrum s = load_spectrum(path, spec);
    if (cache_hit) *cache_hit = true;
    return s;
  }
  Spectrum s = diagonalize(build_hamiltonian(spec));
  if (use_cache) save_spectrum(path, spec, s);
  return s;
}

struct CacheEntry {
  std::string file;
  std::uintmax_t bytes = 0;
};

inline std::vector<CacheEntry> cache_list() {
  std::vector<CacheEntry> entries;
  const auto dir = cache_dir();
  if (!std::filesystem::exists(dir)) return entries;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file())
      entries.push_back({e.path().filename().string(), e.file_size()});
  std::sort(entries.begin(), entries.end(),
            [](const CacheEntry& a, const CacheEntry& b) {
              return a.file < b.file;
            });
  return entries;
}

inline std::size_t cache_remove_all() {
  const auto dir = cache_dir();
  if (!std::filesystem::exists(dir)) return 0;
  std::size_t removed = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && std::filesystem::remove(e.path())) ++removed;
  return removed;
}

inline bool cache_remove(const std::string& file) {
  return std::filesystem::remove(cache_dir() / file);
}

}  // namespace corrflow
