#pragma once

// CSV and binary output. CSV floats carry 17 significant digits so that
// re-parsing reproduces the in-memory doubles exactly. Binary containers
// are little-endian float64.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "corrflow/gapstats.hpp"
#include "corrflow/spinchain.hpp"

namespace corrflow {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_g17(const std::string& s) {
  return std::strtod(s.c_str(), nullptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }
  void close() { out_.close(); }

 private:
  std::ofstream out_;
};

inline std::vector<std::vector<std::string>> read_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

// ---------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Content hash over the exact bit patterns of the spec fields.
inline std::uint64_t spec_hash(const SpinChainSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::int64_t length = spec.length;
  h = fnv1a64(&length, sizeof(length), h);
  for (double v : {spec.gamma, spec.lambda, spec.j1, spec.j2}) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    h = fnv1a64(&bits, sizeof(bits), h);
  }
  std::uint8_t boundary = spec.boundary == Boundary::open ? 0 : 1;
  h = fnv1a64(&boundary, sizeof(boundary), h);
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------
// Binary gap-distribution dump
// ---------------------------------------------------------------------

inline constexpr char kDistMagic[8] = {'C', 'F', 'G', 'D', 'I', 'S', 'T', '1'};

inline void write_gap_distribution(const std::filesystem::path& path,
                                   const GapDistribution& dist) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write(kDistMagic, sizeof(kDistMagic));
  std::uint32_t version = 1;
  std::uint32_t kind = static_cast<std::uint32_t>(dist.kind);
  std::uint64_t count = dist.entries.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&kind), sizeof(kind));
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  out.write(reinterpret_cast<const char*>(&dist.total_weight), sizeof(double));
  out.write(reinterpret_cast<const char*>(&dist.discarded_weight),
            sizeof(double));
  for (const auto& e : dist.entries) {
    out.write(reinterpret_cast<const char*>(&e.gap), sizeof(double));
    out.write(reinterpret_cast<const char*>(&e.weight), sizeof(double));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline GapDistribution read_gap_distribution(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDistMagic, sizeof(magic)) != 0)
    throw std::runtime_error("bad distribution file: " + path.string());
  std::uint32_t version = 0, kind = 0;
  std::uint64_t count = 0;
  double total = 0, discarded = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&kind), sizeof(kind));
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  in.read(reinterpret_cast<char*>(&total), sizeof(total));
  in.read(reinterpret_cast<char*>(&discarded), sizeof(discarded));
  if (!in || version != 1 || kind > 2)
    throw std::runtime_error("bad distribution header: " + path.string());
  std::vector<GapEntry> entries(count);
  for (auto& e : entries) {
    in.read(reinterpret_cast<char*>(&e.gap), sizeof(double));
    in.read(reinterpret_cast<char*>(&e.weight), sizeof(double));
  }
  if (!in) throw std::runtime_error("truncated distribution: " + path.string());
  return make_gap_distribution(std::move(entries),
                               static_cast<GapKind>(kind), 1.0, discarded);
}

}  // namespace corrflow
