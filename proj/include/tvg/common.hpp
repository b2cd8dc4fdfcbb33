#pragma once
// Shared plumbing: deterministic RNG, checksums, hashing, small string/file
// helpers. Everything here is dependency-free except <Eigen/Core>.

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvg {

// Deterministic random source. All sampling goes through this wrapper so that
// runs are reproducible from a single seed and the engine state can be
// serialized into checkpoints. normal() derives both Box-Muller uniforms
// fresh on every call, so the generator carries no hidden cache.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // 53-bit uniform in [0, 1).
  double uniform() {
    return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // Box-Muller; u1 in (0, 1] to keep the log finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Unbiased integer in [0, n).
  size_t index(size_t n);

  int int_range(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(index(static_cast<size_t>(hi - lo + 1)));
  }

  std::vector<size_t> permutation(size_t n);
  std::vector<size_t> sample_without_replacement(size_t n, size_t k);

  std::string serialize() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 eng_;
};

// CRC-32 (IEEE 802.3 polynomial), table-driven.
uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

// FNV-1a 64-bit, used for config hashes in logs.
uint64_t fnv1a64(const std::string& s);

// First non-finite entry of a row-major scan, or (-1,-1) when all finite.
std::pair<long, long> first_non_finite(const Eigen::MatrixXd& m);

// String helpers.
std::vector<std::string> split_ws(const std::string& line);
std::string trim(const std::string& s);

// Whole-file helpers (throw std::runtime_error on I/O failure).
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace tvg
