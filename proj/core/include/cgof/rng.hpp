#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace cgof {

/// Address of one random stream: a master seed plus a stream label
/// (replicate, block, or Monte Carlo stream).
struct RngSeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  friend bool operator==(const RngSeedSpec&, const RngSeedSpec&) = default;
};

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The master
/// seed is the key and the stream id occupies the upper half of the 128-bit
/// counter, so any stream is addressable in O(1) and distinct streams never
/// overlap. Satisfies UniformRandomBitGenerator with 64-bit outputs.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(RngSeedSpec seed);
  Rng(std::uint64_t master_seed, std::uint64_t stream_id)
      : Rng(RngSeedSpec{master_seed, stream_id}) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Skip n outputs.
  void discard(std::uint64_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform double in the open interval (0, 1).
  double uniform_open();
  double normal();

  /// Unbiased integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  [[nodiscard]] const RngSeedSpec& seed() const { return seed_; }

 private:
  void refill();

  RngSeedSpec seed_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int next_ = 2;  // index into the two 64-bit halves of buffer_
};

/// Purpose tags mixed into derived stream ids so that different consumers of
/// one master seed never share a stream.
enum class StreamTag : std::uint64_t {
  kData = 1,
  kEmInit = 2,
  kPartition = 3,
  kBasis = 4,
  kMonteCarlo = 5,
  kQq = 6,
  kReplicate = 7,
  kClassification = 8,
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derive a stream id from a base id, a purpose tag and further indices.
std::uint64_t derive_stream_id(std::uint64_t base, StreamTag tag,
                               std::initializer_list<std::uint64_t> indices = {});

/// 64-bit FNV-1a hash of a string, used to key replicate streams by scenario.
std::uint64_t hash_string(std::string_view text);

}  // namespace cgof
