#include "cgof/rng.hpp"

#include <cmath>
#include <numbers>

#include "cgof/error.hpp"

namespace cgof {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace

Rng::Rng(RngSeedSpec seed) : seed_(seed) {}

void Rng::refill() {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(seed_.stream_id),
      static_cast<std::uint32_t>(seed_.stream_id >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_.master_seed),
                                            static_cast<std::uint32_t>(seed_.master_seed >> 32)};
  buffer_ = philox4x32_10(ctr, key);
  ++block_;
  next_ = 0;
}

Rng::result_type Rng::operator()() {
  if (next_ >= 2) refill();
  const int i = 2 * next_++;
  return (static_cast<std::uint64_t>(buffer_[i + 1]) << 32) | buffer_[i];
}

void Rng::discard(std::uint64_t n) {
  const std::uint64_t buffered = next_ >= 2 ? 0 : static_cast<std::uint64_t>(2 - next_);
  if (n <= buffered) {
    next_ += static_cast<int>(n);
    return;
  }
  n -= buffered;
  block_ += n / 2;
  next_ = 2;
  if (n % 2 != 0) {
    refill();
    next_ = 1;
  }
}

double Rng::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() {
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

// Box-Muller without caching, so a draw consumes exactly two outputs.
double Rng::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw ArgumentError("Rng::below: bound must be positive");
  // Reject the top sliver so that every residue is equally likely.
  const std::uint64_t limit = max() - max() % bound;
  std::uint64_t x = (*this)();
  while (x >= limit) x = (*this)();
  return x % bound;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_stream_id(std::uint64_t base, StreamTag tag,
                               std::initializer_list<std::uint64_t> indices) {
  std::uint64_t h = mix64(base ^ mix64(static_cast<std::uint64_t>(tag)));
  for (std::uint64_t index : indices) h = mix64(h ^ mix64(index + 0x632BE59BD9B4E019ull));
  return h;
}

std::uint64_t hash_string(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace cgof
