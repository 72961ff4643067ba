#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <type_traits>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vidprop {

// ---------------------------------------------------------------------------
// Counter-based random numbers
// ---------------------------------------------------------------------------

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Combines an arbitrary list of 64-bit keys into one stream key.
constexpr std::uint64_t stream_key(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (auto k : keys) h = mix64(h ^ mix64(k));
  return h;
}

/// Deterministic generator whose output depends only on its key and the
/// number of draws taken so far. Streams keyed differently are independent,
/// which lets callers sample in any order or in parallel and still reproduce
/// the same values.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::initializer_list<std::uint64_t> keys) : key_(stream_key(keys)) {}

  std::uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), unbiased. n must be > 0.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (one value per call).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Uniform sample of `k` distinct indices from [0, n) (Floyd's algorithm),
/// returned in ascending order. If k >= n all indices are returned.
std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k, CounterRng& rng);

/// Fisher-Yates shuffle driven by CounterRng.
template <typename T>
void shuffle(std::vector<T>& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.below(i);
    std::swap(v[i - 1], v[j]);
  }
}

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::string_view data);
std::string to_hex(const Digest& d);
Digest from_hex(std::string_view hex);
/// Stable 64-bit hash of a string (first 8 bytes of its SHA-256).
std::uint64_t hash64(std::string_view data);

// ---------------------------------------------------------------------------
// Time
// ---------------------------------------------------------------------------

struct CivilDate {
  int year = 1970;
  unsigned month = 1;
  unsigned day = 1;
  friend bool operator==(const CivilDate&, const CivilDate&) = default;
};

/// Parses "YYYY-MM-DD".
CivilDate parse_date(std::string_view s);
std::string format_date(const CivilDate& d);
/// Unix seconds at 00:00:00 UTC of the date.
std::int64_t date_start(const CivilDate& d);
/// UTC date containing the timestamp.
CivilDate date_of(std::int64_t unix_seconds);
/// "YYYY-MM-DD HH:MM:SS" in UTC.
std::string format_timestamp(std::int64_t unix_seconds);

// ---------------------------------------------------------------------------
// Parallelism
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, n) over up to `threads` workers. Each index is
/// processed exactly once; callers write results into per-index slots so the
/// outcome does not depend on the thread count.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Binary I/O helpers (little-endian hosts only)
// ---------------------------------------------------------------------------

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

class ByteWriter {
 public:
  template <typename T>
  void put(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_bytes(std::string_view s) { buf_.append(s); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}
  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }
  std::string_view take(std::size_t n);
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace vidprop
