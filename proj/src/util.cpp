#include "vidprop/util.hpp"

#include <openssl/sha.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "vidprop/common.hpp"

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace vidprop {

std::string_view platform_name(Platform p) {
  switch (p) {
    case Platform::Douyin: return "Douyin";
    case Platform::Kuaishou: return "Kuaishou";
    case Platform::Xigua: return "Xigua";
    case Platform::Toutiao: return "Toutiao";
    case Platform::Bilibili: return "Bilibili";
  }
  return "?";
}

std::optional<Platform> parse_platform(std::string_view name) {
  for (auto p : kAllPlatforms)
    if (platform_name(p) == name) return p;
  return std::nullopt;
}

std::string_view indicator_name(Indicator i) {
  switch (i) {
    case Indicator::Views: return "views";
    case Indicator::Likes: return "likes";
    case Indicator::Shares: return "shares";
    case Indicator::Collects: return "collects";
    case Indicator::Comments: return "comments";
  }
  return "?";
}

std::optional<Indicator> parse_indicator(std::string_view name) {
  for (auto i : kAllIndicators)
    if (indicator_name(i) == name) return i;
  return std::nullopt;
}

std::uint64_t CounterRng::below(std::uint64_t n) {
  // Lemire's nearly-divisionless method.
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double CounterRng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k, CounterRng& rng) {
  std::vector<std::uint64_t> out;
  if (k >= n) {
    out.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) out[i] = i;
    return out;
  }
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(k * 2);
  out.reserve(k);
  for (std::uint64_t j = n - k; j < n; ++j) {
    std::uint64_t t = rng.below(j + 1);
    if (chosen.insert(t).second) {
      out.push_back(t);
    } else {
      chosen.insert(j);
      out.push_back(j);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Digest sha256(std::string_view data) {
  Digest d{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), d.data());
  return d;
}

std::string to_hex(const Digest& d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : d) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 15]);
  }
  return s;
}

Digest from_hex(std::string_view hex) {
  if (hex.size() != 64) throw DataError("digest hex must have 64 characters");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw DataError("invalid hex digit");
  };
  Digest d{};
  for (std::size_t i = 0; i < 32; ++i) d[i] = static_cast<std::uint8_t>(nib(hex[2 * i]) << 4 | nib(hex[2 * i + 1]));
  return d;
}

std::uint64_t hash64(std::string_view data) {
  auto d = sha256(data);
  std::uint64_t v;
  std::memcpy(&v, d.data(), sizeof v);
  return v;
}

CivilDate parse_date(std::string_view s) {
  int y = 0;
  unsigned m = 0, d = 0;
  std::string tmp(s);
  char tail = 0;
  if (std::sscanf(tmp.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3)
    throw ConfigError("invalid date '" + tmp + "', expected YYYY-MM-DD");
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw ConfigError("invalid calendar date '" + tmp + "'");
  return {y, m, d};
}

std::string format_date(const CivilDate& d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", d.year, d.month, d.day);
  return buf;
}

std::int64_t date_start(const CivilDate& d) {
  using namespace std::chrono;
  sys_days days{year{d.year} / month{d.month} / day{d.day}};
  return static_cast<std::int64_t>(days.time_since_epoch().count()) * kSecondsPerDay;
}

CivilDate date_of(std::int64_t t) {
  using namespace std::chrono;
  std::int64_t days = t >= 0 ? t / kSecondsPerDay : -((-t + kSecondsPerDay - 1) / kSecondsPerDay);
  year_month_day ymd{sys_days{std::chrono::days{days}}};
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day())};
}

std::string format_timestamp(std::int64_t t) {
  auto d = date_of(t);
  std::int64_t sod = t - date_start(d);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s %02d:%02d:%02d", format_date(d).c_str(), static_cast<int>(sod / 3600),
                static_cast<int>(sod / 60 % 60), static_cast<int>(sod % 60));
  return buf;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string_view ByteReader::take(std::size_t n) {
  if (n > remaining()) throw IoError("truncated binary data");
  auto s = data_.substr(pos_, n);
  pos_ += n;
  return s;
}

}  // namespace vidprop
