#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vidprop {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invariant-violating input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration value or missing configuration file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or degenerate numerical problems.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File-system failures and corrupted binary files.
class IoError : public Error {
 public:
  using Error::Error;
};

enum class Platform : std::uint8_t { Douyin = 0, Kuaishou = 1, Xigua = 2, Toutiao = 3, Bilibili = 4 };
inline constexpr std::size_t kNumPlatforms = 5;
inline constexpr std::array<Platform, kNumPlatforms> kAllPlatforms = {
    Platform::Douyin, Platform::Kuaishou, Platform::Xigua, Platform::Toutiao, Platform::Bilibili};

/// The five interactive indicators, in the column order of the level table.
enum class Indicator : std::uint8_t { Views = 0, Likes = 1, Shares = 2, Collects = 3, Comments = 4 };
inline constexpr std::size_t kNumIndicators = 5;
inline constexpr std::array<Indicator, kNumIndicators> kAllIndicators = {
    Indicator::Views, Indicator::Likes, Indicator::Shares, Indicator::Collects, Indicator::Comments};

/// Raw integer indicator tuple (views, likes, shares, collects, comments).
using Indicators = std::array<std::int64_t, kNumIndicators>;
/// Aligned (scaled) indicator tuple, same order.
using AlignedIndicators = std::array<double, kNumIndicators>;

std::string_view platform_name(Platform p);
std::optional<Platform> parse_platform(std::string_view name);
std::string_view indicator_name(Indicator i);
std::optional<Indicator> parse_indicator(std::string_view name);

inline constexpr std::int64_t kSecondsPerDay = 86400;

}  // namespace vidprop
