#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidprop/align.hpp"
#include "vidprop/records.hpp"

namespace vidprop {

struct SynthConfig {
  /// Exact number of samples emitted.
  std::size_t target_samples = 5000;
  std::size_t min_samples_per_video = 1;
  std::size_t max_samples_per_video = 4;
  std::size_t n_topics = 40;
  double topic_zipf = 1.1;
  std::size_t n_authors = 600;
  /// Douyin, Kuaishou, Xigua, Toutiao, Bilibili.
  std::array<double, kNumPlatforms> platform_proportions{0.52, 0.18, 0.14, 0.10, 0.06};
  /// Posting window [post_start, post_end) in unix seconds.
  std::int64_t post_start = 1732492800;  // 2024-11-25 00:00 UTC
  std::int64_t post_end = 1735300800;    // 2024-12-27 12:00 UTC
  /// Duration mixture: lognormal modes in seconds and the weight of the first.
  double duration_mode_short = 7.0;
  double duration_mode_long = 38.0;
  double duration_short_weight = 0.7;
  /// Latent log10 final views.
  double popularity_mean = 3.9;
  double popularity_sd = 0.6;
  /// Share of videos with an extra exponential boost and its mean (log10 units).
  double tail_fraction = 0.1;
  double tail_scale = 0.8;
  /// Share of videos with no engagement at all.
  double dead_fraction = 0.005;
  /// Share of barely watched videos, log10 views uniform in [0.3, 2.3].
  double tiny_fraction = 0.015;
  /// log10 ratios of likes, shares, collects and comments to views.
  std::array<double, 4> engagement_log_ratio{-2.3, -3.3, -2.9, -3.0};
  /// Logistic growth in days: midpoint and scale; the curve is normalized to 1 at day 14.
  double growth_midpoint = 1.0;
  double growth_scale = 0.9;
  /// Multiplies every noise standard deviation; 0 makes labels a pure function of popularity.
  double noise_scale = 1.0;
  /// Sd of the popularity bucket written into descriptions (before noise_scale).
  double description_noise = 0.35;
  /// Anchor corpus for factor fitting.
  std::size_t anchor_contents = 300;
  double anchor_noise = 0.05;
  std::uint64_t seed = 7;

  void validate() const;
  /// Ground-truth factors: raw platform value = round(true value / alpha).
  ScalingFactors true_factors() const;
};

struct SynthVideoTruth {
  std::string video_id;
  Platform platform = Platform::Douyin;
  double latent_log10_views = 0.0;
  Indicators true_final{};
};

struct SynthResult {
  Corpus corpus;   // labeled with the true factors
  Corpus anchor;   // cross-platform duplicates with content_id
  ScalingFactors factors;
  std::vector<SynthVideoTruth> truth;
  nlohmann::ordered_json manifest() const;
};

/// Fraction of the day-14 value reached after `days` days.
double synth_growth(double days, const SynthConfig& config);

SynthResult generate_corpus(const SynthConfig& config);

}  // namespace vidprop
