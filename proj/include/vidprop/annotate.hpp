#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidprop/align.hpp"
#include "vidprop/records.hpp"

namespace vidprop {

/// Stepped thresholds for levels 1..9, one column per indicator. A level is
/// granted when any indicator strictly exceeds that level's threshold.
struct LevelCriteria {
  /// thresholds[L - 1][indicator] for L in 1..9.
  std::array<std::array<double, kNumIndicators>, 9> thresholds{};

  static LevelCriteria defaults();
  /// Checks non-negative, non-decreasing columns.
  void validate() const;

  /// {"levels": [[views, likes, shares, collects, comments], ...]} for levels 1..9.
  nlohmann::ordered_json to_json() const;
  static LevelCriteria from_json(const nlohmann::json& j);
  static LevelCriteria load(const std::string& path);
};

/// 0 iff every value is 0, otherwise the highest level with at least one
/// value strictly above its threshold. Throws DataError on negative or
/// non-finite input.
int influence_level(const AlignedIndicators& aligned, const LevelCriteria& criteria);

/// Labels every sample from its video's aligned final indicators. All samples
/// of one video get the same level.
Corpus label_corpus(const Corpus& corpus, const ScalingFactors& factors, const LevelCriteria& criteria);

/// (day offset since post, likes), strictly increasing in day.
using LikesSeries = std::vector<std::pair<int, std::int64_t>>;

/// Mean over series of (likes(t) - likes(t-1)) / (likes(t) + 1). Every series
/// must contain both days.
double lip_series(std::span<const LikesSeries> series, int t);

/// One series per video from a corpus (day = floor(period / 1 day), latest
/// sample wins within a day).
std::vector<LikesSeries> likes_series(const Corpus& corpus);

/// CSV "t,lip,n" for t = 1..max_day, averaging over the series that contain
/// both days; days with no such series are omitted.
std::string lip_report_csv(std::span<const LikesSeries> series, int max_day = 21);

}  // namespace vidprop
