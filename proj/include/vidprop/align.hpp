#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "vidprop/records.hpp"

namespace vidprop {

/// One cross-platform observation of the same content: `k` on the central
/// platform (Kuaishou), `i` on the other platform.
struct AlignmentPair {
  Indicator indicator = Indicator::Views;
  std::int64_t k = 0;
  std::int64_t i = 0;
};

/// Mean squared percentage error of scaling `i` by alpha against `k`:
/// mean(((k - alpha * i) / (k + 1))^2).
double mspe_objective(std::span<const AlignmentPair> pairs, double alpha);

/// Exact minimizer of mspe_objective:
///   alpha = sum(i k / (k+1)^2) / sum(i^2 / (k+1)^2).
/// Throws NumericError on an empty set, when every i is zero, or when the
/// minimizer is not positive.
double closed_form_alpha(std::span<const AlignmentPair> pairs);

inline constexpr Platform kCentralPlatform = Platform::Kuaishou;

/// Multiplier per (platform, indicator). The central platform is always 1.
class ScalingFactors {
 public:
  ScalingFactors();

  void set(Platform p, Indicator ind, double alpha);
  std::optional<double> get(Platform p, Indicator ind) const;
  /// Throws DataError when missing.
  double at(Platform p, Indicator ind) const;
  bool has_platform(Platform p) const;
  const std::map<Platform, std::map<Indicator, double>>& entries() const { return factors_; }

  /// {"platform": {"indicator": alpha}}
  nlohmann::ordered_json to_json() const;
  static ScalingFactors from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static ScalingFactors load(const std::string& path);

 private:
  std::map<Platform, std::map<Indicator, double>> factors_;
};

/// Groups anchor records sharing a content_id, pairs each non-central
/// platform with the central one per indicator, and fits one factor per
/// (platform, indicator). Groups without usable pairs are left absent. For
/// each (content, platform) the latest sample is used, preferring its final
/// indicators when present.
ScalingFactors fit_factors(const Corpus& anchor);

/// alpha(platform, indicator) * raw value, for each indicator.
AlignedIndicators align_indicators(Platform platform, const Indicators& raw, const ScalingFactors& factors);

}  // namespace vidprop
