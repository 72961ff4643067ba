#include "vidprop/align.hpp"

#include <cmath>

namespace vidprop {

double mspe_objective(std::span<const AlignmentPair> pairs, double alpha) {
  if (pairs.empty()) throw NumericError("mspe_objective: empty pair set");
  double s = 0.0;
  for (const auto& p : pairs) {
    double e = (static_cast<double>(p.k) - alpha * static_cast<double>(p.i)) / (static_cast<double>(p.k) + 1.0);
    s += e * e;
  }
  return s / static_cast<double>(pairs.size());
}

double closed_form_alpha(std::span<const AlignmentPair> pairs) {
  if (pairs.empty()) throw NumericError("closed_form_alpha: empty pair set");
  double num = 0.0, den = 0.0;
  for (const auto& p : pairs) {
    if (p.k < 0 || p.i < 0) throw NumericError("closed_form_alpha: negative indicator value");
    const double k = static_cast<double>(p.k), i = static_cast<double>(p.i);
    const double w = 1.0 / ((k + 1.0) * (k + 1.0));
    num += w * i * k;
    den += w * i * i;
  }
  if (den == 0.0) throw NumericError("closed_form_alpha: every value on the scaled platform is zero");
  const double alpha = num / den;
  if (!(alpha > 0.0)) throw NumericError("closed_form_alpha: minimizer is not positive");
  return alpha;
}

ScalingFactors::ScalingFactors() {
  for (auto ind : kAllIndicators) factors_[kCentralPlatform][ind] = 1.0;
}

void ScalingFactors::set(Platform p, Indicator ind, double alpha) {
  if (p == kCentralPlatform) {
    if (alpha != 1.0) throw DataError("the central platform's factor is fixed at 1");
    return;
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DataError("scaling factor must be positive and finite");
  factors_[p][ind] = alpha;
}

std::optional<double> ScalingFactors::get(Platform p, Indicator ind) const {
  auto it = factors_.find(p);
  if (it == factors_.end()) return std::nullopt;
  auto jt = it->second.find(ind);
  if (jt == it->second.end()) return std::nullopt;
  return jt->second;
}

double ScalingFactors::at(Platform p, Indicator ind) const {
  auto v = get(p, ind);
  if (!v)
    throw DataError("no scaling factor for " + std::string(platform_name(p)) + "/" + std::string(indicator_name(ind)));
  return *v;
}

bool ScalingFactors::has_platform(Platform p) const { return factors_.count(p) != 0; }

nlohmann::ordered_json ScalingFactors::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (auto p : kAllPlatforms) {
    auto it = factors_.find(p);
    if (it == factors_.end()) continue;
    nlohmann::ordered_json inner = nlohmann::ordered_json::object();
    for (auto ind : kAllIndicators)
      if (auto jt = it->second.find(ind); jt != it->second.end()) inner[std::string(indicator_name(ind))] = jt->second;
    j[std::string(platform_name(p))] = std::move(inner);
  }
  return j;
}

ScalingFactors ScalingFactors::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("scaling factors must be a JSON object");
  ScalingFactors f;
  for (const auto& [pname, inner] : j.items()) {
    auto p = parse_platform(pname);
    if (!p) throw DataError("unknown platform '" + pname + "' in scaling factors");
    if (!inner.is_object()) throw DataError("scaling factors for '" + pname + "' must be an object");
    for (const auto& [iname, v] : inner.items()) {
      auto ind = parse_indicator(iname);
      if (!ind) throw DataError("unknown indicator '" + iname + "' in scaling factors");
      if (!v.is_number()) throw DataError("scaling factor must be a number");
      f.set(*p, *ind, v.get<double>());
    }
  }
  return f;
}

void ScalingFactors::save(const std::string& path) const { write_file(path, to_json().dump(2) + "\n"); }

ScalingFactors ScalingFactors::load(const std::string& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed scaling factors file '" + path + "': " + e.what());
  }
}

ScalingFactors fit_factors(const Corpus& anchor) {
  // content -> platform -> chosen record
  std::map<std::string, std::map<Platform, std::size_t>> groups;
  for (std::size_t i = 0; i < anchor.size(); ++i) {
    const auto& r = anchor[i];
    if (!r.content_id) continue;
    auto& slot = groups[*r.content_id];
    auto it = slot.find(r.platform);
    if (it == slot.end() || anchor[it->second].sample_time < r.sample_time) slot[r.platform] = i;
  }
  auto values = [&](std::size_t i) { return anchor[i].final_indicators.value_or(anchor[i].indicators()); };

  std::map<std::pair<Platform, Indicator>, std::vector<AlignmentPair>> pairs;
  for (const auto& [_, slot] : groups) {
    auto central = slot.find(kCentralPlatform);
    if (central == slot.end()) continue;
    const auto k = values(central->second);
    for (const auto& [p, idx] : slot) {
      if (p == kCentralPlatform) continue;
      const auto v = values(idx);
      for (auto ind : kAllIndicators) {
        auto n = static_cast<std::size_t>(ind);
        pairs[{p, ind}].push_back({ind, k[n], v[n]});
      }
    }
  }
  ScalingFactors f;
  for (const auto& [key, ps] : pairs) {
    try {
      f.set(key.first, key.second, closed_form_alpha(ps));
    } catch (const NumericError&) {
      // No usable pairs for this group; leave it absent.
    }
  }
  return f;
}

AlignedIndicators align_indicators(Platform platform, const Indicators& raw, const ScalingFactors& factors) {
  AlignedIndicators out{};
  for (auto ind : kAllIndicators) {
    auto n = static_cast<std::size_t>(ind);
    out[n] = factors.at(platform, ind) * static_cast<double>(raw[n]);
  }
  return out;
}

}  // namespace vidprop
