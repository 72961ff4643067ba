#include "vidprop/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace vidprop {

LevelCriteria LevelCriteria::defaults() {
  LevelCriteria c;
  // views, then one engagement threshold shared by likes/shares/collects/comments
  const std::array<std::pair<double, double>, 9> rows = {{{0, 0},
                                                           {100, 10},
                                                           {100000, 20},
                                                           {1000000, 80},
                                                           {1000000, 300},
                                                           {1000000, 1000},
                                                           {10000000, 3000},
                                                           {100000000, 10000},
                                                           {200000000, 50000}}};
  for (std::size_t l = 0; l < 9; ++l) {
    c.thresholds[l][0] = rows[l].first;
    for (std::size_t i = 1; i < kNumIndicators; ++i) c.thresholds[l][i] = rows[l].second;
  }
  return c;
}

void LevelCriteria::validate() const {
  for (std::size_t i = 0; i < kNumIndicators; ++i)
    for (std::size_t l = 0; l < 9; ++l) {
      if (!(thresholds[l][i] >= 0.0) || !std::isfinite(thresholds[l][i]))
        throw ConfigError("level thresholds must be finite and non-negative");
      if (l > 0 && thresholds[l][i] < thresholds[l - 1][i])
        throw ConfigError("level thresholds for " + std::string(indicator_name(kAllIndicators[i])) +
                          " decrease at level " + std::to_string(l + 1));
    }
}

nlohmann::ordered_json LevelCriteria::to_json() const {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : thresholds) rows.push_back(row);
  return {{"levels", rows}};
}

LevelCriteria LevelCriteria::from_json(const nlohmann::json& j) {
  LevelCriteria c;
  try {
    const auto& rows = j.at("levels");
    if (!rows.is_array() || rows.size() != 9) throw ConfigError("criteria 'levels' must list 9 rows (levels 1..9)");
    for (std::size_t l = 0; l < 9; ++l) {
      if (!rows[l].is_array() || rows[l].size() != kNumIndicators)
        throw ConfigError("criteria row " + std::to_string(l + 1) + " must have 5 thresholds");
      for (std::size_t i = 0; i < kNumIndicators; ++i) c.thresholds[l][i] = rows[l][i].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed level criteria: ") + e.what());
  }
  c.validate();
  return c;
}

LevelCriteria LevelCriteria::load(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  try {
    return from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed criteria file '" + path + "': " + e.what());
  }
}

int influence_level(const AlignedIndicators& aligned, const LevelCriteria& criteria) {
  bool all_zero = true;
  for (double v : aligned) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("aligned indicators must be finite and non-negative");
    if (v != 0.0) all_zero = false;
  }
  if (all_zero) return 0;
  for (int level = 9; level >= 1; --level) {
    const auto& row = criteria.thresholds[static_cast<std::size_t>(level - 1)];
    for (std::size_t i = 0; i < kNumIndicators; ++i)
      if (aligned[i] > row[i]) return level;
  }
  // Only reachable with a positive level-1 threshold.
  return 0;
}

Corpus label_corpus(const Corpus& corpus, const ScalingFactors& factors, const LevelCriteria& criteria) {
  std::vector<SampleRecord> out = corpus.records();
  for (const auto& [video, idx] : corpus.video_index()) {
    std::optional<Indicators> final;
    for (auto i : idx) {
      const auto& f = corpus[i].final_indicators;
      if (!f) continue;
      if (final && *final != *f) throw DataError("video '" + video + "' has conflicting final indicators");
      final = f;
    }
    if (!final) throw DataError("video '" + video + "' has no final indicators");
    const int level = influence_level(align_indicators(corpus[idx.front()].platform, *final, factors), criteria);
    for (auto i : idx) out[i].influence_level = level;
  }
  return Corpus(std::move(out));
}

double lip_series(std::span<const LikesSeries> series, int t) {
  if (t < 1) throw DataError("lip_series: day must be >= 1");
  if (series.empty()) throw DataError("lip_series: no series");
  double sum = 0.0;
  for (const auto& s : series) {
    auto find = [&](int day) -> std::int64_t {
      auto it = std::lower_bound(s.begin(), s.end(), day, [](const auto& e, int d) { return e.first < d; });
      if (it == s.end() || it->first != day)
        throw DataError("lip_series: series lacks day " + std::to_string(day));
      return it->second;
    };
    const double cur = static_cast<double>(find(t));
    const double prev = static_cast<double>(find(t - 1));
    sum += (cur - prev) / (cur + 1.0);
  }
  return sum / static_cast<double>(series.size());
}

std::vector<LikesSeries> likes_series(const Corpus& corpus) {
  std::vector<LikesSeries> out;
  for (const auto& [_, idx] : corpus.video_index()) {
    std::map<int, std::int64_t> days;
    for (auto i : idx) days[static_cast<int>(corpus[i].period() / kSecondsPerDay)] = corpus[i].likes;
    out.emplace_back(days.begin(), days.end());
  }
  return out;
}

std::string lip_report_csv(std::span<const LikesSeries> series, int max_day) {
  std::ostringstream os;
  os << "t,lip,n\n";
  for (int t = 1; t <= max_day; ++t) {
    std::vector<LikesSeries> usable;
    for (const auto& s : series) {
      bool has_t = false, has_prev = false;
      for (const auto& [d, _] : s) {
        has_t |= d == t;
        has_prev |= d == t - 1;
      }
      if (has_t && has_prev) usable.push_back(s);
    }
    if (usable.empty()) continue;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", lip_series(usable, t));
    os << t << ',' << buf << ',' << usable.size() << '\n';
  }
  return os.str();
}

}  // namespace vidprop
