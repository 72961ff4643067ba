#include "vidprop/records.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace vidprop {

using nlohmann::json;
using nlohmann::ordered_json;

void validate_record(const SampleRecord& r) {
  auto fail = [&](const std::string& field, const std::string& why) {
    throw DataError("sample '" + r.sample_id + "': field '" + field + "' " + why);
  };
  if (r.video_id.empty()) fail("video_id", "is empty");
  if (r.sample_id.empty()) fail("sample_id", "is empty");
  if (r.post_time < 0) fail("post_time", "is negative");
  if (r.sample_time < r.post_time) fail("sample_time", "is earlier than post_time");
  if (r.duration_s < 1 || r.duration_s > 300) fail("duration_s", "is outside [1, 300]");
  const std::pair<const char*, std::int64_t> counts[] = {{"fans", r.fans},     {"likes", r.likes},
                                                         {"collects", r.collects}, {"views", r.views},
                                                         {"shares", r.shares}, {"comments_count", r.comments_count}};
  for (const auto& [name, v] : counts)
    if (v < 0) fail(name, "is negative");
  if (r.comments_count < static_cast<std::int64_t>(r.comments.size()))
    fail("comments_count", "is smaller than the number of captured comments");
  if (r.final_indicators)
    for (auto v : *r.final_indicators)
      if (v < 0) fail("final_indicators", "has a negative entry");
  if (r.influence_level && (*r.influence_level < 0 || *r.influence_level > 9))
    fail("influence_level", "is outside [0, 9]");
}

namespace {

ordered_json indicators_json(const Indicators& ind) {
  ordered_json o;
  for (auto i : kAllIndicators) o[std::string(indicator_name(i))] = ind[static_cast<std::size_t>(i)];
  return o;
}

Indicators indicators_from_json(const json& j) {
  Indicators ind{};
  if (j.is_array()) {
    if (j.size() != kNumIndicators) throw DataError("final_indicators must have 5 entries");
    for (std::size_t i = 0; i < kNumIndicators; ++i) ind[i] = j[i].get<std::int64_t>();
    return ind;
  }
  for (auto i : kAllIndicators) ind[static_cast<std::size_t>(i)] = j.at(std::string(indicator_name(i))).get<std::int64_t>();
  return ind;
}

template <typename T>
T field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw DataError(std::string("missing field '") + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("field '") + name + "' has the wrong type");
  }
}

}  // namespace

ordered_json record_to_json(const SampleRecord& r) {
  ordered_json j;
  j["video_id"] = r.video_id;
  j["sample_id"] = r.sample_id;
  j["platform"] = platform_name(r.platform);
  j["topic"] = r.topic;
  j["title"] = r.title;
  j["description"] = r.description;
  j["post_time"] = r.post_time;
  j["sample_time"] = r.sample_time;
  j["duration_s"] = r.duration_s;
  j["author_id"] = r.author_id;
  j["fans"] = r.fans;
  j["likes"] = r.likes;
  j["collects"] = r.collects;
  j["views"] = r.views;
  j["shares"] = r.shares;
  j["comments_count"] = r.comments_count;
  ordered_json cs = ordered_json::array();
  for (const auto& c : r.comments) cs.push_back(ordered_json{{"text", c.text}, {"time", c.time}});
  j["comments"] = std::move(cs);
  j["video_ref"] = r.video_ref ? ordered_json(*r.video_ref) : ordered_json(nullptr);
  j["final_indicators"] = r.final_indicators ? indicators_json(*r.final_indicators) : ordered_json(nullptr);
  j["influence_level"] = r.influence_level ? ordered_json(*r.influence_level) : ordered_json(nullptr);
  if (r.content_id) j["content_id"] = *r.content_id;
  return j;
}

SampleRecord record_from_json(const json& j) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  SampleRecord r;
  r.video_id = field<std::string>(j, "video_id");
  r.sample_id = field<std::string>(j, "sample_id");
  auto pname = field<std::string>(j, "platform");
  auto p = parse_platform(pname);
  if (!p) throw DataError("unknown platform '" + pname + "'");
  r.platform = *p;
  r.topic = field<std::string>(j, "topic");
  r.title = field<std::string>(j, "title");
  r.description = field<std::string>(j, "description");
  r.post_time = field<std::int64_t>(j, "post_time");
  r.sample_time = field<std::int64_t>(j, "sample_time");
  r.duration_s = field<std::int64_t>(j, "duration_s");
  r.author_id = field<std::string>(j, "author_id");
  r.fans = field<std::int64_t>(j, "fans");
  r.likes = field<std::int64_t>(j, "likes");
  r.collects = field<std::int64_t>(j, "collects");
  r.views = field<std::int64_t>(j, "views");
  r.shares = field<std::int64_t>(j, "shares");
  r.comments_count = field<std::int64_t>(j, "comments_count");
  if (auto it = j.find("comments"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw DataError("field 'comments' must be an array");
    for (const auto& c : *it) r.comments.push_back({field<std::string>(c, "text"), field<std::int64_t>(c, "time")});
  }
  if (auto it = j.find("video_ref"); it != j.end() && !it->is_null()) r.video_ref = it->get<std::string>();
  if (auto it = j.find("final_indicators"); it != j.end() && !it->is_null()) {
    try {
      r.final_indicators = indicators_from_json(*it);
    } catch (const json::exception&) {
      throw DataError("field 'final_indicators' is malformed");
    }
  }
  if (auto it = j.find("influence_level"); it != j.end() && !it->is_null()) r.influence_level = it->get<int>();
  if (auto it = j.find("content_id"); it != j.end() && !it->is_null()) r.content_id = it->get<std::string>();
  return r;
}

std::string serialize_record(const SampleRecord& r) { return record_to_json(r).dump(-1, ' ', false); }

ordered_json sample_info(const SampleRecord& r) {
  ordered_json j;
  j["platform"] = platform_name(r.platform);
  j["topic"] = r.topic;
  j["title"] = r.title;
  j["description"] = r.description;
  j["post_time"] = format_timestamp(r.post_time);
  j["current_time"] = format_timestamp(r.sample_time);
  j["duration"] = r.duration_s;
  j["author_id"] = r.author_id;
  j["fans"] = r.fans;
  j["likes"] = r.likes;
  j["collects"] = r.collects;
  j["views"] = r.views;
  j["shares"] = r.shares;
  j["comments_count"] = r.comments_count;
  ordered_json cs = ordered_json::array();
  for (const auto& c : r.comments) cs.push_back(ordered_json{{"text", c.text}, {"time", format_timestamp(c.time)}});
  j["comments"] = std::move(cs);
  return j;
}

Corpus::Corpus(std::vector<SampleRecord> records) : records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!by_sample_id_.emplace(r.sample_id, i).second) throw DataError("duplicate sample_id '" + r.sample_id + "'");
    video_index_[r.video_id].push_back(i);
    topic_index_[r.topic].push_back(i);
  }
  for (auto& [_, idx] : video_index_)
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const auto &ra = records_[a], &rb = records_[b];
      return std::tie(ra.sample_time, ra.sample_id) < std::tie(rb.sample_time, rb.sample_id);
    });
  for (auto& [_, idx] : topic_index_)
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const auto &ra = records_[a], &rb = records_[b];
      return std::tie(ra.post_time, ra.sample_time, ra.sample_id) < std::tie(rb.post_time, rb.sample_time, rb.sample_id);
    });
}

std::optional<std::size_t> Corpus::find(const std::string& sample_id) const {
  auto it = by_sample_id_.find(sample_id);
  if (it == by_sample_id_.end()) return std::nullopt;
  return it->second;
}

Corpus parse_corpus_text(const std::string& text, bool strict) {
  std::vector<SampleRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      auto r = record_from_json(j);
      if (strict) validate_record(r);
      if (auto [it, fresh] = seen.emplace(r.sample_id, lineno); !fresh)
        throw DataError("duplicate sample_id '" + r.sample_id + "' (first seen on line " + std::to_string(it->second) + ")");
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": malformed JSON: " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return Corpus(std::move(records));
}

Corpus parse_corpus(const std::string& path, bool strict) { return parse_corpus_text(read_file(path), strict); }

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus.records()) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::string& path) { write_file(path, serialize_corpus(corpus)); }

Corpus dedup_min_gap(const Corpus& corpus, int gap_days) {
  const std::int64_t gap = static_cast<std::int64_t>(gap_days) * kSecondsPerDay;
  std::vector<bool> keep(corpus.size(), false);
  for (const auto& [_, idx] : corpus.video_index()) {
    std::optional<std::int64_t> last;
    for (auto i : idx) {
      auto t = corpus[i].sample_time;
      if (!last || t - *last >= gap) {
        keep[i] = true;
        last = t;
      }
    }
  }
  std::vector<SampleRecord> out;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (keep[i]) out.push_back(corpus[i]);
  return Corpus(std::move(out));
}

SplitSpec split_by_date(const Corpus& corpus, const CivilDate& cutoff) {
  SplitSpec s;
  s.cutoff = cutoff;
  const std::int64_t next_day = date_start(cutoff) + kSecondsPerDay;
  for (const auto& r : corpus.records()) (r.post_time < next_day ? s.train_ids : s.test_ids).push_back(r.sample_id);
  return s;
}

ordered_json split_to_json(const SplitSpec& split) {
  return ordered_json{{"cutoff", format_date(split.cutoff)}, {"train", split.train_ids}, {"test", split.test_ids}};
}

std::size_t approx_token_count(std::string_view text) {
  std::size_t tokens = 0;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    auto c = static_cast<unsigned char>(text[i]);
    if (c >= 0x80) {
      std::size_t start = i;
      while (i < n && static_cast<unsigned char>(text[i]) >= 0x80) ++i;
      tokens += (i - start + 2) / 3;
    } else if (std::isalnum(c)) {
      while (i < n && static_cast<unsigned char>(text[i]) < 0x80 && std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
      ++tokens;
    } else {
      if (!std::isspace(c)) ++tokens;
      ++i;
    }
  }
  return tokens;
}

CorpusStats corpus_stats(const Corpus& corpus, std::size_t token_bin) {
  CorpusStats s;
  s.token_bin = token_bin;
  s.n_records = corpus.size();
  s.n_videos = corpus.video_index().size();
  std::map<std::string, std::size_t> topics;
  for (const auto& r : corpus.records()) {
    ++s.duration_hist[r.duration_s];
    ++topics[r.topic];
    ++s.platform_counts[std::string(platform_name(r.platform))];
    if (r.influence_level) ++s.level_hist[*r.influence_level];
    auto tokens = approx_token_count(sample_info(r).dump(-1, ' ', false));
    ++s.token_hist[tokens / token_bin * token_bin];
  }
  s.topic_ranking.assign(topics.begin(), topics.end());
  std::stable_sort(s.topic_ranking.begin(), s.topic_ranking.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return s;
}

ordered_json stats_to_json(const CorpusStats& s) {
  ordered_json j;
  j["n_records"] = s.n_records;
  j["n_videos"] = s.n_videos;
  auto hist = [](const auto& m) {
    ordered_json a = ordered_json::array();
    for (const auto& [k, v] : m) a.push_back({k, v});
    return a;
  };
  j["duration_hist"] = hist(s.duration_hist);
  ordered_json topics = ordered_json::array();
  for (const auto& [t, c] : s.topic_ranking) topics.push_back({t, c});
  j["topic_ranking"] = std::move(topics);
  j["platform_counts"] = s.platform_counts;
  j["level_hist"] = hist(s.level_hist);
  j["token_bin"] = s.token_bin;
  j["token_hist"] = hist(s.token_hist);
  return j;
}

namespace {
std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}
}  // namespace

void write_stats(const CorpusStats& s, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_file((fs::path(dir) / "stats.json").string(), stats_to_json(s).dump(2) + "\n");
  std::ostringstream d, t, p, l, k;
  d << "duration_s,count\n";
  for (const auto& [x, c] : s.duration_hist) d << x << ',' << c << '\n';
  t << "rank,topic,count\n";
  for (std::size_t i = 0; i < s.topic_ranking.size(); ++i)
    t << i + 1 << ',' << csv_escape(s.topic_ranking[i].first) << ',' << s.topic_ranking[i].second << '\n';
  p << "platform,count\n";
  for (const auto& [x, c] : s.platform_counts) p << x << ',' << c << '\n';
  l << "level,count\n";
  for (const auto& [x, c] : s.level_hist) l << x << ',' << c << '\n';
  k << "tokens_from,count\n";
  for (const auto& [x, c] : s.token_hist) k << x << ',' << c << '\n';
  write_file((fs::path(dir) / "duration_hist.csv").string(), d.str());
  write_file((fs::path(dir) / "topic_ranking.csv").string(), t.str());
  write_file((fs::path(dir) / "platform_counts.csv").string(), p.str());
  write_file((fs::path(dir) / "level_hist.csv").string(), l.str());
  write_file((fs::path(dir) / "token_hist.csv").string(), k.str());
}

}  // namespace vidprop
