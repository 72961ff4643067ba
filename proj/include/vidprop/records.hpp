#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidprop/common.hpp"
#include "vidprop/util.hpp"

namespace vidprop {

struct Comment {
  std::string text;
  std::int64_t time = 0;
  friend bool operator==(const Comment&, const Comment&) = default;
};

/// One timestamped observation of a short-video.
struct SampleRecord {
  std::string video_id;
  std::string sample_id;
  Platform platform = Platform::Douyin;
  std::string topic;
  std::string title;
  std::string description;
  std::int64_t post_time = 0;
  std::int64_t sample_time = 0;
  std::int64_t duration_s = 1;
  std::string author_id;
  std::int64_t fans = 0;
  std::int64_t likes = 0;
  std::int64_t collects = 0;
  std::int64_t views = 0;
  std::int64_t shares = 0;
  std::int64_t comments_count = 0;
  std::vector<Comment> comments;
  std::optional<std::string> video_ref;
  std::optional<Indicators> final_indicators;
  std::optional<int> influence_level;
  /// Cross-platform content identity, only used by anchor corpora.
  std::optional<std::string> content_id;

  /// Live indicators in level-table order.
  Indicators indicators() const { return {views, likes, shares, collects, comments_count}; }
  /// Observation period in seconds.
  std::int64_t period() const { return sample_time - post_time; }

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// Throws DataError naming the offending field.
void validate_record(const SampleRecord& r);

nlohmann::ordered_json record_to_json(const SampleRecord& r);
SampleRecord record_from_json(const nlohmann::json& j);
/// One JSON line, no trailing newline.
std::string serialize_record(const SampleRecord& r);

/// The textual information of a sample as shown to a language model: every
/// observable field, times formatted as "YYYY-MM-DD HH:MM:SS", and nothing
/// that reveals the outcome (final indicators, level) or internal ids.
nlohmann::ordered_json sample_info(const SampleRecord& r);

/// Immutable set of samples with its two time-ordered indices.
class Corpus {
 public:
  Corpus() = default;
  /// Builds both indices; throws DataError on a duplicate sample_id.
  explicit Corpus(std::vector<SampleRecord> records);

  const std::vector<SampleRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const SampleRecord& operator[](std::size_t i) const { return records_[i]; }

  /// video_id -> record positions ordered by (sample_time, sample_id).
  const std::map<std::string, std::vector<std::size_t>>& video_index() const { return video_index_; }
  /// topic -> record positions ordered by (post_time, sample_time, sample_id).
  const std::map<std::string, std::vector<std::size_t>>& topic_index() const { return topic_index_; }

  std::optional<std::size_t> find(const std::string& sample_id) const;

 private:
  std::vector<SampleRecord> records_;
  std::map<std::string, std::vector<std::size_t>> video_index_;
  std::map<std::string, std::vector<std::size_t>> topic_index_;
  std::map<std::string, std::size_t> by_sample_id_;
};

/// Parses newline-delimited JSON. Blank lines are skipped. Errors carry the
/// 1-based line number.
Corpus parse_corpus_text(const std::string& text, bool strict);
Corpus parse_corpus(const std::string& path, bool strict);
std::string serialize_corpus(const Corpus& corpus);
void write_corpus(const Corpus& corpus, const std::string& path);

/// Per video, keeps the earliest sample and then every sample at least
/// `gap_days` after the last kept one (on sample_time). Idempotent.
Corpus dedup_min_gap(const Corpus& corpus, int gap_days = 2);

struct SplitSpec {
  CivilDate cutoff;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

/// Samples posted on or before the cutoff date (UTC) go to train.
SplitSpec split_by_date(const Corpus& corpus, const CivilDate& cutoff);
nlohmann::ordered_json split_to_json(const SplitSpec& split);

/// Rough token count used for the length histogram and the instruction
/// budget: ASCII runs count one token per alphanumeric word and one per
/// punctuation character, other runs count ceil(bytes / 3).
std::size_t approx_token_count(std::string_view text);

struct CorpusStats {
  std::map<std::int64_t, std::size_t> duration_hist;
  std::vector<std::pair<std::string, std::size_t>> topic_ranking;
  std::map<std::string, std::size_t> platform_counts;
  std::map<int, std::size_t> level_hist;
  /// Bucket lower bound (multiples of token_bin) -> count.
  std::map<std::size_t, std::size_t> token_hist;
  std::size_t token_bin = 100;
  std::size_t n_records = 0;
  std::size_t n_videos = 0;
};

CorpusStats corpus_stats(const Corpus& corpus, std::size_t token_bin = 100);
nlohmann::ordered_json stats_to_json(const CorpusStats& s);
/// Writes stats.json plus one CSV per histogram into `dir`.
void write_stats(const CorpusStats& s, const std::string& dir);

}  // namespace vidprop
