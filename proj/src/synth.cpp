#include "vidprop/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vidprop/annotate.hpp"
#include "vidprop/util.hpp"

namespace vidprop {

namespace {

constexpr double kTrueAlpha[kNumPlatforms][kNumIndicators] = {
    {0.5, 0.8, 1.25, 0.9, 0.75},  // Douyin
    {1.0, 1.0, 1.0, 1.0, 1.0},    // Kuaishou
    {1.6, 2.0, 2.5, 1.8, 2.2},    // Xigua
    {2.0, 2.4, 3.0, 2.2, 2.6},    // Toutiao
    {1.3, 0.6, 1.5, 0.7, 0.9},    // Bilibili
};

const char* const kTopicStems[] = {"美食", "旅行", "萌宠", "健身", "科技", "音乐", "舞蹈", "搞笑", "教育", "汽车"};
const char* const kTopicSuffixes[] = {"日常", "挑战", "分享", "测评"};
const char* const kCommentPool[] = {"太好看了", "学到了", "支持一下", "哈哈哈哈", "这是哪里？",
                                    "求链接",   "第一次见", "好厉害",   "已收藏",   "nice!"};

// Stream tags keep the per-purpose generators independent.
enum : std::uint64_t { kVideoStream = 1, kAuthorStream = 2, kAnchorStream = 3, kSampleStream = 4 };

std::string topic_name(std::size_t t) {
  const std::size_t stems = std::size(kTopicStems), suffixes = std::size(kTopicSuffixes);
  std::string name = std::string(kTopicStems[t % stems]) + kTopicSuffixes[(t / stems) % suffixes];
  if (t >= stems * suffixes) name += std::to_string(t / (stems * suffixes));
  return name;
}

std::string padded(const char* prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, n);
  return prefix + std::string(buf);
}

std::size_t pick(const std::vector<double>& cumulative, double u) {
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u * cumulative.back());
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

double exponential(CounterRng& rng, double mean) { return -mean * std::log1p(-rng.uniform()); }

std::int64_t to_count(double x) { return x <= 0.0 ? 0 : std::llround(x); }

// True final indicators for latent log10 views `u`.
Indicators true_indicators(double u, const SynthConfig& c, CounterRng& rng, double noise_sd) {
  Indicators out{};
  out[0] = to_count(std::pow(10.0, u));
  for (std::size_t i = 0; i < 4; ++i)
    out[i + 1] = to_count(std::pow(10.0, u + c.engagement_log_ratio[i] + noise_sd * rng.normal()));
  return out;
}

Indicators to_raw(const Indicators& truth, Platform p, double scale = 1.0) {
  Indicators raw{};
  for (std::size_t i = 0; i < kNumIndicators; ++i)
    raw[i] = to_count(scale * static_cast<double>(truth[i]) / kTrueAlpha[static_cast<std::size_t>(p)][i]);
  return raw;
}

}  // namespace

void SynthConfig::validate() const {
  if (target_samples == 0) throw ConfigError("synth: target_samples must be positive");
  if (min_samples_per_video < 1 || max_samples_per_video < min_samples_per_video)
    throw ConfigError("synth: samples per video range is invalid");
  if (n_topics == 0 || n_authors == 0) throw ConfigError("synth: topic and author counts must be positive");
  double sum = 0.0;
  for (double p : platform_proportions) {
    if (!(p >= 0.0)) throw ConfigError("synth: platform proportions must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("synth: platform proportions must sum to 1");
  if (post_end <= post_start) throw ConfigError("synth: empty posting window");
  for (double s : {topic_zipf, duration_mode_short, duration_mode_long, popularity_sd, tail_scale, growth_scale})
    if (!(s > 0.0)) throw ConfigError("synth: scales must be positive");
  for (double f : {duration_short_weight, tail_fraction, dead_fraction, tiny_fraction})
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("synth: fractions must lie in [0, 1]");
  if (dead_fraction + tiny_fraction > 1.0) throw ConfigError("synth: dead and tiny fractions exceed 1");
  if (!(noise_scale >= 0.0) || !(description_noise >= 0.0) || !(anchor_noise >= 0.0))
    throw ConfigError("synth: noise scales must be non-negative");
}

ScalingFactors SynthConfig::true_factors() const {
  ScalingFactors f;
  for (auto p : kAllPlatforms)
    for (auto ind : kAllIndicators)
      if (p != kCentralPlatform)
        f.set(p, ind, kTrueAlpha[static_cast<std::size_t>(p)][static_cast<std::size_t>(ind)]);
  return f;
}

double synth_growth(double days, const SynthConfig& c) {
  if (days <= 0.0) return 0.0;
  auto logistic = [&](double t) { return 1.0 / (1.0 + std::exp(-(t - c.growth_midpoint) / c.growth_scale)); };
  const double base = logistic(0.0);
  return std::min(1.0, (logistic(days) - base) / (logistic(14.0) - base));
}

nlohmann::ordered_json SynthResult::manifest() const {
  nlohmann::ordered_json videos = nlohmann::ordered_json::array();
  for (const auto& v : truth) {
    nlohmann::ordered_json fin;
    for (auto ind : kAllIndicators) fin[std::string(indicator_name(ind))] = v.true_final[static_cast<std::size_t>(ind)];
    videos.push_back({{"video_id", v.video_id},
                      {"platform", platform_name(v.platform)},
                      {"latent_log10_views", v.latent_log10_views},
                      {"true_final", fin}});
  }
  return {{"true_alpha", factors.to_json()},
          {"n_samples", corpus.size()},
          {"n_videos", truth.size()},
          {"n_anchor_samples", anchor.size()},
          {"videos", videos}};
}

SynthResult generate_corpus(const SynthConfig& c) {
  c.validate();
  const double ns = c.noise_scale;

  std::vector<double> topic_cdf, platform_cdf;
  double acc = 0.0;
  for (std::size_t t = 0; t < c.n_topics; ++t) topic_cdf.push_back(acc += 1.0 / std::pow(static_cast<double>(t + 1), c.topic_zipf));
  acc = 0.0;
  for (double p : c.platform_proportions) platform_cdf.push_back(acc += p);

  // Author quality drives both fans and popularity.
  std::vector<double> author_quality(c.n_authors);
  std::vector<std::int64_t> author_fans(c.n_authors);
  for (std::size_t a = 0; a < c.n_authors; ++a) {
    CounterRng rng({c.seed, kAuthorStream, a});
    author_quality[a] = rng.normal();
    author_fans[a] = to_count(std::pow(10.0, 3.3 + 0.6 * author_quality[a] + 0.3 * ns * rng.normal()));
  }
  const double author_weight = std::min(0.2, c.popularity_sd);
  const double own_sd = std::sqrt(c.popularity_sd * c.popularity_sd - author_weight * author_weight);

  SynthResult res;
  res.factors = c.true_factors();
  std::vector<SampleRecord> records;
  for (std::size_t v = 0; records.size() < c.target_samples; ++v) {
    CounterRng rng({c.seed, kVideoStream, v});
    SynthVideoTruth truth;
    truth.video_id = padded("v", v, 6);
    truth.platform = kAllPlatforms[pick(platform_cdf, rng.uniform())];
    const std::size_t topic = pick(topic_cdf, rng.uniform());
    const std::size_t author = rng.below(c.n_authors);

    double u = c.popularity_mean + author_weight * author_quality[author] + own_sd * (ns > 0 ? rng.normal() : 0.0);
    if (rng.uniform() < c.tail_fraction) u += exponential(rng, c.tail_scale);
    const double fate = rng.uniform();
    const bool dead = fate < c.dead_fraction;
    if (!dead && fate < c.dead_fraction + c.tiny_fraction) u = rng.uniform(0.3, 2.3);
    // Dead videos sit below every live one on the latent scale.
    if (dead) u = 0.0;
    truth.latent_log10_views = u;
    truth.true_final = dead ? Indicators{} : true_indicators(u, c, rng, 0.15 * ns);
    const Indicators raw_final = to_raw(truth.true_final, truth.platform);

    const std::int64_t post = c.post_start + static_cast<std::int64_t>(rng.below(
                                                 static_cast<std::uint64_t>(c.post_end - c.post_start)));
    const double mode = rng.uniform() < c.duration_short_weight ? c.duration_mode_short : c.duration_mode_long;
    // Log-mean shifted by sigma^2 so the density peaks at `mode`.
    constexpr double sigma = 0.3;
    const std::int64_t duration =
        std::clamp<std::int64_t>(std::llround(mode * std::exp(sigma * sigma + sigma * rng.normal())), 1, 300);
    const int bucket = static_cast<int>(std::clamp<long long>(std::llround(u + ns * c.description_noise * rng.normal()), 0, 9));

    const std::size_t span = c.max_samples_per_video - c.min_samples_per_video + 1;
    std::size_t n_samples = c.min_samples_per_video + rng.below(span);
    n_samples = std::min(n_samples, c.target_samples - records.size());

    double day = rng.uniform(0.2, 4.0);
    for (std::size_t s = 0; s < n_samples; ++s) {
      if (s > 0) day += 2.0 + rng.uniform(0.0, 3.0);
      CounterRng srng({c.seed, kSampleStream, v, s});
      SampleRecord r;
      r.video_id = truth.video_id;
      r.sample_id = truth.video_id + "-s" + std::to_string(s + 1);
      r.platform = truth.platform;
      r.topic = topic_name(topic);
      r.title = r.topic + " 第" + std::to_string(v) + "期 · 记录 #" + truth.video_id;
      r.description = "热度档位 " + std::to_string(bucket);
      r.post_time = post;
      r.sample_time = post + std::llround(day * static_cast<double>(kSecondsPerDay));
      r.duration_s = duration;
      r.author_id = padded("a", author, 4);
      r.fans = author_fans[author];
      const double g = synth_growth(day, c);
      for (std::size_t i = 0; i < kNumIndicators; ++i) {
        const std::int64_t val = to_count(g * static_cast<double>(raw_final[i]));
        switch (kAllIndicators[i]) {
          case Indicator::Views: r.views = val; break;
          case Indicator::Likes: r.likes = val; break;
          case Indicator::Shares: r.shares = val; break;
          case Indicator::Collects: r.collects = val; break;
          case Indicator::Comments: r.comments_count = val; break;
        }
      }
      std::int64_t captured = srng.uniform() < 0.03 ? 6 + static_cast<std::int64_t>(srng.below(75))
                                                    : static_cast<std::int64_t>(srng.below(6));
      captured = std::min(captured, r.comments_count);
      for (std::int64_t k = 0; k < captured; ++k) {
        const auto when = r.post_time + static_cast<std::int64_t>(srng.below(static_cast<std::uint64_t>(r.period()) + 1));
        r.comments.push_back({kCommentPool[srng.below(std::size(kCommentPool))], when});
      }
      std::stable_sort(r.comments.begin(), r.comments.end(), [](const Comment& a, const Comment& b) { return a.time < b.time; });
      r.video_ref = "synth://video/" + truth.video_id;
      r.final_indicators = raw_final;
      records.push_back(std::move(r));
    }
    res.truth.push_back(std::move(truth));
  }
  res.corpus = label_corpus(Corpus(std::move(records)), res.factors, LevelCriteria::defaults());

  std::vector<SampleRecord> anchor;
  for (std::size_t a = 0; a < c.anchor_contents; ++a) {
    CounterRng rng({c.seed, kAnchorStream, a});
    const double u = 5.0 + 0.6 * rng.normal();
    const Indicators truth = true_indicators(u, c, rng, 0.15);
    const std::int64_t post = c.post_start + static_cast<std::int64_t>(rng.below(
                                                 static_cast<std::uint64_t>(c.post_end - c.post_start)));
    std::vector<Platform> platforms{kCentralPlatform};
    for (auto p : kAllPlatforms)
      if (p != kCentralPlatform && rng.uniform() < 0.5) platforms.push_back(p);
    if (platforms.size() == 1) {
      Platform p = kAllPlatforms[rng.below(kNumPlatforms - 1)];
      if (p == kCentralPlatform) p = Platform::Bilibili;
      platforms.push_back(p);
    }
    for (auto p : platforms) {
      SampleRecord r;
      r.content_id = padded("content-", a, 4);
      r.video_id = *r.content_id + "-" + std::string(platform_name(p));
      r.sample_id = r.video_id + "-s1";
      r.platform = p;
      r.topic = topic_name(a % c.n_topics);
      r.title = "同款内容 #" + std::to_string(a);
      r.description = "跨平台样本";
      r.post_time = post;
      r.sample_time = post + 14 * kSecondsPerDay;
      r.author_id = padded("a", a % c.n_authors, 4);
      Indicators raw = to_raw(truth, p);
      if (p != kCentralPlatform)
        for (std::size_t i = 0; i < kNumIndicators; ++i)
          raw[i] = to_count(static_cast<double>(truth[i]) / kTrueAlpha[static_cast<std::size_t>(p)][i] *
                            std::exp(c.anchor_noise * rng.normal()));
      r.views = raw[0];
      r.likes = raw[1];
      r.shares = raw[2];
      r.collects = raw[3];
      r.comments_count = raw[4];
      r.final_indicators = raw;
      anchor.push_back(std::move(r));
    }
  }
  res.anchor = Corpus(std::move(anchor));
  return res;
}

}  // namespace vidprop
