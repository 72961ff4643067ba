#include "vidprop/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>

#include "vidprop/util.hpp"

namespace vidprop {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void PipelineConfig::set_seed(std::uint64_t seed) {
  synth.seed = seed;
  sampler.seed = seed;
  model.seed = seed;
  train.seed = seed;
  instruct.seed = seed;
  embed_seed = seed;
}

nlohmann::ordered_json PipelineConfig::to_json() const {
  return {{"synth",
           {{"target_samples", synth.target_samples},
            {"n_topics", synth.n_topics},
            {"n_authors", synth.n_authors},
            {"popularity_mean", synth.popularity_mean},
            {"popularity_sd", synth.popularity_sd},
            {"noise_scale", synth.noise_scale},
            {"anchor_contents", synth.anchor_contents},
            {"seed", synth.seed}}},
          {"sampler",
           {{"fanout", sampler.fanout}, {"depth", sampler.depth}, {"comment_cap", sampler.comment_cap}, {"seed", sampler.seed}}},
          {"model", {{"d_g", model.d_g}, {"layers", model.layers}, {"beta", model.beta}, {"seed", model.seed}}},
          {"optim", {{"lr", optim.lr}, {"beta1", optim.beta1}, {"beta2", optim.beta2}, {"eps", optim.eps}}},
          {"train",
           {{"epochs", train.epochs},
            {"batch_size", train.batch_size},
            {"eval_every", train.eval_every},
            {"seed", train.seed},
            {"eval_epoch", train.eval_epoch}}},
          {"instruct",
           {{"max_tokens", instruct.max_tokens}, {"comment_cap", instruct.comment_cap}, {"seed", instruct.seed}}},
          {"ablation", ablation.to_string()},
          {"data", {{"cutoff", format_date(cutoff)}, {"dedup_gap_days", dedup_gap_days}, {"strict", strict}}},
          {"embed", {{"seed", embed_seed}, {"text_sidecar", text_sidecar}, {"video_sidecar", video_sidecar}}},
          {"annotate", {{"criteria", criteria_path}}}};
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string raw, section;
  for (std::size_t lineno = 1; std::getline(in, raw); ++lineno) {
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) { throw ConfigError("config line " + std::to_string(lineno) + ": " + why); };
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) fail("empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) fail("missing key");
    if (!value.empty() && value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') fail("unterminated string");
      value = value.substr(1, value.size() - 2);
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (!out.emplace(full, value).second) fail("duplicate key '" + full + "'");
  }
  return out;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("config key '" + key + "': invalid number '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

}  // namespace

PipelineConfig apply_config(const std::map<std::string, std::string>& values, PipelineConfig c) {
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto size = [](std::size_t& dst) -> Setter { return [&dst](auto& k, auto& v) { dst = parse_number<std::size_t>(k, v); }; };
  auto u64 = [](std::uint64_t& dst) -> Setter { return [&dst](auto& k, auto& v) { dst = parse_number<std::uint64_t>(k, v); }; };
  auto real = [](double& dst) -> Setter { return [&dst](auto& k, auto& v) { dst = parse_number<double>(k, v); }; };
  auto str = [](std::string& dst) -> Setter { return [&dst](auto&, auto& v) { dst = v; }; };

  std::optional<std::uint64_t> master_seed;
  const std::map<std::string, Setter> setters = {
      {"seed", [&](auto& k, auto& v) { master_seed = parse_number<std::uint64_t>(k, v); }},
      {"synth.target_samples", size(c.synth.target_samples)},
      {"synth.min_samples_per_video", size(c.synth.min_samples_per_video)},
      {"synth.max_samples_per_video", size(c.synth.max_samples_per_video)},
      {"synth.n_topics", size(c.synth.n_topics)},
      {"synth.topic_zipf", real(c.synth.topic_zipf)},
      {"synth.n_authors", size(c.synth.n_authors)},
      {"synth.popularity_mean", real(c.synth.popularity_mean)},
      {"synth.popularity_sd", real(c.synth.popularity_sd)},
      {"synth.tail_fraction", real(c.synth.tail_fraction)},
      {"synth.noise_scale", real(c.synth.noise_scale)},
      {"synth.anchor_contents", size(c.synth.anchor_contents)},
      {"synth.anchor_noise", real(c.synth.anchor_noise)},
      {"synth.seed", u64(c.synth.seed)},
      {"sampler.fanout", size(c.sampler.fanout)},
      {"sampler.depth", size(c.sampler.depth)},
      {"sampler.comment_cap", size(c.sampler.comment_cap)},
      {"sampler.seed", u64(c.sampler.seed)},
      {"model.d_g", size(c.model.d_g)},
      {"model.layers", size(c.model.layers)},
      {"model.beta", real(c.model.beta)},
      {"model.seed", u64(c.model.seed)},
      {"optim.lr", real(c.optim.lr)},
      {"optim.beta1", real(c.optim.beta1)},
      {"optim.beta2", real(c.optim.beta2)},
      {"optim.eps", real(c.optim.eps)},
      {"train.epochs", size(c.train.epochs)},
      {"train.batch_size", size(c.train.batch_size)},
      {"train.eval_every", size(c.train.eval_every)},
      {"train.seed", u64(c.train.seed)},
      {"train.eval_epoch", u64(c.train.eval_epoch)},
      {"instruct.max_tokens", size(c.instruct.max_tokens)},
      {"instruct.comment_cap", size(c.instruct.comment_cap)},
      {"instruct.seed", u64(c.instruct.seed)},
      {"ablation.mask", [&](auto&, auto& v) { c.ablation = AblationMask::parse(v); }},
      {"data.cutoff",
       [&](auto& k, auto& v) {
         try {
           c.cutoff = parse_date(v);
         } catch (const Error&) {
           throw ConfigError("config key '" + k + "': invalid date '" + v + "'");
         }
       }},
      {"data.dedup_gap_days", [&](auto& k, auto& v) { c.dedup_gap_days = parse_number<int>(k, v); }},
      {"data.strict", [&](auto& k, auto& v) { c.strict = parse_bool(k, v); }},
      {"embed.seed", u64(c.embed_seed)},
      {"embed.text_sidecar", str(c.text_sidecar)},
      {"embed.video_sidecar", str(c.video_sidecar)},
      {"annotate.criteria", str(c.criteria_path)},
  };
  // The master seed goes first so specific seeds can override it.
  if (auto it = values.find("seed"); it != values.end()) {
    setters.at("seed")(it->first, it->second);
    c.set_seed(*master_seed);
  }
  for (const auto& [key, value] : values) {
    if (key == "seed") continue;
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(key, value);
  }
  c.sampler.validate();
  c.model.validate();
  if (c.sampler.depth != c.model.layers) throw ConfigError("sampler.depth must equal model.layers");
  if (c.train.batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (c.train.eval_every == 0) throw ConfigError("train.eval_every must be >= 1");
  if (c.instruct.max_tokens == 0) throw ConfigError("instruct.max_tokens must be >= 1");
  if (!(c.optim.lr > 0.0) || !(c.optim.eps > 0.0) || !(c.optim.beta1 >= 0.0 && c.optim.beta1 < 1.0) ||
      !(c.optim.beta2 >= 0.0 && c.optim.beta2 < 1.0))
    throw ConfigError("invalid optimizer settings");
  if (c.dedup_gap_days < 0) throw ConfigError("data.dedup_gap_days must be >= 0");
  c.synth.validate();
  return c;
}

PipelineConfig load_config(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("config file '" + path + "' not found");
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return apply_config(parse_config_text(text));
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

int round_level(double yhat) { return static_cast<int>(std::round(yhat)); }

Metrics evaluate(std::span<const Prediction> predictions) {
  if (predictions.empty()) throw DataError("evaluate: empty prediction set");
  Metrics m;
  std::size_t hits = 0;
  double se = 0.0, ae = 0.0;
  for (const auto& p : predictions) {
    if (!std::isfinite(p.yhat) || p.yhat < 0.0 || p.yhat > 9.0) throw DataError("evaluate: prediction outside [0, 9]");
    if (p.y < 0 || p.y > 9) throw DataError("evaluate: label outside 0..9");
    const double d = static_cast<double>(p.y) - p.yhat;
    hits += round_level(p.yhat) == p.y ? 1 : 0;
    se += d * d;
    ae += std::abs(d);
  }
  const double n = static_cast<double>(predictions.size());
  m.n = predictions.size();
  m.acc = static_cast<double>(hits) / n;
  m.mse = se / n;
  m.mae = ae / n;
  return m;
}

PeriodBucket period_bucket(std::int64_t period_seconds) {
  if (period_seconds <= 3 * kSecondsPerDay) return PeriodBucket::UpTo3Days;
  if (period_seconds <= 7 * kSecondsPerDay) return PeriodBucket::UpTo7Days;
  return PeriodBucket::Over7Days;
}

std::string_view period_bucket_name(PeriodBucket b) {
  switch (b) {
    case PeriodBucket::UpTo3Days: return "le3d";
    case PeriodBucket::UpTo7Days: return "3to7d";
    case PeriodBucket::Over7Days: return "gt7d";
  }
  return "?";
}

namespace {
template <typename KeyFn>
std::map<std::string, Metrics> slice(std::span<const Prediction> predictions, KeyFn key) {
  std::map<std::string, std::vector<Prediction>> groups;
  for (const auto& p : predictions) groups[key(p)].push_back(p);
  std::map<std::string, Metrics> out;
  for (const auto& [k, ps] : groups) out[k] = evaluate(ps);
  return out;
}
}  // namespace

std::map<std::string, Metrics> period_breakdown(std::span<const Prediction> predictions) {
  return slice(predictions, [](const Prediction& p) { return std::string(period_bucket_name(period_bucket(p.period))); });
}

EvalResult evaluate_slices(std::span<const Prediction> predictions) {
  EvalResult r;
  r.overall = evaluate(predictions);
  r.by_platform = slice(predictions, [](const Prediction& p) { return std::string(platform_name(p.platform)); });
  r.by_period = period_breakdown(predictions);
  return r;
}

Baselines constant_baselines(std::span<const int> train_labels, std::span<const Prediction> test) {
  if (train_labels.empty()) throw DataError("baselines: no training labels");
  Baselines b;
  std::vector<int> sorted(train_labels.begin(), train_labels.end());
  std::sort(sorted.begin(), sorted.end());
  b.median_label = sorted[(sorted.size() - 1) / 2];
  std::array<std::size_t, 10> counts{};
  for (int y : train_labels) {
    if (y < 0 || y > 9) throw DataError("baselines: label outside 0..9");
    ++counts[static_cast<std::size_t>(y)];
  }
  b.majority_label = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  auto constant = [&](int c) {
    std::vector<Prediction> ps(test.begin(), test.end());
    for (auto& p : ps) p.yhat = c;
    return evaluate(ps);
  };
  b.median = constant(b.median_label);
  b.majority = constant(b.majority_label);
  return b;
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

nlohmann::ordered_json metrics_json(const Metrics& m) {
  return {{"n", m.n}, {"acc", m.acc}, {"mse", m.mse}, {"mae", m.mae}};
}

void emit_report(const EvalResult& result, std::span<const Prediction> predictions, const std::string& dir,
                 const nlohmann::ordered_json& extra) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json report;
  report["overall"] = metrics_json(result.overall);
  if (!result.by_platform.empty()) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, m] : result.by_platform) j[k] = metrics_json(m);
    report["by_platform"] = j;
  }
  if (!result.by_period.empty()) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, m] : result.by_period) j[k] = metrics_json(m);
    report["by_period"] = j;
  }
  for (const auto& [k, v] : extra.items()) report[k] = v;
  write_file(dir + "/report.json", report.dump(2) + "\n");

  auto row = [](const std::string& s, const std::string& k, const Metrics& m) {
    return s + "," + k + "," + std::to_string(m.n) + "," + fmt_real(m.acc) + "," + fmt_real(m.mse) + "," +
           fmt_real(m.mae) + "\n";
  };
  std::string metrics = "slice,key,n,acc,mse,mae\n" + row("overall", "all", result.overall);
  for (const auto& [k, m] : result.by_platform) metrics += row("platform", k, m);
  for (const auto& [k, m] : result.by_period) metrics += row("period", k, m);
  write_file(dir + "/metrics.csv", metrics);

  std::string periods = "bucket,n,acc,mse,mae\n";
  for (std::size_t b = 0; b < kNumPeriodBuckets; ++b) {
    const std::string name(period_bucket_name(static_cast<PeriodBucket>(b)));
    if (auto it = result.by_period.find(name); it != result.by_period.end())
      periods += name + "," + std::to_string(it->second.n) + "," + fmt_real(it->second.acc) + "," +
                 fmt_real(it->second.mse) + "," + fmt_real(it->second.mae) + "\n";
  }
  write_file(dir + "/period_breakdown.csv", periods);

  std::string errors = "sample_id,bucket,y,yhat,abs_error\n";
  for (const auto& p : predictions)
    errors += p.sample_id + "," + std::string(period_bucket_name(period_bucket(p.period))) + "," + std::to_string(p.y) +
              "," + fmt_real(p.yhat) + "," + fmt_real(std::abs(p.yhat - p.y)) + "\n";
  write_file(dir + "/period_errors.csv", errors);
}

// ---------------------------------------------------------------------------
// Training and inference
// ---------------------------------------------------------------------------

namespace {

struct Batch {
  Subgraph sg;
  RawFeatures features;
  PropagationPlan plan;
};

Batch prepare(const Stage1Context& ctx, std::span<const NodeId> nodes, std::uint64_t epoch, unsigned threads) {
  Batch b;
  b.sg = sample_subgraph(*ctx.view, nodes, ctx.sampler, epoch);
  ctx.features->ensure(b.sg.nodes, threads);
  b.features = gather_features(b.sg, [&](NodeId id) -> const Eigen::VectorXd& { return ctx.features->get(id); });
  b.plan = make_plan(b.sg);
  return b;
}

}  // namespace

TrainResult train_stage1(const Stage1Context& ctx, std::span<const NodeId> train_nodes, ModelParams params,
                         const TrainConfig& train, const AdamConfig& optim) {
  if (!ctx.view || !ctx.features) throw ConfigError("train_stage1: missing graph view or feature store");
  const PropagationGraph& g = ctx.view->graph();
  for (auto id : train_nodes) {
    if (g.node(id).kind != NodeKind::Video) throw DataError("training node " + std::to_string(id) + " is not a video");
    if (!g.label(id)) throw DataError("training node " + std::to_string(id) + " is unlabeled");
  }
  TrainResult res;
  OptimizerState opt = OptimizerState::init(params, optim);
  BatchIterator batches(std::vector<NodeId>(train_nodes.begin(), train_nodes.end()), train.batch_size, train.seed);
  std::map<Platform, std::vector<Prediction>> window;

  auto flush = [&](std::uint64_t step, std::size_t epoch) {
    nlohmann::ordered_json row{{"step", step}, {"epoch", epoch}, {"kind", "convergence"}};
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (auto& [p, ps] : window) {
      if (ps.empty()) continue;
      const Metrics m = evaluate(ps);
      res.convergence.push_back({step, p, m});
      per[std::string(platform_name(p))] = {{"acc", m.acc}, {"mse", m.mse}, {"n", m.n}};
      ps.clear();
    }
    if (!per.empty()) {
      row["platforms"] = per;
      res.log.push_back(std::move(row));
    }
  };

  for (std::size_t epoch = 0; epoch < train.epochs && !train_nodes.empty(); ++epoch) {
    double epoch_loss = 0.0;
    std::size_t epoch_n = 0;
    for (const auto& nodes : batches.epoch(epoch)) {
      Batch b = prepare(ctx, nodes, epoch, train.threads);
      const auto labels = batch_labels(b.sg);
      const ForwardState st = propagate(params, b.plan, project(params, b.sg.size(), b.features));
      const LossResult loss = batch_loss(params, b.sg, st, labels, ctx.beta);
      if (!std::isfinite(loss.loss))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(res.steps));
      const GradientBuffers grads = backward(params, b.sg, b.features, b.plan, st, labels, ctx.beta);
      step(params, grads, opt);
      if (!params.all_finite())
        throw NumericError("non-finite parameters after step " + std::to_string(res.steps + 1));
      ++res.steps;
      epoch_loss += loss.loss * static_cast<double>(nodes.size());
      epoch_n += nodes.size();
      res.log.push_back({{"step", res.steps}, {"epoch", epoch}, {"loss", loss.loss}, {"batch_size", nodes.size()}});
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const NodeId id = b.sg.nodes[b.sg.batch[i]];
        Prediction p;
        p.yhat = loss.predictions[i];
        p.y = static_cast<int>(labels[i]);
        p.platform = g.corpus()[g.node(id).ref].platform;
        window[p.platform].push_back(p);
      }
      if (res.steps % train.eval_every == 0) flush(res.steps, epoch);
    }
    res.last_epoch_loss = epoch_n ? epoch_loss / static_cast<double>(epoch_n) : 0.0;
  }
  if (res.steps % train.eval_every != 0) flush(res.steps, train.epochs ? train.epochs - 1 : 0);
  res.params = std::move(params);
  return res;
}

Eigen::MatrixXd embed_nodes(const Stage1Context& ctx, const ModelParams& params, std::span<const NodeId> nodes,
                            std::size_t batch_size, std::uint64_t eval_epoch) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return nodes[a] < nodes[b]; });
  Eigen::MatrixXd out(static_cast<Eigen::Index>(params.d_g()), static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::vector<NodeId> chunk;
    for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) chunk.push_back(nodes[order[i]]);
    Batch b = prepare(ctx, chunk, eval_epoch, 1);
    const ForwardState st = propagate(params, b.plan, project(params, b.sg.size(), b.features));
    for (std::size_t i = 0; i < chunk.size(); ++i)
      out.col(static_cast<Eigen::Index>(order[start + i])) = st.output().col(b.sg.batch[i]);
  }
  return out;
}

std::vector<double> predict(const Stage1Context& ctx, const ModelParams& params, std::span<const NodeId> nodes,
                            std::size_t batch_size, std::uint64_t eval_epoch) {
  const Eigen::MatrixXd f = embed_nodes(ctx, params, nodes, batch_size, eval_epoch);
  std::vector<double> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = head_predict(f.col(static_cast<Eigen::Index>(i)), params);
  return out;
}

std::vector<Prediction> make_predictions(const PropagationGraph& graph, std::span<const NodeId> nodes,
                                         std::span<const double> yhat) {
  if (nodes.size() != yhat.size()) throw DataError("prediction count differs from node count");
  std::vector<Prediction> out;
  out.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& r = graph.corpus()[graph.node(nodes[i]).ref];
    if (!r.influence_level) throw DataError("sample '" + r.sample_id + "' has no influence level");
    out.push_back({yhat[i], *r.influence_level, r.platform, r.period(), r.sample_id});
  }
  return out;
}

std::string convergence_csv(std::span<const ConvergencePoint> points, Platform platform) {
  std::string out = "step,acc,mse,n\n";
  for (const auto& p : points)
    if (p.platform == platform)
      out += std::to_string(p.step) + "," + fmt_real(p.metrics.acc) + "," + fmt_real(p.metrics.mse) + "," +
             std::to_string(p.metrics.n) + "\n";
  return out;
}

}  // namespace vidprop
