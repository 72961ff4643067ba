#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidprop/encode.hpp"
#include "vidprop/propgraph.hpp"
#include "vidprop/rgcn.hpp"
#include "vidprop/sampler.hpp"
#include "vidprop/synth.hpp"

namespace vidprop {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  /// Steps between per-platform convergence rows.
  std::size_t eval_every = 200;
  /// Shuffle seed.
  std::uint64_t seed = 0;
  /// Sampling epoch used for every inference pass.
  std::uint64_t eval_epoch = 1000003;
  unsigned threads = 1;
};

struct InstructConfig {
  std::size_t max_tokens = 4000;
  std::size_t comment_cap = 50;
  std::uint64_t seed = 0;
};

struct PipelineConfig {
  SynthConfig synth;
  SamplerConfig sampler;
  RgcnConfig model;
  AdamConfig optim;
  TrainConfig train;
  InstructConfig instruct;
  AblationMask ablation;
  CivilDate cutoff{2024, 12, 20};
  int dedup_gap_days = 2;
  bool strict = false;
  std::uint64_t embed_seed = 0;
  std::string text_sidecar;
  std::string video_sidecar;
  std::string criteria_path;

  /// Sets every seed field at once.
  void set_seed(std::uint64_t seed);
  nlohmann::ordered_json to_json() const;
};

/// Flat "section.key" -> raw value map from a TOML-style file: `[section]`
/// headers, `key = value` lines, `#` comments, quoted strings, numbers and
/// booleans. Throws ConfigError with the line number.
std::map<std::string, std::string> parse_config_text(const std::string& text);
/// Applies parsed keys over `base`; unknown keys raise ConfigError.
PipelineConfig apply_config(const std::map<std::string, std::string>& values, PipelineConfig base = {});
PipelineConfig load_config(const std::string& path);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct Metrics {
  double acc = 0.0;
  double mse = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
};

struct Prediction {
  double yhat = 0.0;
  int y = 0;
  Platform platform = Platform::Douyin;
  /// sample_time - post_time, seconds.
  std::int64_t period = 0;
  std::string sample_id;
};

/// Round half away from zero.
int round_level(double yhat);

/// ACC = P(y == round(yhat)), MSE, MAE. Throws DataError on an empty set or
/// on yhat outside [0, 9] / y outside {0..9}.
Metrics evaluate(std::span<const Prediction> predictions);

enum class PeriodBucket { UpTo3Days = 0, UpTo7Days = 1, Over7Days = 2 };
inline constexpr std::size_t kNumPeriodBuckets = 3;
PeriodBucket period_bucket(std::int64_t period_seconds);
std::string_view period_bucket_name(PeriodBucket b);

struct EvalResult {
  Metrics overall;
  std::map<std::string, Metrics> by_platform;
  std::map<std::string, Metrics> by_period;
};

/// Metrics of each non-empty period bucket.
std::map<std::string, Metrics> period_breakdown(std::span<const Prediction> predictions);
EvalResult evaluate_slices(std::span<const Prediction> predictions);

struct Baselines {
  int median_label = 0;
  int majority_label = 0;
  Metrics median;    // constant prediction of the training median
  Metrics majority;  // constant prediction of the most frequent training label
};
/// Constant predictors fitted on `train_labels`, scored on `test`.
Baselines constant_baselines(std::span<const int> train_labels, std::span<const Prediction> test);

nlohmann::ordered_json metrics_json(const Metrics& m);

/// Writes report.json, metrics.csv, period_breakdown.csv and period_errors.csv.
/// `extra` is merged into report.json.
void emit_report(const EvalResult& result, std::span<const Prediction> predictions, const std::string& dir,
                 const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());

// ---------------------------------------------------------------------------
// Training and inference
// ---------------------------------------------------------------------------

struct ConvergencePoint {
  std::uint64_t step = 0;
  Platform platform = Platform::Douyin;
  Metrics metrics;
};

struct TrainResult {
  ModelParams params;
  std::vector<nlohmann::ordered_json> log;
  /// Training-batch metrics per platform, every eval_every steps.
  std::vector<ConvergencePoint> convergence;
  std::uint64_t steps = 0;
  double last_epoch_loss = 0.0;
};

/// Shared inputs of training and inference.
struct Stage1Context {
  const GraphView* view = nullptr;
  FeatureStore* features = nullptr;
  SamplerConfig sampler;
  double beta = 1.0;
};

/// Mini-batch training over `train_nodes` (labeled video nodes).
TrainResult train_stage1(const Stage1Context& ctx, std::span<const NodeId> train_nodes, ModelParams params,
                         const TrainConfig& train, const AdamConfig& optim);

/// Final states f' of `nodes` (d_g x nodes.size()), computed in fixed batches
/// of ascending node ids with sampling epoch `eval_epoch`.
Eigen::MatrixXd embed_nodes(const Stage1Context& ctx, const ModelParams& params, std::span<const NodeId> nodes,
                            std::size_t batch_size, std::uint64_t eval_epoch);
std::vector<double> predict(const Stage1Context& ctx, const ModelParams& params, std::span<const NodeId> nodes,
                            std::size_t batch_size, std::uint64_t eval_epoch);

/// Prediction records for the given samples (they must be labeled).
std::vector<Prediction> make_predictions(const PropagationGraph& graph, std::span<const NodeId> nodes,
                                         std::span<const double> yhat);

/// Per-platform convergence CSV ("step,acc,mse,n").
std::string convergence_csv(std::span<const ConvergencePoint> points, Platform platform);

/// Format used for every real number in CSV outputs.
std::string fmt_real(double v);

}  // namespace vidprop
