#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vidprop/propgraph.hpp"
#include "vidprop/sampler.hpp"

namespace vidprop {

struct RgcnConfig {
  std::size_t d_g = 1024;
  std::size_t layers = 2;
  /// Smooth L1 transition point.
  double beta = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// All trainable tensors, stored in a flat list so gradients, optimizer
/// moments and serialization can treat them uniformly. Layout:
/// proj_w[15] (d_g x raw), proj_b[15] (d_g x 1), then per layer rel_w[17]
/// (d_g x d_g) and self_w (d_g x d_g), then head_w (1 x d_g), head_b (1 x 1).
class ModelParams {
 public:
  ModelParams() = default;
  /// Zero tensors of the right shapes.
  static ModelParams zeros(std::size_t d_g, std::size_t layers);
  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)); biases zero.
  static ModelParams init(const RgcnConfig& config);

  std::size_t d_g() const { return d_g_; }
  std::size_t layers() const { return layers_; }
  std::size_t num_tensors() const { return tensors_.size(); }
  std::size_t num_scalars() const;

  Eigen::MatrixXd& tensor(std::size_t i) { return tensors_.at(i); }
  const Eigen::MatrixXd& tensor(std::size_t i) const { return tensors_.at(i); }
  std::string tensor_name(std::size_t i) const;

  Eigen::MatrixXd& proj_w(NodeKind k) { return tensors_[static_cast<std::size_t>(k)]; }
  const Eigen::MatrixXd& proj_w(NodeKind k) const { return tensors_[static_cast<std::size_t>(k)]; }
  Eigen::MatrixXd& proj_b(NodeKind k) { return tensors_[kNumNodeKinds + static_cast<std::size_t>(k)]; }
  const Eigen::MatrixXd& proj_b(NodeKind k) const { return tensors_[kNumNodeKinds + static_cast<std::size_t>(k)]; }
  Eigen::MatrixXd& rel_w(std::size_t layer, Relation r) { return tensors_[rel_index(layer, r)]; }
  const Eigen::MatrixXd& rel_w(std::size_t layer, Relation r) const { return tensors_[rel_index(layer, r)]; }
  Eigen::MatrixXd& self_w(std::size_t layer) { return tensors_[rel_index(layer, Relation{}) + kNumRelations]; }
  const Eigen::MatrixXd& self_w(std::size_t layer) const { return tensors_[rel_index(layer, Relation{}) + kNumRelations]; }
  Eigen::MatrixXd& head_w() { return tensors_[tensors_.size() - 2]; }
  const Eigen::MatrixXd& head_w() const { return tensors_[tensors_.size() - 2]; }
  double& head_b() { return tensors_.back()(0, 0); }
  double head_b() const { return tensors_.back()(0, 0); }

  void set_zero();
  bool all_finite() const;
  /// Throws DataError unless d_g and layers match.
  void check_shape(std::size_t d_g, std::size_t layers) const;

  friend bool operator==(const ModelParams& a, const ModelParams& b);

 private:
  static std::size_t rel_index(std::size_t layer, Relation r) {
    return 2 * kNumNodeKinds + layer * (kNumRelations + 1) + static_cast<std::size_t>(r);
  }
  std::size_t d_g_ = 0;
  std::size_t layers_ = 0;
  std::vector<Eigen::MatrixXd> tensors_;
};

using GradientBuffers = ModelParams;

/// Raw features of a subgraph grouped by node kind: for kind k, column c of
/// `values[k]` is the feature of local node `nodes[k][c]`.
struct RawFeatures {
  std::array<std::vector<std::uint32_t>, kNumNodeKinds> nodes;
  std::array<Eigen::MatrixXd, kNumNodeKinds> values;
};

using FeatureLookup = std::function<const Eigen::VectorXd&(NodeId)>;
/// Collects raw features for every subgraph node; checks kind dimensions.
RawFeatures gather_features(const Subgraph& sg, const FeatureLookup& lookup);

/// Per-relation mean-aggregation structure of a subgraph.
struct RelationPlan {
  std::vector<std::uint32_t> targets;   // distinct destinations, ascending
  std::vector<std::uint32_t> offsets;   // targets.size() + 1
  std::vector<std::uint32_t> sources;   // sorted within each target
};
using PropagationPlan = std::array<RelationPlan, kNumRelations>;
PropagationPlan make_plan(const Subgraph& sg);

struct ForwardState {
  /// h[0] is the projected input; h[l + 1] the output of layer l (d_g x n).
  std::vector<Eigen::MatrixXd> h;
  /// Pre-activation of each layer.
  std::vector<Eigen::MatrixXd> pre;
  const Eigen::MatrixXd& output() const { return h.back(); }
};

/// h0 = W_k f + b_k per node.
Eigen::MatrixXd project(const ModelParams& params, std::size_t num_nodes, const RawFeatures& features);
/// h^{l+1}_i = relu(sum_r mean_{j in N_i^r} W_r^l h^l_j + W_0^l h^l_i).
ForwardState propagate(const ModelParams& params, const PropagationPlan& plan, Eigen::MatrixXd h0);
ForwardState forward(const ModelParams& params, const Subgraph& sg, const RawFeatures& features);

/// 9 * sigmoid(w . f + b).
double head_predict(const Eigen::Ref<const Eigen::VectorXd>& fprime, const ModelParams& params);
double smooth_l1(double yhat, double y, double beta = 1.0);
/// d smooth_l1 / d yhat.
double smooth_l1_grad(double yhat, double y, double beta = 1.0);

struct LossResult {
  double loss = 0.0;                 // mean over the batch
  std::vector<double> predictions;   // per batch node
};

/// Labels of the batch nodes as reals; throws DataError when one is missing.
std::vector<double> batch_labels(const Subgraph& sg);

/// Mean Smooth L1 loss over the batch nodes given their final states.
LossResult batch_loss(const ModelParams& params, const Subgraph& sg, const ForwardState& state,
                      std::span<const double> labels, double beta = 1.0);

/// Exact gradient of the mean batch loss with respect to every tensor.
GradientBuffers backward(const ModelParams& params, const Subgraph& sg, const RawFeatures& features,
                         const PropagationPlan& plan, const ForwardState& state, std::span<const double> labels,
                         double beta = 1.0);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::uint64_t t = 0;
  ModelParams m;
  ModelParams v;
  static OptimizerState init(const ModelParams& params, AdamConfig config = {});
};

/// One bias-corrected adaptive-moment update.
void step(ModelParams& params, const GradientBuffers& grads, OptimizerState& state);

/// Versioned little-endian binary; layout in docs/params_format.md.
std::string serialize_params(const ModelParams& params);
ModelParams deserialize_params(std::string_view bytes);
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

}  // namespace vidprop
