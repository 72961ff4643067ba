#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "vidprop/propgraph.hpp"
#include "vidprop/util.hpp"

namespace vidprop {

inline constexpr std::size_t kTextDim = 1024;
inline constexpr std::size_t kVideoDim = 3584;
inline constexpr std::size_t kTimeDim = 512;
inline constexpr std::size_t kCommentDim = kTextDim + kTimeDim;

/// Raw feature width of each node kind.
std::size_t raw_dim(NodeKind k);

/// Source of pretrained text and video embeddings. Implementations must be
/// deterministic and safe to call concurrently.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// kTextDim values.
  virtual Eigen::VectorXd text_embed(std::string_view text) const = 0;
  /// kVideoDim values.
  virtual Eigen::VectorXd video_embed(std::string_view video_ref) const = 0;
};

/// Hash-seeded unit vectors. Equal inputs give equal vectors; there is no
/// similarity structure between different inputs.
class StubProvider final : public EmbeddingProvider {
 public:
  explicit StubProvider(std::uint64_t seed) : seed_(seed) {}
  Eigen::VectorXd text_embed(std::string_view text) const override;
  Eigen::VectorXd video_embed(std::string_view video_ref) const override;

 private:
  Eigen::VectorXd expand(char tag, std::string_view input, std::size_t dim) const;
  std::uint64_t seed_;
};

std::unique_ptr<EmbeddingProvider> stub_provider(std::uint64_t seed);

/// Binary table of (32-byte key, u32 dim, float32[dim]) entries keyed by the
/// SHA-256 of the embedded content. Layout in docs/sidecar_format.md.
class Sidecar {
 public:
  void add(const Digest& key, std::span<const float> values);
  void add(const Digest& key, const Eigen::VectorXd& values);
  const std::vector<float>* find(const Digest& key) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<Digest, std::vector<float>>& entries() const { return entries_; }

  std::string serialize() const;
  static Sidecar deserialize(std::string_view bytes);
  void save(const std::string& path) const;
  static Sidecar load(const std::string& path);

 private:
  std::map<Digest, std::vector<float>> entries_;
};

/// Serves embeddings precomputed offline, looked up by SHA-256 of the exact
/// text or video reference. Missing keys raise DataError.
class SidecarProvider final : public EmbeddingProvider {
 public:
  SidecarProvider(Sidecar text, Sidecar video) : text_(std::move(text)), video_(std::move(video)) {}
  Eigen::VectorXd text_embed(std::string_view text) const override;
  Eigen::VectorXd video_embed(std::string_view video_ref) const override;

 private:
  Sidecar text_;
  Sidecar video_;
};

/// Sinusoidal encoding of a raw timestamp (seconds):
/// f[2i] = sin(t / 10000^(2i/512)), f[2i+1] = cos(t / 10000^(2i/512)).
Eigen::VectorXd encode_time(std::int64_t t);
/// log(v + 1) as a 1-vector. Throws DataError on negative input.
Eigen::VectorXd encode_scalar(std::int64_t v);
/// text embedding followed by the time encoding.
Eigen::VectorXd encode_comment(std::string_view text, std::int64_t t, const EmbeddingProvider& provider);

struct RawFeature {
  NodeKind kind = NodeKind::Video;
  Eigen::VectorXd values;
};

/// Raw feature of one graph node. With mask.zero_video_features, or when the
/// sample has no video_ref, video nodes get the zero vector.
RawFeature encode_node(const PropagationGraph& graph, NodeId node, const EmbeddingProvider& provider,
                       const AblationMask& mask = {});

/// Lazily computed, cached raw features for the nodes of one graph.
class FeatureStore {
 public:
  FeatureStore(const PropagationGraph& graph, const EmbeddingProvider& provider, AblationMask mask = {});

  /// Computes every missing feature among `nodes` (in parallel when threads > 1).
  void ensure(std::span<const NodeId> nodes, unsigned threads = 1);
  /// Feature of a node that was previously ensured.
  const Eigen::VectorXd& get(NodeId node) const;
  /// Number of video nodes encoded as zero because their sample has no video_ref.
  std::size_t missing_video_refs() const { return missing_video_refs_.load(); }

 private:
  const PropagationGraph* graph_;
  const EmbeddingProvider* provider_;
  AblationMask mask_;
  std::vector<Eigen::VectorXd> cache_;
  std::vector<std::uint8_t> ready_;
  std::atomic<std::size_t> missing_video_refs_{0};
};

}  // namespace vidprop
