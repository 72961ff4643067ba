#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidprop/propgraph.hpp"

namespace vidprop {

struct SamplerConfig {
  /// Per (node, relation) cap on sampled in-neighbors; all are kept below it.
  std::size_t fanout = 50;
  /// Expansion depth; matches the number of message-passing layers.
  std::size_t depth = 2;
  /// Additional cap on comment in-neighbors.
  std::size_t comment_cap = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SubgraphEdge {
  std::uint32_t src = 0;  // local index of the head
  std::uint32_t dst = 0;  // local index of the tail
  friend bool operator==(const SubgraphEdge&, const SubgraphEdge&) = default;
};

/// Sampled neighborhood of a batch of video nodes. Nodes are kept in ascending
/// global id order; local indices refer to positions in `nodes`.
struct Subgraph {
  std::vector<NodeId> nodes;
  std::vector<NodeKind> kinds;
  /// Per relation, edges sorted by (dst, src).
  std::array<std::vector<SubgraphEdge>, kNumRelations> edges;
  /// Local indices of the batch nodes, in batch order.
  std::vector<std::uint32_t> batch;
  std::vector<std::optional<int>> labels;

  std::size_t size() const { return nodes.size(); }
  std::optional<std::uint32_t> local(NodeId id) const;
  std::size_t num_edges() const;
  nlohmann::ordered_json to_json() const;
  friend bool operator==(const Subgraph&, const Subgraph&) = default;
};

/// Breadth-wise expansion around `batch` to `config.depth` hops. Per node and
/// relation, at most `fanout` in-neighbors are drawn uniformly without
/// replacement (comments additionally capped by `comment_cap`); video-video
/// in-neighbors must be strictly earlier (post time for same-author and
/// same-topic, sample time for history). Randomness is keyed by
/// (seed, epoch, node, relation).
Subgraph sample_subgraph(const GraphView& view, std::span<const NodeId> batch, const SamplerConfig& config,
                         std::uint64_t epoch = 0);

/// Seeded per-epoch shuffles of a fixed item set, cut into batches.
class BatchIterator {
 public:
  BatchIterator(std::vector<NodeId> items, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::vector<NodeId>> epoch(std::uint64_t e) const;
  std::size_t batches_per_epoch() const;
  const std::vector<NodeId>& items() const { return items_; }

 private:
  std::vector<NodeId> items_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

/// Video nodes of the given sample ids (unknown ids raise DataError).
std::vector<NodeId> video_nodes(const PropagationGraph& graph, std::span<const std::string> sample_ids);

}  // namespace vidprop
