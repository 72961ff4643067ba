#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidprop/records.hpp"

namespace vidprop {

enum class NodeKind : std::uint8_t {
  Video = 0,
  Platform,
  Topic,
  Title,
  Description,
  Time,
  CTime,
  VideoTime,
  Comment,
  Likes,
  Collects,
  Views,
  Shares,
  Comments,
  Fans,
};
inline constexpr std::size_t kNumNodeKinds = 15;

enum class Relation : std::uint8_t {
  IsPlatformOf = 0,
  IsTopicOf,
  IsTitleOf,
  IsDescriptionOf,
  IsPostTimeOf,
  IsCurrentTimeOf,
  IsDurationTimeOf,
  IsCommentOf,
  IsLikesOf,
  IsCollectsOf,
  IsViewsOf,
  IsSharesOf,
  IsCommentsOf,
  IsFansOf,
  HasSameAuthorAs,
  HasSameTopicAs,
  IsHistoryOf,
};
inline constexpr std::size_t kNumRelations = 17;

std::string_view node_kind_name(NodeKind k);
std::string_view relation_name(Relation r);
std::optional<Relation> parse_relation(std::string_view name);

struct RelationSignature {
  NodeKind head;
  NodeKind tail;
};
RelationSignature relation_signature(Relation r);

/// Relations whose head is another video node.
constexpr bool is_video_video(Relation r) {
  return r == Relation::HasSameAuthorAs || r == Relation::HasSameTopicAs || r == Relation::IsHistoryOf;
}
/// Edges from the interactive-information nodes (ctime, fans and the counters).
constexpr bool is_interactive(Relation r) {
  switch (r) {
    case Relation::IsCurrentTimeOf:
    case Relation::IsFansOf:
    case Relation::IsLikesOf:
    case Relation::IsCommentsOf:
    case Relation::IsSharesOf:
    case Relation::IsViewsOf:
    case Relation::IsCollectsOf: return true;
    default: return false;
  }
}

using NodeId = std::uint32_t;

struct Node {
  NodeKind kind = NodeKind::Video;
  /// Comment position within the owning record; platform enum value for platform nodes.
  std::uint32_t aux = 0;
  /// Owning record index, or topic index for topic nodes, or 0 for platform nodes.
  std::uint64_t ref = 0;
  friend bool operator==(const Node&, const Node&) = default;
};

struct AblationMask {
  bool zero_video_features = false;
  bool drop_video_video_edges = false;
  bool drop_interactive_edges = false;
  bool drop_comment_edges = false;

  bool enabled(Relation r) const {
    if (drop_video_video_edges && is_video_video(r)) return false;
    if (drop_interactive_edges && is_interactive(r)) return false;
    if (drop_comment_edges && r == Relation::IsCommentOf) return false;
    return true;
  }
  bool identity() const {
    return !zero_video_features && !drop_video_video_edges && !drop_interactive_edges && !drop_comment_edges;
  }
  /// Parses a comma-separated list of v, vv, iv, cv (empty or "none" = identity).
  static AblationMask parse(std::string_view text);
  std::string to_string() const;
};

using EdgeCounts = std::array<std::uint64_t, kNumRelations>;
nlohmann::ordered_json edge_counts_json(const EdgeCounts& counts);

/// Typed-node, typed-edge store of the propagation graph. Explicit relations
/// are stored as in-adjacency CSR blocks; has_same_topic_as is answered from
/// per-topic time-sorted video lists and never materialized. Immutable after
/// construction.
class PropagationGraph {
 public:
  struct Csr {
    std::vector<std::uint64_t> offsets;  // size num_nodes + 1
    std::vector<NodeId> heads;
  };

  static PropagationGraph build(std::shared_ptr<const Corpus> corpus);

  const Corpus& corpus() const { return *corpus_; }
  std::shared_ptr<const Corpus> corpus_ptr() const { return corpus_; }

  std::size_t num_nodes() const { return nodes_.size(); }
  const Node& node(NodeId id) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  NodeId video_node(std::size_t record) const { return video_of_record_.at(record); }
  std::optional<NodeId> video_node(const std::string& sample_id) const;
  /// Record owning a per-sample node (video, attributes, comments).
  std::optional<std::size_t> owner_record(NodeId id) const;

  /// In-neighbors (heads) of `id` under `r`, ordered by the owning sample's
  /// (post_time, sample_time) and then node id.
  std::vector<NodeId> in_neighbors(NodeId id, Relation r) const;
  /// Stored in-adjacency of an explicit relation.
  std::span<const NodeId> explicit_in(NodeId id, Relation r) const;
  /// Same-topic video nodes posted strictly earlier than `id`. May include
  /// nodes of the same video only when that video has inconsistent post times
  /// (see has_inconsistent_videos()).
  std::span<const NodeId> topic_prefix(NodeId video) const;
  bool has_inconsistent_videos() const { return inconsistent_videos_; }
  bool same_video(NodeId a, NodeId b) const;

  EdgeCounts count_edges() const;

  /// Training label of a video node.
  std::optional<int> label(NodeId video) const;
  std::int64_t post_time(NodeId video) const;
  std::int64_t sample_time(NodeId video) const;

  const std::vector<std::string>& topic_names() const { return topic_names_; }
  const std::vector<std::vector<NodeId>>& topic_lists() const { return topic_lists_; }
  const Csr& csr(Relation r) const { return adjacency_[static_cast<std::size_t>(r)]; }

  /// Binary snapshot; layout in docs/graph_snapshot.md.
  std::string snapshot() const;
  void save_snapshot(const std::string& path) const;
  static PropagationGraph load_snapshot(const std::string& path, std::shared_ptr<const Corpus> corpus);
  static PropagationGraph from_snapshot(std::string_view bytes, std::shared_ptr<const Corpus> corpus);

  friend bool operator==(const PropagationGraph& a, const PropagationGraph& b);

 private:
  std::uint32_t topic_of(NodeId video) const;
  void finish_indices();

  std::shared_ptr<const Corpus> corpus_;
  std::vector<Node> nodes_;
  std::vector<NodeId> video_of_record_;
  std::array<Csr, kNumRelations> adjacency_;
  std::vector<std::string> topic_names_;
  std::vector<std::vector<NodeId>> topic_lists_;
  // Derived on build/load.
  std::vector<std::uint32_t> topic_position_;  // per record: position in its topic list
  std::vector<std::uint32_t> record_topic_;    // per record: topic index
  bool inconsistent_videos_ = false;
};

/// A logical view of a graph with an ablation mask applied to its edges.
class GraphView {
 public:
  explicit GraphView(const PropagationGraph& g, AblationMask mask = {}) : graph_(&g), mask_(mask) {}

  const PropagationGraph& graph() const { return *graph_; }
  const AblationMask& mask() const { return mask_; }
  bool enabled(Relation r) const { return mask_.enabled(r); }
  std::vector<NodeId> in_neighbors(NodeId id, Relation r) const;
  EdgeCounts count_edges() const;

 private:
  const PropagationGraph* graph_;
  AblationMask mask_;
};

GraphView apply_ablation(const PropagationGraph& graph, const AblationMask& mask);

}  // namespace vidprop
