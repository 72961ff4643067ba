#include "vidprop/sampler.hpp"

#include <algorithm>
#include <unordered_map>

#include "vidprop/util.hpp"

namespace vidprop {

void SamplerConfig::validate() const {
  if (fanout < 1) throw ConfigError("sampler fanout must be >= 1");
  if (depth < 1) throw ConfigError("sampler depth must be >= 1");
  if (comment_cap < 1) throw ConfigError("sampler comment cap must be >= 1");
}

std::optional<std::uint32_t> Subgraph::local(NodeId id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id);
  if (it == nodes.end() || *it != id) return std::nullopt;
  return static_cast<std::uint32_t>(it - nodes.begin());
}

std::size_t Subgraph::num_edges() const {
  std::size_t n = 0;
  for (const auto& e : edges) n += e.size();
  return n;
}

nlohmann::ordered_json Subgraph::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json ns = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < nodes.size(); ++i) ns.push_back({{"id", nodes[i]}, {"kind", node_kind_name(kinds[i])}});
  j["nodes"] = std::move(ns);
  nlohmann::ordered_json es = nlohmann::ordered_json::object();
  for (std::size_t r = 0; r < kNumRelations; ++r) {
    if (edges[r].empty()) continue;
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& e : edges[r]) list.push_back({nodes[e.src], nodes[e.dst]});
    es[std::string(relation_name(static_cast<Relation>(r)))] = std::move(list);
  }
  j["edges"] = std::move(es);
  nlohmann::ordered_json b = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < batch.size(); ++i)
    b.push_back({{"id", nodes[batch[i]]}, {"label", labels[i] ? nlohmann::ordered_json(*labels[i]) : nlohmann::ordered_json(nullptr)}});
  j["batch"] = std::move(b);
  return j;
}

namespace {

bool temporally_valid(const PropagationGraph& g, Relation r, NodeId head, NodeId tail) {
  if (r == Relation::IsHistoryOf) return g.sample_time(head) < g.sample_time(tail);
  return g.post_time(head) < g.post_time(tail);
}

}  // namespace

Subgraph sample_subgraph(const GraphView& view, std::span<const NodeId> batch, const SamplerConfig& config,
                         std::uint64_t epoch) {
  config.validate();
  const PropagationGraph& g = view.graph();
  for (auto id : batch)
    if (g.node(id).kind != NodeKind::Video) throw DataError("batch node " + std::to_string(id) + " is not a video node");

  std::unordered_map<NodeId, std::size_t> seen;  // global -> discovery order
  std::vector<NodeId> order;
  auto discover = [&](NodeId id) {
    if (seen.emplace(id, order.size()).second) {
      order.push_back(id);
      return true;
    }
    return false;
  };
  struct RawEdge {
    Relation r;
    NodeId head, tail;
  };
  std::vector<RawEdge> raw_edges;

  std::vector<NodeId> frontier;
  for (auto id : batch)
    if (discover(id)) frontier.push_back(id);

  for (std::size_t hop = 0; hop < config.depth && !frontier.empty(); ++hop) {
    std::sort(frontier.begin(), frontier.end());
    std::vector<NodeId> next;
    for (NodeId u : frontier) {
      if (g.node(u).kind != NodeKind::Video) continue;
      for (std::size_t ri = 0; ri < kNumRelations; ++ri) {
        const auto r = static_cast<Relation>(ri);
        if (!view.enabled(r)) continue;

        std::vector<NodeId> materialized;
        std::span<const NodeId> candidates;
        if (r == Relation::HasSameTopicAs) {
          candidates = g.topic_prefix(u);
          if (g.has_inconsistent_videos()) {
            for (auto h : candidates)
              if (!g.same_video(h, u)) materialized.push_back(h);
            candidates = materialized;
          }
        } else {
          candidates = g.explicit_in(u, r);
          if (is_video_video(r)) {
            for (auto h : candidates)
              if (temporally_valid(g, r, h, u)) materialized.push_back(h);
            candidates = materialized;
          }
        }
        if (candidates.empty()) continue;

        std::size_t cap = candidates.size();
        if (r == Relation::IsCommentOf) cap = std::min(config.fanout, config.comment_cap);
        else if (is_video_video(r)) cap = config.fanout;

        auto take = [&](NodeId h) {
          raw_edges.push_back({r, h, u});
          if (discover(h)) next.push_back(h);
        };
        if (candidates.size() <= cap) {
          for (auto h : candidates) take(h);
        } else {
          CounterRng rng({config.seed, epoch, static_cast<std::uint64_t>(u), static_cast<std::uint64_t>(ri)});
          for (auto k : sample_without_replacement(candidates.size(), cap, rng)) take(candidates[k]);
        }
      }
    }
    frontier = std::move(next);
  }

  Subgraph sg;
  sg.nodes = order;
  std::sort(sg.nodes.begin(), sg.nodes.end());
  std::unordered_map<NodeId, std::uint32_t> local;
  local.reserve(sg.nodes.size());
  sg.kinds.reserve(sg.nodes.size());
  for (std::uint32_t i = 0; i < sg.nodes.size(); ++i) {
    local.emplace(sg.nodes[i], i);
    sg.kinds.push_back(g.node(sg.nodes[i]).kind);
  }
  for (const auto& e : raw_edges)
    sg.edges[static_cast<std::size_t>(e.r)].push_back({local.at(e.head), local.at(e.tail)});
  for (auto& list : sg.edges) {
    std::sort(list.begin(), list.end(), [](const SubgraphEdge& a, const SubgraphEdge& b) {
      return std::tie(a.dst, a.src) < std::tie(b.dst, b.src);
    });
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  for (auto id : batch) {
    sg.batch.push_back(local.at(id));
    sg.labels.push_back(g.label(id));
  }
  return sg;
}

BatchIterator::BatchIterator(std::vector<NodeId> items, std::size_t batch_size, std::uint64_t seed)
    : items_(std::move(items)), batch_size_(batch_size), seed_(seed) {
  if (batch_size_ == 0) throw ConfigError("batch size must be >= 1");
  std::sort(items_.begin(), items_.end());
}

std::size_t BatchIterator::batches_per_epoch() const { return (items_.size() + batch_size_ - 1) / batch_size_; }

std::vector<std::vector<NodeId>> BatchIterator::epoch(std::uint64_t e) const {
  std::vector<NodeId> order = items_;
  CounterRng rng({seed_, e, 0x5348554646ULL});
  shuffle(order, rng);
  std::vector<std::vector<NodeId>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size_)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size_)));
  return out;
}

std::vector<NodeId> video_nodes(const PropagationGraph& graph, std::span<const std::string> sample_ids) {
  std::vector<NodeId> out;
  out.reserve(sample_ids.size());
  for (const auto& s : sample_ids) {
    auto v = graph.video_node(s);
    if (!v) throw DataError("unknown sample id '" + s + "'");
    out.push_back(*v);
  }
  return out;
}

}  // namespace vidprop
