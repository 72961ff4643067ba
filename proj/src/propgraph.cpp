#include "vidprop/propgraph.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <tuple>

namespace vidprop {

namespace {

constexpr std::array<std::string_view, kNumNodeKinds> kKindNames = {
    "video", "platform", "topic", "title", "description", "time", "ctime", "video_time",
    "comment", "likes", "collects", "views", "shares", "comments", "fans"};

constexpr std::array<std::string_view, kNumRelations> kRelationNames = {
    "is_platform_of", "is_topic_of",   "is_title_of",      "is_description_of", "is_post_time_of",
    "is_current_time_of", "is_duration_time_of", "is_comment_of", "is_likes_of", "is_collects_of",
    "is_views_of", "is_shares_of",     "is_comments_of",   "is_fans_of",        "has_same_author_as",
    "has_same_topic_as", "is_history_of"};

constexpr std::array<NodeKind, kNumRelations> kHeadKinds = {
    NodeKind::Platform, NodeKind::Topic,    NodeKind::Title,   NodeKind::Description, NodeKind::Time,
    NodeKind::CTime,    NodeKind::VideoTime, NodeKind::Comment, NodeKind::Likes,      NodeKind::Collects,
    NodeKind::Views,    NodeKind::Shares,   NodeKind::Comments, NodeKind::Fans,       NodeKind::Video,
    NodeKind::Video,    NodeKind::Video};

constexpr char kMagic[8] = {'V', 'P', 'G', 'R', 'A', 'P', 'H', '1'};
constexpr std::uint32_t kSnapshotVersion = 1;

bool is_per_sample(NodeKind k) { return k != NodeKind::Platform && k != NodeKind::Topic; }

}  // namespace

std::string_view node_kind_name(NodeKind k) { return kKindNames[static_cast<std::size_t>(k)]; }
std::string_view relation_name(Relation r) { return kRelationNames[static_cast<std::size_t>(r)]; }

std::optional<Relation> parse_relation(std::string_view name) {
  for (std::size_t i = 0; i < kNumRelations; ++i)
    if (kRelationNames[i] == name) return static_cast<Relation>(i);
  return std::nullopt;
}

RelationSignature relation_signature(Relation r) { return {kHeadKinds[static_cast<std::size_t>(r)], NodeKind::Video}; }

AblationMask AblationMask::parse(std::string_view text) {
  AblationMask m;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    auto tok = text.substr(start, end - start);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    if (tok == "v") m.zero_video_features = true;
    else if (tok == "vv") m.drop_video_video_edges = true;
    else if (tok == "iv") m.drop_interactive_edges = true;
    else if (tok == "cv") m.drop_comment_edges = true;
    else if (!tok.empty() && tok != "none") throw ConfigError("unknown ablation '" + std::string(tok) + "'");
    start = end + 1;
  }
  return m;
}

std::string AblationMask::to_string() const {
  std::string s;
  auto add = [&](bool f, const char* n) {
    if (!f) return;
    if (!s.empty()) s += ',';
    s += n;
  };
  add(zero_video_features, "v");
  add(drop_video_video_edges, "vv");
  add(drop_interactive_edges, "iv");
  add(drop_comment_edges, "cv");
  return s.empty() ? "none" : s;
}

nlohmann::ordered_json edge_counts_json(const EdgeCounts& counts) {
  nlohmann::ordered_json j;
  std::uint64_t total = 0;
  for (std::size_t r = 0; r < kNumRelations; ++r) {
    j[std::string(kRelationNames[r])] = counts[r];
    total += counts[r];
  }
  j["total"] = total;
  return j;
}

// ---------------------------------------------------------------------------

const Node& PropagationGraph::node(NodeId id) const {
  if (id >= nodes_.size()) throw DataError("unknown node id " + std::to_string(id));
  return nodes_[id];
}

std::optional<NodeId> PropagationGraph::video_node(const std::string& sample_id) const {
  auto r = corpus_->find(sample_id);
  if (!r) return std::nullopt;
  return video_of_record_[*r];
}

std::optional<std::size_t> PropagationGraph::owner_record(NodeId id) const {
  const auto& n = node(id);
  if (!is_per_sample(n.kind)) return std::nullopt;
  return static_cast<std::size_t>(n.ref);
}

std::int64_t PropagationGraph::post_time(NodeId video) const { return (*corpus_)[node(video).ref].post_time; }
std::int64_t PropagationGraph::sample_time(NodeId video) const { return (*corpus_)[node(video).ref].sample_time; }

std::optional<int> PropagationGraph::label(NodeId video) const {
  const auto& n = node(video);
  if (n.kind != NodeKind::Video) throw DataError("label requested for a non-video node");
  return (*corpus_)[n.ref].influence_level;
}

bool PropagationGraph::same_video(NodeId a, NodeId b) const {
  return (*corpus_)[node(a).ref].video_id == (*corpus_)[node(b).ref].video_id;
}

std::uint32_t PropagationGraph::topic_of(NodeId video) const { return record_topic_[node(video).ref]; }

PropagationGraph PropagationGraph::build(std::shared_ptr<const Corpus> corpus_ptr) {
  PropagationGraph g;
  g.corpus_ = std::move(corpus_ptr);
  const Corpus& corpus = *g.corpus_;
  const std::size_t n_rec = corpus.size();
  if (n_rec > (std::numeric_limits<NodeId>::max() / 32)) throw DataError("corpus too large for 32-bit node ids");

  std::array<std::vector<std::pair<NodeId, NodeId>>, kNumRelations> edges;  // (tail, head)
  std::array<std::optional<NodeId>, kNumPlatforms> platform_nodes;
  std::map<std::string, std::pair<std::uint32_t, NodeId>> topics;
  g.video_of_record_.resize(n_rec);

  auto add = [&](NodeKind k, std::uint64_t ref, std::uint32_t aux = 0) {
    g.nodes_.push_back({k, aux, ref});
    return static_cast<NodeId>(g.nodes_.size() - 1);
  };

  for (std::size_t i = 0; i < n_rec; ++i) {
    const auto& r = corpus[i];
    auto pi = static_cast<std::size_t>(r.platform);
    if (!platform_nodes[pi]) platform_nodes[pi] = add(NodeKind::Platform, 0, static_cast<std::uint32_t>(pi));
    auto [tit, fresh] = topics.try_emplace(r.topic);
    if (fresh) {
      auto t = static_cast<std::uint32_t>(g.topic_names_.size());
      g.topic_names_.push_back(r.topic);
      tit->second = {t, add(NodeKind::Topic, t)};
    }
    NodeId v = add(NodeKind::Video, i);
    g.video_of_record_[i] = v;
    auto link = [&](Relation rel, NodeId head) { edges[static_cast<std::size_t>(rel)].emplace_back(v, head); };
    link(Relation::IsPlatformOf, *platform_nodes[pi]);
    link(Relation::IsTopicOf, tit->second.second);
    link(Relation::IsTitleOf, add(NodeKind::Title, i));
    link(Relation::IsDescriptionOf, add(NodeKind::Description, i));
    link(Relation::IsPostTimeOf, add(NodeKind::Time, i));
    link(Relation::IsCurrentTimeOf, add(NodeKind::CTime, i));
    link(Relation::IsDurationTimeOf, add(NodeKind::VideoTime, i));
    link(Relation::IsLikesOf, add(NodeKind::Likes, i));
    link(Relation::IsCollectsOf, add(NodeKind::Collects, i));
    link(Relation::IsViewsOf, add(NodeKind::Views, i));
    link(Relation::IsSharesOf, add(NodeKind::Shares, i));
    link(Relation::IsCommentsOf, add(NodeKind::Comments, i));
    link(Relation::IsFansOf, add(NodeKind::Fans, i));
    for (std::uint32_t c = 0; c < r.comments.size(); ++c) link(Relation::IsCommentOf, add(NodeKind::Comment, i, c));
  }

  // has_same_author_as: earlier-posted sample -> later-posted sample of another video.
  {
    std::map<std::string, std::vector<std::size_t>> by_author;
    for (std::size_t i = 0; i < n_rec; ++i) by_author[corpus[i].author_id].push_back(i);
    auto& out = edges[static_cast<std::size_t>(Relation::HasSameAuthorAs)];
    for (auto& [_, recs] : by_author) {
      std::stable_sort(recs.begin(), recs.end(),
                       [&](std::size_t a, std::size_t b) { return corpus[a].post_time < corpus[b].post_time; });
      std::size_t group_start = 0;
      for (std::size_t j = 0; j < recs.size(); ++j) {
        if (corpus[recs[j]].post_time != corpus[recs[group_start]].post_time) group_start = j;
        for (std::size_t a = 0; a < group_start; ++a)
          if (corpus[recs[a]].video_id != corpus[recs[j]].video_id)
            out.emplace_back(g.video_of_record_[recs[j]], g.video_of_record_[recs[a]]);
      }
    }
  }
  // is_history_of: consecutive samples of one video in sample-time order.
  for (const auto& [_, idx] : corpus.video_index())
    for (std::size_t k = 1; k < idx.size(); ++k)
      edges[static_cast<std::size_t>(Relation::IsHistoryOf)].emplace_back(g.video_of_record_[idx[k]],
                                                                          g.video_of_record_[idx[k - 1]]);

  // Schema check.
  for (std::size_t r = 0; r < kNumRelations; ++r)
    for (const auto& [tail, head] : edges[r])
      if (g.nodes_[tail].kind != NodeKind::Video || g.nodes_[head].kind != kHeadKinds[r])
        throw DataError("schema violation on relation " + std::string(kRelationNames[r]));

  // CSR per explicit relation, heads ordered by owner (post_time, sample_time) then id.
  auto key = [&](NodeId id) {
    const auto& n = g.nodes_[id];
    if (!is_per_sample(n.kind)) return std::make_tuple(std::numeric_limits<std::int64_t>::min(),
                                                       std::numeric_limits<std::int64_t>::min(), id);
    const auto& r = corpus[n.ref];
    return std::make_tuple(r.post_time, r.sample_time, id);
  };
  const std::size_t n_nodes = g.nodes_.size();
  for (std::size_t r = 0; r < kNumRelations; ++r) {
    auto& csr = g.adjacency_[r];
    csr.offsets.assign(n_nodes + 1, 0);
    if (static_cast<Relation>(r) == Relation::HasSameTopicAs) continue;
    for (const auto& [tail, _] : edges[r]) ++csr.offsets[tail + 1];
    std::partial_sum(csr.offsets.begin(), csr.offsets.end(), csr.offsets.begin());
    csr.heads.resize(edges[r].size());
    std::vector<std::uint64_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
    for (const auto& [tail, head] : edges[r]) csr.heads[cursor[tail]++] = head;
    for (std::size_t v = 0; v < n_nodes; ++v)
      std::sort(csr.heads.begin() + static_cast<std::ptrdiff_t>(csr.offsets[v]),
                csr.heads.begin() + static_cast<std::ptrdiff_t>(csr.offsets[v + 1]),
                [&](NodeId a, NodeId b) { return key(a) < key(b); });
  }

  // Per-topic time-sorted video lists.
  g.topic_lists_.assign(g.topic_names_.size(), {});
  for (std::size_t i = 0; i < n_rec; ++i) g.topic_lists_[topics.at(corpus[i].topic).first].push_back(g.video_of_record_[i]);
  for (auto& list : g.topic_lists_) std::sort(list.begin(), list.end(), [&](NodeId a, NodeId b) { return key(a) < key(b); });

  g.finish_indices();
  return g;
}

void PropagationGraph::finish_indices() {
  const Corpus& corpus = *corpus_;
  topic_position_.assign(corpus.size(), 0);
  record_topic_.assign(corpus.size(), 0);
  for (std::uint32_t t = 0; t < topic_lists_.size(); ++t)
    for (std::uint32_t p = 0; p < topic_lists_[t].size(); ++p) {
      auto rec = nodes_[topic_lists_[t][p]].ref;
      topic_position_[rec] = p;
      record_topic_[rec] = t;
    }
  inconsistent_videos_ = false;
  for (const auto& [_, idx] : corpus.video_index())
    for (auto i : idx)
      if (corpus[i].post_time != corpus[idx.front()].post_time || corpus[i].topic != corpus[idx.front()].topic)
        inconsistent_videos_ = true;
}

std::span<const NodeId> PropagationGraph::explicit_in(NodeId id, Relation r) const {
  node(id);
  if (r == Relation::HasSameTopicAs) throw DataError("has_same_topic_as is not stored explicitly");
  const auto& csr = adjacency_[static_cast<std::size_t>(r)];
  return {csr.heads.data() + csr.offsets[id], csr.heads.data() + csr.offsets[id + 1]};
}

std::span<const NodeId> PropagationGraph::topic_prefix(NodeId video) const {
  const auto& n = node(video);
  if (n.kind != NodeKind::Video) return {};
  const auto& list = topic_lists_[record_topic_[n.ref]];
  const auto pos = topic_position_[n.ref];
  const auto t = (*corpus_)[n.ref].post_time;
  auto end = std::partition_point(list.begin(), list.begin() + pos + 1,
                                  [&](NodeId u) { return (*corpus_)[nodes_[u].ref].post_time < t; });
  return {list.data(), static_cast<std::size_t>(end - list.begin())};
}

std::vector<NodeId> PropagationGraph::in_neighbors(NodeId id, Relation r) const {
  if (r != Relation::HasSameTopicAs) {
    auto s = explicit_in(id, r);
    return {s.begin(), s.end()};
  }
  auto prefix = topic_prefix(id);
  std::vector<NodeId> out;
  out.reserve(prefix.size());
  for (auto u : prefix)
    if (!inconsistent_videos_ || !same_video(u, id)) out.push_back(u);
  return out;
}

EdgeCounts PropagationGraph::count_edges() const {
  EdgeCounts c{};
  for (std::size_t r = 0; r < kNumRelations; ++r) c[r] = adjacency_[r].heads.size();
  // Ordered pairs with strictly earlier post time within each topic list.
  std::uint64_t same_topic = 0;
  for (const auto& list : topic_lists_) {
    std::size_t group_start = 0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (post_time(list[i]) != post_time(list[group_start])) group_start = i;
      same_topic += group_start;
    }
  }
  // Same-video pairs only exist when a video carries several post times.
  if (inconsistent_videos_) {
    const Corpus& corpus = *corpus_;
    for (const auto& [_, idx] : corpus.video_index()) {
      std::map<std::string, std::vector<std::int64_t>> per_topic;
      for (auto i : idx) per_topic[corpus[i].topic].push_back(corpus[i].post_time);
      for (auto& [__, times] : per_topic) {
        std::sort(times.begin(), times.end());
        std::size_t group_start = 0;
        for (std::size_t i = 0; i < times.size(); ++i) {
          if (times[i] != times[group_start]) group_start = i;
          same_topic -= group_start;
        }
      }
    }
  }
  c[static_cast<std::size_t>(Relation::HasSameTopicAs)] = same_topic;
  return c;
}

// ---------------------------------------------------------------------------
// Snapshot

std::string PropagationGraph::snapshot() const {
  ByteWriter w;
  w.put_bytes(std::string_view(kMagic, 8));
  w.put<std::uint32_t>(kSnapshotVersion);
  w.put<std::uint32_t>(kNumRelations);
  w.put<std::uint64_t>(nodes_.size());
  w.put<std::uint64_t>(corpus_->size());
  w.put<std::uint64_t>(topic_names_.size());
  for (const auto& n : nodes_) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(n.kind));
    w.put_bytes(std::string_view("\0\0\0", 3));
    w.put<std::uint32_t>(n.aux);
    w.put<std::uint64_t>(n.ref);
  }
  for (std::size_t r = 0; r < kNumRelations; ++r) {
    if (static_cast<Relation>(r) == Relation::HasSameTopicAs) continue;
    const auto& csr = adjacency_[r];
    w.put<std::uint32_t>(static_cast<std::uint32_t>(r));
    w.put<std::uint32_t>(0);
    w.put<std::uint64_t>(csr.heads.size());
    for (auto o : csr.offsets) w.put<std::uint64_t>(o);
    for (auto h : csr.heads) w.put<std::uint64_t>(h);
  }
  for (std::size_t t = 0; t < topic_names_.size(); ++t) {
    w.put<std::uint64_t>(topic_names_[t].size());
    w.put_bytes(topic_names_[t]);
    w.put<std::uint64_t>(topic_lists_[t].size());
    for (auto v : topic_lists_[t]) w.put<std::uint64_t>(v);
  }
  return w.bytes();
}

void PropagationGraph::save_snapshot(const std::string& path) const { write_file(path, snapshot()); }

PropagationGraph PropagationGraph::load_snapshot(const std::string& path, std::shared_ptr<const Corpus> corpus) {
  return from_snapshot(read_file(path), std::move(corpus));
}

PropagationGraph PropagationGraph::from_snapshot(std::string_view bytes, std::shared_ptr<const Corpus> corpus) {
  ByteReader rd(bytes);
  if (rd.remaining() < 8 || std::memcmp(rd.take(8).data(), kMagic, 8) != 0) throw IoError("not a graph snapshot");
  if (rd.get<std::uint32_t>() != kSnapshotVersion) throw IoError("unsupported graph snapshot version");
  if (rd.get<std::uint32_t>() != kNumRelations) throw IoError("relation count mismatch in graph snapshot");
  PropagationGraph g;
  g.corpus_ = std::move(corpus);
  const auto n_nodes = rd.get<std::uint64_t>();
  const auto n_rec = rd.get<std::uint64_t>();
  const auto n_topics = rd.get<std::uint64_t>();
  if (n_rec != g.corpus_->size()) throw DataError("graph snapshot was built from a different corpus");
  if (n_nodes > rd.remaining() / 16) throw IoError("truncated graph snapshot");
  g.nodes_.resize(n_nodes);
  g.video_of_record_.assign(n_rec, 0);
  for (std::uint64_t i = 0; i < n_nodes; ++i) {
    auto kind = rd.get<std::uint8_t>();
    rd.take(3);
    if (kind >= kNumNodeKinds) throw IoError("invalid node kind in graph snapshot");
    g.nodes_[i] = {static_cast<NodeKind>(kind), rd.get<std::uint32_t>(), rd.get<std::uint64_t>()};
    const auto& n = g.nodes_[i];
    if (is_per_sample(n.kind) && n.ref >= n_rec) throw DataError("graph snapshot references a missing record");
    if (n.kind == NodeKind::Video) g.video_of_record_[n.ref] = static_cast<NodeId>(i);
  }
  for (std::size_t r = 0; r < kNumRelations; ++r) {
    auto& csr = g.adjacency_[r];
    csr.offsets.assign(n_nodes + 1, 0);
    if (static_cast<Relation>(r) == Relation::HasSameTopicAs) continue;
    if (rd.get<std::uint32_t>() != r) throw IoError("unexpected relation block order in graph snapshot");
    rd.get<std::uint32_t>();
    const auto n_edges = rd.get<std::uint64_t>();
    if (n_edges > rd.remaining() / 8) throw IoError("truncated graph snapshot");
    for (auto& o : csr.offsets) o = rd.get<std::uint64_t>();
    if (csr.offsets.back() != n_edges) throw IoError("inconsistent adjacency block in graph snapshot");
    csr.heads.resize(n_edges);
    for (auto& h : csr.heads) {
      auto v = rd.get<std::uint64_t>();
      if (v >= n_nodes) throw IoError("edge endpoint out of range in graph snapshot");
      h = static_cast<NodeId>(v);
    }
  }
  g.topic_names_.resize(n_topics);
  g.topic_lists_.resize(n_topics);
  for (std::uint64_t t = 0; t < n_topics; ++t) {
    auto len = rd.get<std::uint64_t>();
    g.topic_names_[t] = std::string(rd.take(len));
    auto count = rd.get<std::uint64_t>();
    if (count > rd.remaining() / 8) throw IoError("truncated graph snapshot");
    g.topic_lists_[t].resize(count);
    for (auto& v : g.topic_lists_[t]) {
      auto id = rd.get<std::uint64_t>();
      if (id >= n_nodes || g.nodes_[id].kind != NodeKind::Video) throw IoError("invalid topic index entry");
      v = static_cast<NodeId>(id);
    }
  }
  if (rd.remaining() != 0) throw IoError("trailing bytes in graph snapshot");
  g.finish_indices();
  return g;
}

bool operator==(const PropagationGraph& a, const PropagationGraph& b) {
  if (a.nodes_ != b.nodes_ || a.video_of_record_ != b.video_of_record_ || a.topic_names_ != b.topic_names_ ||
      a.topic_lists_ != b.topic_lists_)
    return false;
  for (std::size_t r = 0; r < kNumRelations; ++r)
    if (a.adjacency_[r].offsets != b.adjacency_[r].offsets || a.adjacency_[r].heads != b.adjacency_[r].heads) return false;
  return true;
}

// ---------------------------------------------------------------------------

std::vector<NodeId> GraphView::in_neighbors(NodeId id, Relation r) const {
  if (!mask_.enabled(r)) {
    graph_->node(id);
    return {};
  }
  return graph_->in_neighbors(id, r);
}

EdgeCounts GraphView::count_edges() const {
  auto c = graph_->count_edges();
  for (std::size_t r = 0; r < kNumRelations; ++r)
    if (!mask_.enabled(static_cast<Relation>(r))) c[r] = 0;
  return c;
}

GraphView apply_ablation(const PropagationGraph& graph, const AblationMask& mask) { return GraphView(graph, mask); }

}  // namespace vidprop
