#include "vidprop/encode.hpp"

#include <cmath>
#include <cstring>

namespace vidprop {

namespace {
constexpr char kSidecarMagic[8] = {'V', 'P', 'S', 'I', 'D', 'E', '0', '1'};
constexpr std::uint32_t kSidecarVersion = 1;
}  // namespace

std::size_t raw_dim(NodeKind k) {
  switch (k) {
    case NodeKind::Video: return kVideoDim;
    case NodeKind::Platform:
    case NodeKind::Topic:
    case NodeKind::Title:
    case NodeKind::Description: return kTextDim;
    case NodeKind::Time:
    case NodeKind::CTime: return kTimeDim;
    case NodeKind::Comment: return kCommentDim;
    case NodeKind::VideoTime:
    case NodeKind::Likes:
    case NodeKind::Collects:
    case NodeKind::Views:
    case NodeKind::Shares:
    case NodeKind::Comments:
    case NodeKind::Fans: return 1;
  }
  return 0;
}

Eigen::VectorXd StubProvider::expand(char tag, std::string_view input, std::size_t dim) const {
  std::string material(sizeof seed_ + 1, '\0');
  std::memcpy(material.data(), &seed_, sizeof seed_);
  material[sizeof seed_] = tag;
  material.append(input);
  CounterRng rng(hash64(material));
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1.0, 1.0);
  return v / v.norm();
}

Eigen::VectorXd StubProvider::text_embed(std::string_view text) const { return expand('t', text, kTextDim); }
Eigen::VectorXd StubProvider::video_embed(std::string_view ref) const { return expand('v', ref, kVideoDim); }

std::unique_ptr<EmbeddingProvider> stub_provider(std::uint64_t seed) { return std::make_unique<StubProvider>(seed); }

// ---------------------------------------------------------------------------

void Sidecar::add(const Digest& key, std::span<const float> values) {
  entries_[key] = std::vector<float>(values.begin(), values.end());
}

void Sidecar::add(const Digest& key, const Eigen::VectorXd& values) {
  std::vector<float> v(static_cast<std::size_t>(values.size()));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(values[static_cast<Eigen::Index>(i)]);
  entries_[key] = std::move(v);
}

const std::vector<float>* Sidecar::find(const Digest& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string Sidecar::serialize() const {
  ByteWriter w;
  w.put_bytes(std::string_view(kSidecarMagic, 8));
  w.put<std::uint32_t>(kSidecarVersion);
  w.put<std::uint32_t>(0);
  w.put<std::uint64_t>(entries_.size());
  for (const auto& [key, values] : entries_) {
    w.put_bytes(std::string_view(reinterpret_cast<const char*>(key.data()), key.size()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(values.size()));
    for (float f : values) w.put<float>(f);
  }
  return w.bytes();
}

Sidecar Sidecar::deserialize(std::string_view bytes) {
  ByteReader rd(bytes);
  if (rd.remaining() < 8 || std::memcmp(rd.take(8).data(), kSidecarMagic, 8) != 0) throw IoError("not a sidecar file");
  if (rd.get<std::uint32_t>() != kSidecarVersion) throw IoError("unsupported sidecar version");
  rd.get<std::uint32_t>();
  const auto count = rd.get<std::uint64_t>();
  Sidecar s;
  for (std::uint64_t e = 0; e < count; ++e) {
    Digest key{};
    std::memcpy(key.data(), rd.take(32).data(), 32);
    const auto dim = rd.get<std::uint32_t>();
    if (dim > rd.remaining() / 4) throw IoError("truncated sidecar entry");
    std::vector<float> v(dim);
    for (auto& f : v) f = rd.get<float>();
    s.entries_[key] = std::move(v);
  }
  if (rd.remaining() != 0) throw IoError("trailing bytes in sidecar file");
  return s;
}

void Sidecar::save(const std::string& path) const { write_file(path, serialize()); }
Sidecar Sidecar::load(const std::string& path) { return deserialize(read_file(path)); }

namespace {
Eigen::VectorXd lookup(const Sidecar& table, std::string_view content, std::size_t dim, const char* what) {
  const auto* v = table.find(sha256(content));
  if (!v) throw DataError(std::string("no ") + what + " embedding in sidecar for key " + to_hex(sha256(content)));
  if (v->size() != dim)
    throw DataError(std::string(what) + " embedding has dimension " + std::to_string(v->size()) + ", expected " +
                    std::to_string(dim));
  Eigen::VectorXd out(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) out[static_cast<Eigen::Index>(i)] = (*v)[i];
  return out;
}
}  // namespace

Eigen::VectorXd SidecarProvider::text_embed(std::string_view text) const {
  return lookup(text_, text, kTextDim, "text");
}
Eigen::VectorXd SidecarProvider::video_embed(std::string_view ref) const {
  return lookup(video_, ref, kVideoDim, "video");
}

// ---------------------------------------------------------------------------

Eigen::VectorXd encode_time(std::int64_t t) {
  Eigen::VectorXd f(static_cast<Eigen::Index>(kTimeDim));
  const double x = static_cast<double>(t);
  for (std::size_t i = 0; i < kTimeDim / 2; ++i) {
    const double freq = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(kTimeDim));
    f[static_cast<Eigen::Index>(2 * i)] = std::sin(x / freq);
    f[static_cast<Eigen::Index>(2 * i + 1)] = std::cos(x / freq);
  }
  return f;
}

Eigen::VectorXd encode_scalar(std::int64_t v) {
  if (v < 0) throw DataError("encode_scalar: negative value " + std::to_string(v));
  Eigen::VectorXd f(1);
  f[0] = std::log1p(static_cast<double>(v));
  return f;
}

Eigen::VectorXd encode_comment(std::string_view text, std::int64_t t, const EmbeddingProvider& provider) {
  Eigen::VectorXd f(static_cast<Eigen::Index>(kCommentDim));
  auto te = provider.text_embed(text);
  if (static_cast<std::size_t>(te.size()) != kTextDim) throw DataError("text embedding has the wrong dimension");
  f.head(kTextDim) = te;
  f.tail(kTimeDim) = encode_time(t);
  return f;
}

RawFeature encode_node(const PropagationGraph& graph, NodeId id, const EmbeddingProvider& provider,
                       const AblationMask& mask) {
  const Node& n = graph.node(id);
  RawFeature out{n.kind, {}};
  if (n.kind == NodeKind::Platform) {
    out.values = provider.text_embed(platform_name(static_cast<Platform>(n.aux)));
  } else if (n.kind == NodeKind::Topic) {
    if (n.ref >= graph.topic_names().size()) throw DataError("topic node without a topic payload");
    out.values = provider.text_embed(graph.topic_names()[n.ref]);
  } else {
    if (n.ref >= graph.corpus().size()) throw DataError("node payload refers to a missing record");
    const SampleRecord& r = graph.corpus()[n.ref];
    switch (n.kind) {
      case NodeKind::Video:
        if (mask.zero_video_features || !r.video_ref)
          out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kVideoDim));
        else
          out.values = provider.video_embed(*r.video_ref);
        break;
      case NodeKind::Title: out.values = provider.text_embed(r.title); break;
      case NodeKind::Description: out.values = provider.text_embed(r.description); break;
      case NodeKind::Time: out.values = encode_time(r.post_time); break;
      case NodeKind::CTime: out.values = encode_time(r.sample_time); break;
      case NodeKind::VideoTime: out.values = encode_scalar(r.duration_s); break;
      case NodeKind::Likes: out.values = encode_scalar(r.likes); break;
      case NodeKind::Collects: out.values = encode_scalar(r.collects); break;
      case NodeKind::Views: out.values = encode_scalar(r.views); break;
      case NodeKind::Shares: out.values = encode_scalar(r.shares); break;
      case NodeKind::Comments: out.values = encode_scalar(r.comments_count); break;
      case NodeKind::Fans: out.values = encode_scalar(r.fans); break;
      case NodeKind::Comment: {
        if (n.aux >= r.comments.size()) throw DataError("comment node refers to a missing comment");
        const auto& c = r.comments[n.aux];
        out.values = encode_comment(c.text, c.time, provider);
        break;
      }
      default: throw DataError("unresolvable node payload");
    }
  }
  if (static_cast<std::size_t>(out.values.size()) != raw_dim(n.kind))
    throw DataError("raw feature of kind " + std::string(node_kind_name(n.kind)) + " has dimension " +
                    std::to_string(out.values.size()) + ", expected " + std::to_string(raw_dim(n.kind)));
  return out;
}

// ---------------------------------------------------------------------------

FeatureStore::FeatureStore(const PropagationGraph& graph, const EmbeddingProvider& provider, AblationMask mask)
    : graph_(&graph), provider_(&provider), mask_(mask), cache_(graph.num_nodes()), ready_(graph.num_nodes(), 0) {}

void FeatureStore::ensure(std::span<const NodeId> nodes, unsigned threads) {
  std::vector<NodeId> todo;
  for (auto id : nodes) {
    graph_->node(id);
    if (!ready_[id]) {
      ready_[id] = 2;  // claimed
      todo.push_back(id);
    }
  }
  try {
    parallel_for(todo.size(), threads, [&](std::size_t i) {
      const NodeId id = todo[i];
      cache_[id] = encode_node(*graph_, id, *provider_, mask_).values;
      const Node& n = graph_->node(id);
      if (n.kind == NodeKind::Video && !mask_.zero_video_features && !graph_->corpus()[n.ref].video_ref)
        ++missing_video_refs_;
    });
  } catch (...) {
    for (auto id : todo) ready_[id] = 0;
    throw;
  }
  for (auto id : todo) ready_[id] = 1;
}

const Eigen::VectorXd& FeatureStore::get(NodeId id) const {
  if (id >= ready_.size() || ready_[id] != 1) throw DataError("feature of node " + std::to_string(id) + " not computed");
  return cache_[id];
}

}  // namespace vidprop
