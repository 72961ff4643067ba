#include "vidprop/rgcn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "vidprop/encode.hpp"
#include "vidprop/util.hpp"

namespace vidprop {

namespace {
constexpr char kParamsMagic[8] = {'V', 'P', 'R', 'G', 'C', 'N', '0', '1'};
constexpr std::uint32_t kParamsVersion = 1;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace

void RgcnConfig::validate() const {
  if (d_g < 1) throw ConfigError("d_g must be >= 1");
  if (layers < 1) throw ConfigError("layers must be >= 1");
  if (!(beta > 0.0)) throw ConfigError("smooth L1 beta must be positive");
}

ModelParams ModelParams::zeros(std::size_t d_g, std::size_t layers) {
  ModelParams p;
  p.d_g_ = d_g;
  p.layers_ = layers;
  const auto d = static_cast<Eigen::Index>(d_g);
  for (std::size_t k = 0; k < kNumNodeKinds; ++k)
    p.tensors_.push_back(Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(raw_dim(static_cast<NodeKind>(k)))));
  for (std::size_t k = 0; k < kNumNodeKinds; ++k) p.tensors_.push_back(Eigen::MatrixXd::Zero(d, 1));
  for (std::size_t l = 0; l < layers; ++l)
    for (std::size_t r = 0; r <= kNumRelations; ++r) p.tensors_.push_back(Eigen::MatrixXd::Zero(d, d));
  p.tensors_.push_back(Eigen::MatrixXd::Zero(1, d));
  p.tensors_.push_back(Eigen::MatrixXd::Zero(1, 1));
  return p;
}

ModelParams ModelParams::init(const RgcnConfig& config) {
  config.validate();
  ModelParams p = zeros(config.d_g, config.layers);
  auto fill = [&](std::size_t i) {
    auto& t = p.tensors_[i];
    const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    CounterRng rng({config.seed, 0x494E4954ULL, i});
    for (Eigen::Index c = 0; c < t.cols(); ++c)
      for (Eigen::Index r = 0; r < t.rows(); ++r) t(r, c) = rng.uniform(-bound, bound);
  };
  for (std::size_t k = 0; k < kNumNodeKinds; ++k) fill(k);
  for (std::size_t i = 2 * kNumNodeKinds; i + 1 < p.tensors_.size(); ++i) fill(i);
  return p;
}

std::size_t ModelParams::num_scalars() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.size());
  return n;
}

std::string ModelParams::tensor_name(std::size_t i) const {
  if (i >= tensors_.size()) throw DataError("tensor index out of range");
  if (i < kNumNodeKinds) return "proj_w." + std::string(node_kind_name(static_cast<NodeKind>(i)));
  if (i < 2 * kNumNodeKinds) return "proj_b." + std::string(node_kind_name(static_cast<NodeKind>(i - kNumNodeKinds)));
  if (i == tensors_.size() - 2) return "head_w";
  if (i == tensors_.size() - 1) return "head_b";
  const std::size_t j = i - 2 * kNumNodeKinds;
  const std::size_t layer = j / (kNumRelations + 1), r = j % (kNumRelations + 1);
  const std::string prefix = "layer" + std::to_string(layer) + ".";
  if (r == kNumRelations) return prefix + "self_w";
  return prefix + "rel_w." + std::string(relation_name(static_cast<Relation>(r)));
}

void ModelParams::set_zero() {
  for (auto& t : tensors_) t.setZero();
}

bool ModelParams::all_finite() const {
  return std::all_of(tensors_.begin(), tensors_.end(), [](const auto& t) { return t.allFinite(); });
}

void ModelParams::check_shape(std::size_t d_g, std::size_t layers) const {
  if (d_g_ != d_g || layers_ != layers)
    throw DataError("parameter shape mismatch: file has d_g=" + std::to_string(d_g_) + ", layers=" +
                    std::to_string(layers_) + "; expected d_g=" + std::to_string(d_g) + ", layers=" +
                    std::to_string(layers));
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.d_g_ != b.d_g_ || a.layers_ != b.layers_ || a.tensors_.size() != b.tensors_.size()) return false;
  for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
    const auto& x = a.tensors_[i];
    const auto& y = b.tensors_[i];
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), static_cast<std::size_t>(x.size()) * sizeof(double)) != 0) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

RawFeatures gather_features(const Subgraph& sg, const FeatureLookup& lookup) {
  RawFeatures f;
  for (std::uint32_t i = 0; i < sg.size(); ++i) f.nodes[static_cast<std::size_t>(sg.kinds[i])].push_back(i);
  for (std::size_t k = 0; k < kNumNodeKinds; ++k) {
    const auto dim = static_cast<Eigen::Index>(raw_dim(static_cast<NodeKind>(k)));
    f.values[k].resize(dim, static_cast<Eigen::Index>(f.nodes[k].size()));
    for (std::size_t c = 0; c < f.nodes[k].size(); ++c) {
      const Eigen::VectorXd& v = lookup(sg.nodes[f.nodes[k][c]]);
      if (v.size() != dim)
        throw DataError("feature of node " + std::to_string(sg.nodes[f.nodes[k][c]]) + " has dimension " +
                        std::to_string(v.size()) + ", expected " + std::to_string(dim));
      f.values[k].col(static_cast<Eigen::Index>(c)) = v;
    }
  }
  return f;
}

PropagationPlan make_plan(const Subgraph& sg) {
  PropagationPlan plan;
  for (std::size_t r = 0; r < kNumRelations; ++r) {
    std::vector<SubgraphEdge> edges = sg.edges[r];
    for (const auto& e : edges)
      if (e.src >= sg.size() || e.dst >= sg.size()) throw DataError("subgraph edge endpoint outside the node list");
    std::sort(edges.begin(), edges.end(),
              [](const SubgraphEdge& a, const SubgraphEdge& b) { return std::tie(a.dst, a.src) < std::tie(b.dst, b.src); });
    auto& p = plan[r];
    for (const auto& e : edges) {
      if (p.targets.empty() || p.targets.back() != e.dst) {
        p.targets.push_back(e.dst);
        p.offsets.push_back(static_cast<std::uint32_t>(p.sources.size()));
      }
      p.sources.push_back(e.src);
    }
    p.offsets.push_back(static_cast<std::uint32_t>(p.sources.size()));
  }
  return plan;
}

namespace {

// Mean of in-neighbor states per target: d x |targets|.
Eigen::MatrixXd aggregate(const RelationPlan& p, const Eigen::MatrixXd& h) {
  Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(h.rows(), static_cast<Eigen::Index>(p.targets.size()));
  for (std::size_t t = 0; t < p.targets.size(); ++t) {
    auto col = agg.col(static_cast<Eigen::Index>(t));
    for (auto s = p.offsets[t]; s < p.offsets[t + 1]; ++s) col += h.col(p.sources[s]);
    col /= static_cast<double>(p.offsets[t + 1] - p.offsets[t]);
  }
  return agg;
}

void check_finite(const Eigen::MatrixXd& m, const std::string& where) {
  if (m.allFinite()) return;
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    if (!m.col(c).allFinite()) throw NumericError("non-finite value in " + where + " at local node " + std::to_string(c));
}

}  // namespace

Eigen::MatrixXd project(const ModelParams& params, std::size_t num_nodes, const RawFeatures& features) {
  Eigen::MatrixXd h0 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(params.d_g()), static_cast<Eigen::Index>(num_nodes));
  for (std::size_t k = 0; k < kNumNodeKinds; ++k) {
    const auto& nodes = features.nodes[k];
    if (nodes.empty()) continue;
    const auto kind = static_cast<NodeKind>(k);
    const auto& w = params.proj_w(kind);
    if (features.values[k].rows() != w.cols() || static_cast<std::size_t>(features.values[k].cols()) != nodes.size())
      throw DataError("feature block of kind " + std::string(node_kind_name(kind)) + " has the wrong shape");
    Eigen::MatrixXd block = w * features.values[k];
    block.colwise() += params.proj_b(kind).col(0);
    for (std::size_t c = 0; c < nodes.size(); ++c) {
      if (nodes[c] >= num_nodes) throw DataError("feature refers to a node outside the subgraph");
      h0.col(nodes[c]) = block.col(static_cast<Eigen::Index>(c));
    }
  }
  check_finite(h0, "input projection");
  return h0;
}

ForwardState propagate(const ModelParams& params, const PropagationPlan& plan, Eigen::MatrixXd h0) {
  if (static_cast<std::size_t>(h0.rows()) != params.d_g()) throw DataError("hidden state width differs from d_g");
  ForwardState st;
  st.h.push_back(std::move(h0));
  for (std::size_t l = 0; l < params.layers(); ++l) {
    const Eigen::MatrixXd& h = st.h.back();
    Eigen::MatrixXd pre = params.self_w(l) * h;
    for (std::size_t r = 0; r < kNumRelations; ++r) {
      const auto& p = plan[r];
      if (p.targets.empty()) continue;
      const Eigen::MatrixXd msg = params.rel_w(l, static_cast<Relation>(r)) * aggregate(p, h);
      for (std::size_t t = 0; t < p.targets.size(); ++t) pre.col(p.targets[t]) += msg.col(static_cast<Eigen::Index>(t));
    }
    check_finite(pre, "layer " + std::to_string(l));
    Eigen::MatrixXd next = pre.cwiseMax(0.0);
    st.pre.push_back(std::move(pre));
    st.h.push_back(std::move(next));
  }
  return st;
}

ForwardState forward(const ModelParams& params, const Subgraph& sg, const RawFeatures& features) {
  return propagate(params, make_plan(sg), project(params, sg.size(), features));
}

double head_predict(const Eigen::Ref<const Eigen::VectorXd>& fprime, const ModelParams& params) {
  if (static_cast<std::size_t>(fprime.size()) != params.d_g()) throw DataError("head input width differs from d_g");
  const double z = params.head_w().row(0).dot(fprime) + params.head_b();
  return 9.0 * sigmoid(z);
}

double smooth_l1(double yhat, double y, double beta) {
  const double d = yhat - y, a = std::abs(d);
  return a < beta ? 0.5 * d * d / beta : a - 0.5 * beta;
}

double smooth_l1_grad(double yhat, double y, double beta) {
  const double d = yhat - y;
  if (std::abs(d) < beta) return d / beta;
  return d > 0 ? 1.0 : -1.0;
}

std::vector<double> batch_labels(const Subgraph& sg) {
  std::vector<double> out;
  out.reserve(sg.labels.size());
  for (std::size_t b = 0; b < sg.labels.size(); ++b) {
    if (!sg.labels[b]) throw DataError("batch node " + std::to_string(sg.nodes[sg.batch[b]]) + " has no label");
    out.push_back(static_cast<double>(*sg.labels[b]));
  }
  return out;
}

LossResult batch_loss(const ModelParams& params, const Subgraph& sg, const ForwardState& state,
                      std::span<const double> labels, double beta) {
  if (labels.size() != sg.batch.size()) throw DataError("label count differs from batch size");
  if (sg.batch.empty()) throw DataError("empty batch");
  LossResult res;
  for (std::size_t b = 0; b < sg.batch.size(); ++b) {
    const double yhat = head_predict(state.output().col(sg.batch[b]), params);
    res.predictions.push_back(yhat);
    res.loss += smooth_l1(yhat, labels[b], beta);
  }
  res.loss /= static_cast<double>(sg.batch.size());
  if (!std::isfinite(res.loss)) throw NumericError("non-finite loss");
  return res;
}

GradientBuffers backward(const ModelParams& params, const Subgraph& sg, const RawFeatures& features,
                         const PropagationPlan& plan, const ForwardState& state, std::span<const double> labels,
                         double beta) {
  if (labels.size() != sg.batch.size()) throw DataError("label count differs from batch size");
  if (sg.batch.empty()) throw DataError("empty batch");
  const std::size_t L = params.layers();
  GradientBuffers g = ModelParams::zeros(params.d_g(), L);
  const double inv_b = 1.0 / static_cast<double>(sg.batch.size());

  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(state.output().rows(), state.output().cols());
  for (std::size_t b = 0; b < sg.batch.size(); ++b) {
    const auto col = state.output().col(sg.batch[b]);
    const double s = sigmoid(params.head_w().row(0).dot(col) + params.head_b());
    const double yhat = 9.0 * s;
    const double dz = inv_b * smooth_l1_grad(yhat, labels[b], beta) * 9.0 * s * (1.0 - s);
    g.head_w().row(0) += dz * col.transpose();
    g.head_b() += dz;
    dh.col(sg.batch[b]) += dz * params.head_w().row(0).transpose();
  }

  for (std::size_t l = L; l-- > 0;) {
    const Eigen::MatrixXd& h = state.h[l];
    const Eigen::MatrixXd dpre = dh.cwiseProduct((state.pre[l].array() > 0.0).cast<double>().matrix());
    g.self_w(l).noalias() += dpre * h.transpose();
    Eigen::MatrixXd dprev = params.self_w(l).transpose() * dpre;
    for (std::size_t r = 0; r < kNumRelations; ++r) {
      const auto& p = plan[r];
      if (p.targets.empty()) continue;
      Eigen::MatrixXd dt(dpre.rows(), static_cast<Eigen::Index>(p.targets.size()));
      for (std::size_t t = 0; t < p.targets.size(); ++t) dt.col(static_cast<Eigen::Index>(t)) = dpre.col(p.targets[t]);
      const auto rel = static_cast<Relation>(r);
      g.rel_w(l, rel).noalias() += dt * aggregate(p, h).transpose();
      const Eigen::MatrixXd dagg = params.rel_w(l, rel).transpose() * dt;
      for (std::size_t t = 0; t < p.targets.size(); ++t) {
        const double inv_c = 1.0 / static_cast<double>(p.offsets[t + 1] - p.offsets[t]);
        for (auto s = p.offsets[t]; s < p.offsets[t + 1]; ++s)
          dprev.col(p.sources[s]) += inv_c * dagg.col(static_cast<Eigen::Index>(t));
      }
    }
    dh = std::move(dprev);
  }

  for (std::size_t k = 0; k < kNumNodeKinds; ++k) {
    const auto& nodes = features.nodes[k];
    if (nodes.empty()) continue;
    Eigen::MatrixXd dk(dh.rows(), static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t c = 0; c < nodes.size(); ++c) dk.col(static_cast<Eigen::Index>(c)) = dh.col(nodes[c]);
    const auto kind = static_cast<NodeKind>(k);
    g.proj_w(kind).noalias() += dk * features.values[k].transpose();
    g.proj_b(kind).col(0) += dk.rowwise().sum();
  }

  for (std::size_t i = 0; i < g.num_tensors(); ++i)
    if (!g.tensor(i).allFinite()) throw NumericError("non-finite gradient in tensor " + g.tensor_name(i));
  return g;
}

// ---------------------------------------------------------------------------

OptimizerState OptimizerState::init(const ModelParams& params, AdamConfig config) {
  OptimizerState s;
  s.config = config;
  s.m = ModelParams::zeros(params.d_g(), params.layers());
  s.v = s.m;
  return s;
}

void step(ModelParams& params, const GradientBuffers& grads, OptimizerState& state) {
  if (grads.d_g() != params.d_g() || grads.layers() != params.layers() || state.m.d_g() != params.d_g() ||
      state.m.layers() != params.layers())
    throw DataError("optimizer step: tensor shapes do not match");
  const auto& c = state.config;
  ++state.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.num_tensors(); ++i) {
    auto& m = state.m.tensor(i);
    auto& v = state.v.tensor(i);
    const auto& g = grads.tensor(i);
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    params.tensor(i).array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  }
}

// ---------------------------------------------------------------------------

std::string serialize_params(const ModelParams& params) {
  ByteWriter w;
  w.put_bytes(std::string_view(kParamsMagic, 8));
  w.put<std::uint32_t>(kParamsVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.num_tensors()));
  w.put<std::uint64_t>(params.d_g());
  w.put<std::uint64_t>(params.layers());
  for (std::size_t i = 0; i < params.num_tensors(); ++i) {
    const std::string name = params.tensor_name(i);
    const auto& t = params.tensor(i);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(t.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(t.cols()));
    w.put_bytes(std::string_view(reinterpret_cast<const char*>(t.data()), static_cast<std::size_t>(t.size()) * 8));
  }
  return w.bytes();
}

ModelParams deserialize_params(std::string_view bytes) {
  ByteReader rd(bytes);
  if (rd.remaining() < 8 || std::memcmp(rd.take(8).data(), kParamsMagic, 8) != 0)
    throw IoError("parameter file: bad magic (unsupported version or not a parameter file)");
  const auto version = rd.get<std::uint32_t>();
  if (version != kParamsVersion) throw IoError("parameter file: unsupported version " + std::to_string(version));
  const auto n = rd.get<std::uint32_t>();
  const auto d_g = rd.get<std::uint64_t>();
  const auto layers = rd.get<std::uint64_t>();
  if (d_g == 0 || d_g > (1u << 16) || layers == 0 || layers > 64) throw IoError("parameter file: implausible shape header");
  ModelParams p = ModelParams::zeros(d_g, layers);
  if (n != p.num_tensors()) throw IoError("parameter file: tensor count mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    const auto len = rd.get<std::uint32_t>();
    const std::string name(rd.take(len));
    if (name != p.tensor_name(i)) throw IoError("parameter file: expected tensor '" + p.tensor_name(i) + "', found '" + name + "'");
    const auto rows = rd.get<std::uint64_t>();
    const auto cols = rd.get<std::uint64_t>();
    auto& t = p.tensor(i);
    if (rows != static_cast<std::uint64_t>(t.rows()) || cols != static_cast<std::uint64_t>(t.cols()))
      throw IoError("parameter file: tensor '" + name + "' has the wrong shape");
    const auto raw = rd.take(static_cast<std::size_t>(t.size()) * 8);
    std::memcpy(t.data(), raw.data(), raw.size());
  }
  if (rd.remaining() != 0) throw IoError("parameter file: trailing bytes");
  if (!p.all_finite()) throw IoError("parameter file: non-finite values");
  return p;
}

void save_params(const ModelParams& params, const std::string& path) { write_file(path, serialize_params(params)); }
ModelParams load_params(const std::string& path) { return deserialize_params(read_file(path)); }

}  // namespace vidprop
