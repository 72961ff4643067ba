#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "testing.hpp"
#include "vidprop/rgcn.hpp"

using namespace vidprop;

namespace {

PropagationPlan empty_plan() { return make_plan(Subgraph{}); }

/// Two nodes, one edge 1 -> 0 under `r`.
Subgraph pair_subgraph(Relation r) {
  Subgraph sg;
  sg.nodes = {0, 1};
  sg.kinds = {NodeKind::Video, NodeKind::Video};
  sg.edges[static_cast<std::size_t>(r)].push_back({1, 0});
  sg.batch = {0};
  sg.labels = {3};
  return sg;
}

}  // namespace

TEST_CASE("parameter layout") {
  auto p = ModelParams::zeros(4, 2);
  CHECK(p.num_tensors() == 15 + 15 + 2 * 18 + 2);
  CHECK(p.tensor_name(0) == "proj_w.video");
  CHECK(p.proj_w(NodeKind::Video).cols() == 3584);
  CHECK(p.proj_w(NodeKind::Comment).cols() == 1536);
  CHECK(p.tensor_name(15) == "proj_b.video");
  CHECK(p.tensor_name(30) == "layer0.rel_w.is_platform_of");
  CHECK(p.tensor_name(47) == "layer0.self_w");
  CHECK(p.tensor_name(48) == "layer1.rel_w.is_platform_of");
  CHECK(p.tensor_name(p.num_tensors() - 2) == "head_w");
  CHECK(&p.self_w(1) == &p.tensor(65));
  CHECK(&p.rel_w(1, Relation::IsHistoryOf) == &p.tensor(64));
}

TEST_CASE("glorot init is seeded and bounded") {
  RgcnConfig c;
  c.d_g = 8;
  c.seed = 5;
  auto a = ModelParams::init(c), b = ModelParams::init(c);
  CHECK(a == b);
  c.seed = 6;
  CHECK_FALSE(a == ModelParams::init(c));
  for (std::size_t i = 0; i < a.num_tensors(); ++i) {
    const auto& t = a.tensor(i);
    const bool bias = (i >= kNumNodeKinds && i < 2 * kNumNodeKinds) || i == a.num_tensors() - 1;
    if (bias) {
      CHECK(t.isZero(0));
    } else {
      const double bound = std::sqrt(6.0 / double(t.rows() + t.cols()));
      CHECK(t.cwiseAbs().maxCoeff() <= bound);
      CHECK(t.cwiseAbs().maxCoeff() > 0.5 * bound);
    }
  }
  c.d_g = 0;
  CHECK_THROWS_AS(ModelParams::init(c), ConfigError);
}

TEST_CASE("isolated node with identity self weight passes non-negative input through") {
  auto p = ModelParams::zeros(4, 1);
  p.self_w(0).setIdentity();
  Eigen::MatrixXd h0(4, 1);
  h0 << 0.5, 0.0, 2.0, 7.25;
  auto st = propagate(p, empty_plan(), h0);
  CHECK(st.output() == h0);
}

TEST_CASE("single in-neighbor with identity relation weight") {
  auto p = ModelParams::zeros(4, 1);
  p.rel_w(0, Relation::IsHistoryOf).setIdentity();
  Eigen::MatrixXd h0(4, 2);
  h0.col(0) << 9, 9, 9, 9;
  h0.col(1) << 1.5, -2.0, 0.0, 3.0;
  auto st = propagate(p, make_plan(pair_subgraph(Relation::IsHistoryOf)), h0);
  Eigen::VectorXd expect(4);
  expect << 1.5, 0.0, 0.0, 3.0;
  CHECK(st.output().col(0) == expect);
  CHECK(st.output().col(1).isZero(0));
  CHECK(st.output().rows() == 4);
}

TEST_CASE("relation aggregation is a mean") {
  auto p = ModelParams::zeros(2, 1);
  p.rel_w(0, Relation::HasSameTopicAs).setIdentity();
  Subgraph sg;
  sg.nodes = {0, 1, 2};
  sg.kinds = {NodeKind::Video, NodeKind::Video, NodeKind::Video};
  sg.edges[static_cast<std::size_t>(Relation::HasSameTopicAs)] = {{1, 0}, {2, 0}};
  Eigen::MatrixXd h0(2, 3);
  h0 << 0, 2, 4, 0, 6, 10;
  auto st = propagate(p, make_plan(sg), h0);
  CHECK(st.output()(0, 0) == 3.0);
  CHECK(st.output()(1, 0) == 8.0);
}

TEST_CASE("forward is invariant to edge order") {
  auto rs = testing::random_subgraph(1, 30);
  RgcnConfig c;
  c.d_g = 8;
  auto p = ModelParams::init(c);
  auto a = forward(p, rs.sg, rs.features);
  auto sg2 = rs.sg;
  for (auto& e : sg2.edges) std::reverse(e.begin(), e.end());
  auto b = forward(p, sg2, rs.features);
  CHECK(a.output() == b.output());
}

TEST_CASE("head") {
  auto p = ModelParams::zeros(3, 1);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(3);
  CHECK(head_predict(f, p) == 4.5);
  p.head_b() = 20;
  CHECK(head_predict(f, p) < 9.0);
  p.head_b() = 800;
  CHECK(head_predict(f, p) <= 9.0);
  p.head_b() = -800;
  CHECK(head_predict(f, p) >= 0.0);
  p.head_b() = std::log(3.0);
  CHECK(head_predict(f, p) == doctest::Approx(6.75).epsilon(1e-14));
  CHECK_THROWS_AS(head_predict(Eigen::VectorXd::Zero(2), p), DataError);
}

TEST_CASE("smooth l1") {
  CHECK(smooth_l1(4.0, 4.0) == 0.0);
  CHECK(smooth_l1(3.5, 3.0) == 0.125);
  CHECK(smooth_l1(0.0, 3.0) == 2.5);
  CHECK(smooth_l1(6.0, 3.0) == 2.5);
  CHECK(smooth_l1_grad(3.5, 3.0) == 0.5);
  CHECK(smooth_l1_grad(9.0, 3.0) == 1.0);
  CHECK(smooth_l1_grad(0.0, 3.0) == -1.0);
  // Continuity at the transition.
  CHECK(smooth_l1(4.0, 3.0) == 0.5);
  CHECK(smooth_l1(4.0 + 1e-12, 3.0) == doctest::Approx(0.5));
}

TEST_CASE("backward at a perfect prediction is zero") {
  auto p = ModelParams::zeros(2, 1);
  auto sg = pair_subgraph(Relation::IsHistoryOf);
  RawFeatures f = gather_features(sg, [](NodeId) -> const Eigen::VectorXd& {
    static const Eigen::VectorXd v = Eigen::VectorXd::Constant(3584, 0.01);
    return v;
  });
  auto plan = make_plan(sg);
  auto st = propagate(p, plan, project(p, sg.size(), f));
  std::vector<double> y = {4.5};
  auto g = backward(p, sg, f, plan, st, y);
  CHECK(g.head_b() == 0.0);
  CHECK(g.head_w().isZero(0));
}

TEST_CASE("head bias gradient by hand at d_g = 2") {
  auto p = ModelParams::zeros(2, 1);
  p.self_w(0).setIdentity();
  p.proj_b(NodeKind::Video) << 0.3, 0.8;
  p.head_w() << 0.5, -0.25;
  p.head_b() = 0.1;
  Subgraph sg;
  sg.nodes = {0};
  sg.kinds = {NodeKind::Video};
  sg.batch = {0};
  sg.labels = {6};
  RawFeatures f = gather_features(sg, [](NodeId) -> const Eigen::VectorXd& {
    static const Eigen::VectorXd v = Eigen::VectorXd::Zero(3584);
    return v;
  });
  auto plan = make_plan(sg);
  auto st = propagate(p, plan, project(p, 1, f));
  std::vector<double> y = {6.0};
  auto g = backward(p, sg, f, plan, st, y);
  // f' = (0.3, 0.8), z = 0.15 - 0.2 + 0.1 = 0.05, yhat = 9 sigma(z) ~ 4.612 so |d| > 1.
  const double z = 0.05, s = 1.0 / (1.0 + std::exp(-z));
  const double expect = -1.0 * 9.0 * s * (1.0 - s);
  CHECK(g.head_b() == doctest::Approx(expect).epsilon(1e-14));
  CHECK(g.head_w()(0, 0) == doctest::Approx(expect * 0.3).epsilon(1e-14));
  CHECK(g.proj_b(NodeKind::Video)(1, 0) == doctest::Approx(expect * -0.25).epsilon(1e-14));
}

TEST_CASE("gradients match finite differences on a random subgraph") {
  RgcnConfig c;
  c.d_g = 8;
  c.seed = 11;
  auto p = ModelParams::init(c);
  auto rs = testing::random_subgraph(20, 20);
  auto r = testing::grad_check(p, rs, 1.0, 1e-4, 1e-6);
  INFO(r.worst);
  CHECK(r.max_rel_err < 1e-4);
  CHECK(r.checked > 0);
  CHECK(double(r.excluded) < 0.01 * double(r.checked + r.excluded));
}

TEST_CASE("adam") {
  SUBCASE("zero gradients leave parameters unchanged") {
    RgcnConfig c;
    c.d_g = 2;
    auto p = ModelParams::init(c);
    auto before = p;
    auto st = OptimizerState::init(p);
    step(p, ModelParams::zeros(2, 2), st);
    CHECK(p == before);
  }
  SUBCASE("first step by hand") {
    auto p = ModelParams::zeros(1, 1);
    p.head_b() = 2.0;
    auto g = ModelParams::zeros(1, 1);
    g.head_b() = 0.5;
    auto st = OptimizerState::init(p);
    step(p, g, st);
    // m = 0.05, v = 0.00025; corrected 0.5 and 0.25.
    const double expect = 2.0 - 1e-3 * 0.5 / (std::sqrt(0.25) + 1e-8);
    CHECK(p.head_b() == doctest::Approx(expect).epsilon(1e-15));
    // Second step with the same gradient.
    step(p, g, st);
    const double m = 0.9 * 0.05 + 0.1 * 0.5, v = 0.999 * 0.00025 + 0.001 * 0.25;
    const double expect2 = expect - 1e-3 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
    CHECK(p.head_b() == doctest::Approx(expect2).epsilon(1e-14));
  }
  SUBCASE("quadratic objective decreases monotonically") {
    auto p = ModelParams::zeros(1, 1);
    auto st = OptimizerState::init(p, {0.01, 0.9, 0.999, 1e-8});
    double prev = INFINITY;
    for (int i = 0; i < 100; ++i) {
      const double x = p.head_b();
      const double obj = (x - 3.0) * (x - 3.0);
      CHECK(obj < prev);
      prev = obj;
      auto g = ModelParams::zeros(1, 1);
      g.head_b() = 2.0 * (x - 3.0);
      step(p, g, st);
    }
  }
  SUBCASE("shape mismatch") {
    auto p = ModelParams::zeros(2, 1);
    auto st = OptimizerState::init(p);
    CHECK_THROWS_AS(step(p, ModelParams::zeros(3, 1), st), DataError);
  }
}

TEST_CASE("parameter files") {
  RgcnConfig c;
  c.d_g = 4;
  c.seed = 2;
  auto p = ModelParams::init(c);
  auto bytes = serialize_params(p);
  CHECK(bytes.substr(0, 8) == "VPRGCN01");
  auto back = deserialize_params(bytes);
  CHECK(back == p);
  CHECK(serialize_params(back) == bytes);

  auto bad = bytes;
  bad[8] = 2;  // version
  CHECK_THROWS_AS(deserialize_params(bad), IoError);
  bad = bytes;
  bad[0] = 'Z';
  CHECK_THROWS_AS(deserialize_params(bad), IoError);
  CHECK_THROWS_AS(deserialize_params(bytes.substr(0, bytes.size() - 8)), IoError);
  CHECK_THROWS_AS(deserialize_params(bytes + std::string(1, '\0')), IoError);

  CHECK_NOTHROW(back.check_shape(4, 2));
  CHECK_THROWS_AS(back.check_shape(8, 2), DataError);

  testing::TempDir dir("params");
  save_params(p, dir.file("p.bin"));
  CHECK(load_params(dir.file("p.bin")) == p);
}
