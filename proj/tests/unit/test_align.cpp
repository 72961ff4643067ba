#include <doctest.h>

#include <cmath>

#include "testing.hpp"
#include "vidprop/align.hpp"

using namespace vidprop;
using testing::grid_alpha;
using testing::make_record;

namespace {

SampleRecord anchor(const std::string& content, Platform p, Indicators final, double day = 14) {
  auto r = make_record(content + "_" + std::string(platform_name(p)), content + "_" + std::string(platform_name(p)), p,
                       "t", "a", 0, day);
  r.final_indicators = final;
  r.content_id = content;
  return r;
}

}  // namespace

TEST_CASE("closed form on a single pair") {
  std::vector<AlignmentPair> ps = {{Indicator::Views, 9, 3}};
  CHECK(closed_form_alpha(ps) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(std::abs(grid_alpha(ps, 0, 10, 1e-4) - 3.0) <= 1e-4);
}

TEST_CASE("equal values give one") {
  std::vector<AlignmentPair> ps;
  for (int v : {1, 5, 70, 1234}) ps.push_back({Indicator::Likes, v, v});
  CHECK(closed_form_alpha(ps) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mspe_objective(ps, 1.0) == 0.0);
}

TEST_CASE("closed form matches the grid minimizer on random sets") {
  CounterRng rng(2024);
  for (int t = 0; t < 20; ++t) {
    std::vector<AlignmentPair> ps;
    const double a0 = rng.uniform(0.3, 6.0);
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t j = 0; j < n; ++j) {
      const auto i = static_cast<std::int64_t>(rng.below(5000));
      const auto k = static_cast<std::int64_t>(std::llround(a0 * double(i) * rng.uniform(0.7, 1.3)));
      ps.push_back({Indicator::Views, k, i});
    }
    if (std::all_of(ps.begin(), ps.end(), [](const auto& p) { return p.i == 0; })) ps.push_back({Indicator::Views, 3, 1});
    const double closed = closed_form_alpha(ps);
    REQUIRE(closed < 10.0);
    CHECK(std::abs(grid_alpha(ps, 0, 10, 1e-3) - closed) <= 1e-3);
    // The closed form is a minimizer: nudging it never lowers the objective.
    const double v = mspe_objective(ps, closed);
    CHECK(mspe_objective(ps, closed + 1e-6) >= v);
    CHECK(mspe_objective(ps, closed - 1e-6) >= v);
  }
}

TEST_CASE("noisy synthetic pairs recover alpha within 2 percent") {
  CounterRng rng(77);
  std::vector<AlignmentPair> ps;
  for (int j = 0; j < 100; ++j) {
    const auto i = static_cast<std::int64_t>(10 + rng.below(10000));
    const auto k = static_cast<std::int64_t>(std::llround(2.5 * double(i) * (1.0 + rng.uniform(-0.05, 0.05))));
    ps.push_back({Indicator::Views, k, i});
  }
  CHECK(std::abs(closed_form_alpha(ps) / 2.5 - 1.0) < 0.02);
}

TEST_CASE("degenerate pair sets are numeric errors") {
  std::vector<AlignmentPair> none;
  CHECK_THROWS_AS(closed_form_alpha(none), NumericError);
  std::vector<AlignmentPair> zeros = {{Indicator::Views, 5, 0}, {Indicator::Views, 2, 0}};
  CHECK_THROWS_AS(closed_form_alpha(zeros), NumericError);
  std::vector<AlignmentPair> zero_k = {{Indicator::Views, 0, 4}};
  CHECK_THROWS_AS(closed_form_alpha(zero_k), NumericError);
}

TEST_CASE("scaling factor container") {
  ScalingFactors f;
  CHECK(f.at(Platform::Kuaishou, Indicator::Views) == 1.0);
  CHECK_FALSE(f.get(Platform::Douyin, Indicator::Views).has_value());
  CHECK_THROWS_AS(f.at(Platform::Douyin, Indicator::Views), DataError);
  CHECK_THROWS_AS(f.set(Platform::Kuaishou, Indicator::Views, 2.0), DataError);
  CHECK_THROWS_AS(f.set(Platform::Douyin, Indicator::Views, -1.0), DataError);
  f.set(Platform::Douyin, Indicator::Likes, 0.25);
  auto back = ScalingFactors::from_json(nlohmann::json::parse(f.to_json().dump()));
  CHECK(back.entries() == f.entries());
  CHECK_THROWS_AS(ScalingFactors::from_json(nlohmann::json::parse(R"({"Vine": {"views": 1}})")), DataError);
  testing::TempDir dir("factors");
  f.save(dir.file("f.json"));
  CHECK(ScalingFactors::load(dir.file("f.json")).entries() == f.entries());
}

TEST_CASE("fit_factors") {
  SUBCASE("central platform only gives identity entries") {
    Corpus c({anchor("c1", Platform::Kuaishou, {100, 10, 1, 1, 1})});
    auto f = fit_factors(c);
    CHECK(f.entries().size() == 1);
    CHECK(f.has_platform(Platform::Kuaishou));
  }
  SUBCASE("known ratio on likes") {
    std::vector<SampleRecord> rs;
    for (int n = 1; n <= 12; ++n) {
      const std::int64_t likes = 7 * n + 3;
      rs.push_back(anchor("c" + std::to_string(n), Platform::Kuaishou, {100 * n, 4 * likes, n, n, n}));
      rs.push_back(anchor("c" + std::to_string(n), Platform::Xigua, {50 * n, likes, n, n, 0}));
    }
    auto f = fit_factors(Corpus(rs));
    CHECK(std::abs(f.at(Platform::Xigua, Indicator::Likes) - 4.0) < 1e-6);
    CHECK(std::abs(f.at(Platform::Xigua, Indicator::Views) - 2.0) < 1e-6);
    // Comments were never recorded on the other platform, so that entry is absent.
    CHECK_FALSE(f.get(Platform::Xigua, Indicator::Comments).has_value());
    CHECK(f.get(Platform::Xigua, Indicator::Shares).has_value());
  }
  SUBCASE("latest sample of a content per platform wins") {
    std::vector<SampleRecord> rs = {anchor("c", Platform::Kuaishou, {90, 9, 9, 9, 9}),
                                    anchor("c", Platform::Douyin, {1, 1, 1, 1, 1}, 3),
                                    anchor("c", Platform::Douyin, {30, 3, 3, 3, 3}, 14)};
    rs[2].sample_id += "_late";
    auto f = fit_factors(Corpus(rs));
    CHECK(f.at(Platform::Douyin, Indicator::Views) == doctest::Approx(3.0));
  }
}

TEST_CASE("align_indicators") {
  ScalingFactors f;
  for (auto ind : kAllIndicators) f.set(Platform::Douyin, ind, 2.5);
  auto a = align_indicators(Platform::Douyin, {100, 0, 0, 0, 0}, f);
  CHECK(a[0] == 250.0);
  auto k = align_indicators(Platform::Kuaishou, {3, 4, 5, 6, 7}, f);
  CHECK(k == AlignedIndicators{3, 4, 5, 6, 7});
  auto z = align_indicators(Platform::Douyin, {0, 0, 0, 0, 0}, f);
  CHECK(z == AlignedIndicators{0, 0, 0, 0, 0});
  CHECK_THROWS_AS(align_indicators(Platform::Xigua, {1, 1, 1, 1, 1}, f), DataError);
}
