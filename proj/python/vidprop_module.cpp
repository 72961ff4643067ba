#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vidprop/align.hpp"
#include "vidprop/annotate.hpp"
#include "vidprop/cli.hpp"
#include "vidprop/encode.hpp"
#include "vidprop/instruct.hpp"
#include "vidprop/pipeline.hpp"
#include "vidprop/propgraph.hpp"
#include "vidprop/records.hpp"
#include "vidprop/rgcn.hpp"
#include "vidprop/synth.hpp"

namespace py = pybind11;
using namespace vidprop;

namespace {

Indicators to_indicators(const std::vector<std::int64_t>& v) {
  if (v.size() != kNumIndicators) throw py::value_error("expected 5 indicators");
  Indicators out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["n"] = m.n;
  d["acc"] = m.acc;
  d["mse"] = m.mse;
  d["mae"] = m.mae;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Propagation graph, alignment, annotation and stage-1 model bindings";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "closed_form_alpha",
      [](const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs) {
        std::vector<AlignmentPair> ps;
        for (const auto& [k, i] : pairs) ps.push_back({Indicator::Views, k, i});
        return closed_form_alpha(ps);
      },
      py::arg("pairs"), "MSPE-optimal factor for (k, i) pairs.");

  m.def(
      "influence_level",
      [](const std::vector<double>& aligned) {
        if (aligned.size() != kNumIndicators) throw py::value_error("expected 5 indicators");
        AlignedIndicators a{};
        std::copy(aligned.begin(), aligned.end(), a.begin());
        return influence_level(a, LevelCriteria::defaults());
      },
      py::arg("aligned"), "Level 0..9 of aligned (views, likes, shares, collects, comments).");

  m.def(
      "align_indicators",
      [](const std::string& platform, const std::vector<std::int64_t>& raw, const std::string& factors_json) {
        auto p = parse_platform(platform);
        if (!p) throw py::value_error("unknown platform");
        const auto f = ScalingFactors::from_json(nlohmann::json::parse(factors_json));
        const auto a = align_indicators(*p, to_indicators(raw), f);
        return std::vector<double>(a.begin(), a.end());
      },
      py::arg("platform"), py::arg("raw"), py::arg("factors_json"));

  m.def("encode_time", &encode_time, py::arg("t"), "512-d sinusoidal encoding of a timestamp in seconds.");
  m.def("encode_scalar", [](std::int64_t v) { return encode_scalar(v)[0]; }, py::arg("v"));
  m.def(
      "stub_text_embedding", [](const std::string& text, std::uint64_t seed) { return StubProvider(seed).text_embed(text); },
      py::arg("text"), py::arg("seed") = 0);

  m.def("smooth_l1", &smooth_l1, py::arg("yhat"), py::arg("y"), py::arg("beta") = 1.0);

  m.def(
      "evaluate",
      [](const std::vector<double>& yhat, const std::vector<int>& y) {
        if (yhat.size() != y.size()) throw py::value_error("length mismatch");
        std::vector<Prediction> ps;
        for (std::size_t i = 0; i < y.size(); ++i) ps.push_back({yhat[i], y[i], Platform::Douyin, 0, {}});
        return metrics_dict(evaluate(ps));
      },
      py::arg("yhat"), py::arg("y"), "ACC / MSE / MAE with round-half-away-from-zero.");

  m.def(
      "edge_counts",
      [](const std::string& corpus_path) {
        auto corpus = std::make_shared<const Corpus>(parse_corpus(corpus_path, false));
        const auto g = PropagationGraph::build(corpus);
        const auto counts = g.count_edges();
        py::dict d;
        for (std::size_t r = 0; r < kNumRelations; ++r)
          d[py::str(std::string(relation_name(static_cast<Relation>(r))))] = counts[r];
        return d;
      },
      py::arg("corpus_path"), "Per-relation edge counts of the graph built from a JSON-lines corpus.");

  m.def(
      "render_prompt",
      [](const std::string& record_json, std::size_t comment_cap, std::uint64_t seed) {
        const SampleRecord r = record_from_json(nlohmann::json::parse(record_json));
        const auto p = render_pair(r, r.influence_level.value_or(0), comment_cap, seed);
        return py::make_tuple(p.prompt, p.response, p.sidecar_key);
      },
      py::arg("record_json"), py::arg("comment_cap") = 50, py::arg("seed") = 0,
      "(prompt, response, sidecar_key) for one record given as JSON.");

  m.def("approx_token_count", [](const std::string& s) { return approx_token_count(s); }, py::arg("text"));

  m.def(
      "synth_corpus",
      [](std::size_t target_samples, std::uint64_t seed) {
        SynthConfig c;
        c.target_samples = target_samples;
        c.seed = seed;
        return serialize_corpus(generate_corpus(c).corpus);
      },
      py::arg("target_samples") = 200, py::arg("seed") = 7, "Synthetic labeled corpus as JSON lines.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one CLI subcommand; returns (exit_code, stdout, stderr).");
}
