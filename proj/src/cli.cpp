#include "vidprop/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "vidprop/align.hpp"
#include "vidprop/annotate.hpp"
#include "vidprop/encode.hpp"
#include "vidprop/instruct.hpp"
#include "vidprop/pipeline.hpp"
#include "vidprop/propgraph.hpp"
#include "vidprop/records.hpp"
#include "vidprop/rgcn.hpp"
#include "vidprop/sampler.hpp"
#include "vidprop/synth.hpp"
#include "vidprop/util.hpp"

namespace vidprop {

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string ablation;
  std::string output_dir = "out";
  std::string input;
  std::string params;
  std::string factors;
  std::string anchor;
  std::string criteria;
  bool strict = false;
  bool dump_subgraph = false;
};

PipelineConfig resolve_config(const Options& o) {
  std::string path = o.config;
  if (path.empty())
    if (const char* env = std::getenv(kConfigEnv); env && *env) path = env;
  PipelineConfig c = (path.empty() || path == "default") ? apply_config({}) : load_config(path);
  if (o.seed) c.set_seed(*o.seed);
  if (!o.ablation.empty()) c.ablation = AblationMask::parse(o.ablation);
  if (!o.criteria.empty()) c.criteria_path = o.criteria;
  if (o.strict) c.strict = true;
  if (o.threads == 0) throw ConfigError("--threads must be >= 1");
  c.train.threads = o.threads;
  return c;
}

std::string in_dir(const Options& o, const std::string& name) { return o.output_dir + "/" + name; }
std::string input_or(const Options& o, const std::string& fallback) {
  return o.input.empty() ? in_dir(o, fallback) : o.input;
}

std::unique_ptr<EmbeddingProvider> make_provider(const PipelineConfig& c) {
  if (c.text_sidecar.empty() != c.video_sidecar.empty())
    throw ConfigError("embed.text_sidecar and embed.video_sidecar must be set together");
  if (!c.text_sidecar.empty())
    return std::make_unique<SidecarProvider>(Sidecar::load(c.text_sidecar), Sidecar::load(c.video_sidecar));
  return stub_provider(c.embed_seed);
}

LevelCriteria criteria_of(const PipelineConfig& c) {
  return c.criteria_path.empty() ? LevelCriteria::defaults() : LevelCriteria::load(c.criteria_path);
}

std::shared_ptr<const Corpus> load_corpus(const std::string& path, const PipelineConfig& c) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("input file '" + path + "' not found");
  return std::make_shared<const Corpus>(parse_corpus(path, c.strict));
}

// Graph, embedding provider and feature cache shared by train, eval and export.
struct Stage1Env {
  std::shared_ptr<const Corpus> corpus;
  std::unique_ptr<PropagationGraph> graph;
  std::unique_ptr<EmbeddingProvider> provider;
  std::unique_ptr<GraphView> view;
  std::unique_ptr<FeatureStore> features;
  Stage1Context ctx;
};

std::unique_ptr<Stage1Env> make_env(const std::string& input, const PipelineConfig& c) {
  auto env = std::make_unique<Stage1Env>();
  env->corpus = load_corpus(input, c);
  env->graph = std::make_unique<PropagationGraph>(PropagationGraph::build(env->corpus));
  env->provider = make_provider(c);
  env->view = std::make_unique<GraphView>(*env->graph, c.ablation);
  env->features = std::make_unique<FeatureStore>(*env->graph, *env->provider, c.ablation);
  env->ctx.view = env->view.get();
  env->ctx.features = env->features.get();
  env->ctx.sampler = c.sampler;
  env->ctx.beta = c.model.beta;
  return env;
}

std::vector<NodeId> labeled_nodes(const PropagationGraph& g, const std::vector<std::string>& ids) {
  std::vector<NodeId> out;
  for (auto id : video_nodes(g, ids))
    if (g.label(id)) out.push_back(id);
  return out;
}

ModelParams load_checked(const std::string& path, const PipelineConfig& c) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("parameter file '" + path + "' not found");
  ModelParams p = load_params(path);
  p.check_shape(c.model.d_g, c.model.layers);
  return p;
}

// --------------------------------------------------------------------------

void cmd_synth(const Options& o, const PipelineConfig& c, std::ostream& out) {
  const SynthResult r = generate_corpus(c.synth);
  std::filesystem::create_directories(o.output_dir);
  write_corpus(r.corpus, in_dir(o, "corpus.jsonl"));
  write_corpus(r.anchor, in_dir(o, "anchor.jsonl"));
  write_file(in_dir(o, "manifest.json"), r.manifest().dump(2) + "\n");
  out << "synth: " << r.corpus.size() << " samples, " << r.truth.size() << " videos, " << r.anchor.size()
      << " anchor samples -> " << o.output_dir << "\n";
}

void cmd_ingest(const Options& o, const PipelineConfig& c, std::ostream& out) {
  const auto corpus = load_corpus(input_or(o, "corpus.jsonl"), c);
  const Corpus clean = dedup_min_gap(*corpus, c.dedup_gap_days);
  const SplitSpec split = split_by_date(clean, c.cutoff);
  std::filesystem::create_directories(o.output_dir);
  write_corpus(clean, in_dir(o, "clean.jsonl"));
  write_file(in_dir(o, "split.json"), split_to_json(split).dump(2) + "\n");
  nlohmann::ordered_json summary{{"input_samples", corpus->size()},
                                 {"kept_samples", clean.size()},
                                 {"train", split.train_ids.size()},
                                 {"test", split.test_ids.size()},
                                 {"cutoff", format_date(c.cutoff)}};
  write_file(in_dir(o, "ingest.json"), summary.dump(2) + "\n");
  out << "ingest: kept " << clean.size() << " of " << corpus->size() << " samples (" << split.train_ids.size()
      << " train / " << split.test_ids.size() << " test)\n";
}

void cmd_build_graph(const Options& o, const PipelineConfig& c, std::ostream& out) {
  const auto corpus = load_corpus(input_or(o, "corpus.jsonl"), c);
  const PropagationGraph g = PropagationGraph::build(corpus);
  std::filesystem::create_directories(o.output_dir);
  g.save_snapshot(in_dir(o, "graph.bin"));
  const EdgeCounts counts = apply_ablation(g, c.ablation).count_edges();
  write_file(in_dir(o, "edge_counts.json"), edge_counts_json(counts).dump(2) + "\n");
  out << "build-graph: " << g.num_nodes() << " nodes\n";
}

void cmd_align(const Options& o, const PipelineConfig& c, std::ostream& out) {
  const std::string path = o.anchor.empty() ? (o.input.empty() ? in_dir(o, "anchor.jsonl") : o.input) : o.anchor;
  const auto anchor = load_corpus(path, c);
  const ScalingFactors f = fit_factors(*anchor);
  std::filesystem::create_directories(o.output_dir);
  f.save(in_dir(o, "factors.json"));
  out << "align: factors for " << f.entries().size() << " platforms\n";
}

void cmd_annotate(const Options& o, const PipelineConfig& c, std::ostream& out) {
  const auto corpus = load_corpus(input_or(o, "corpus.jsonl"), c);
  const std::string fpath = o.factors.empty() ? in_dir(o, "factors.json") : o.factors;
  if (!std::filesystem::is_regular_file(fpath)) throw IoError("factors file '" + fpath + "' not found");
  const Corpus labeled = label_corpus(*corpus, ScalingFactors::load(fpath), criteria_of(c));
  std::filesystem::create_directories(o.output_dir);
  write_corpus(labeled, in_dir(o, "labeled.jsonl"));
  write_file(in_dir(o, "lip.csv"), lip_report_csv(likes_series(labeled)));
  std::array<std::size_t, 10> hist{};
  for (const auto& r : labeled.records()) ++hist[static_cast<std::size_t>(*r.influence_level)];
  std::string csv = "level,count\n";
  for (std::size_t l = 0; l < hist.size(); ++l) csv += std::to_string(l) + "," + std::to_string(hist[l]) + "\n";
  write_file(in_dir(o, "level_hist.csv"), csv);
  out << "annotate: labeled " << labeled.size() << " samples\n";
}

void cmd_train(const Options& o, const PipelineConfig& c, std::ostream& out) {
  auto env = make_env(input_or(o, "corpus.jsonl"), c);
  const SplitSpec split = split_by_date(*env->corpus, c.cutoff);
  const auto train_nodes = labeled_nodes(*env->graph, split.train_ids);
  if (train_nodes.empty()) throw DataError("no labeled training samples before the cutoff");
  ModelParams init = o.params.empty() ? ModelParams::init(c.model) : load_checked(o.params, c);

  std::filesystem::create_directories(o.output_dir);
  if (o.dump_subgraph) {
    BatchIterator it(train_nodes, c.train.batch_size, c.train.seed);
    const Subgraph sg = sample_subgraph(*env->view, it.epoch(0).front(), c.sampler, 0);
    write_file(in_dir(o, "subgraph_debug.json"), sg.to_json().dump(1) + "\n");
  }
  const TrainResult r = train_stage1(env->ctx, train_nodes, std::move(init), c.train, c.optim);
  save_params(r.params, in_dir(o, "params.bin"));
  std::string log;
  for (const auto& row : r.log) log += row.dump() + "\n";
  write_file(in_dir(o, "train_log.jsonl"), log);
  for (auto p : kAllPlatforms)
    write_file(in_dir(o, "convergence_" + std::string(platform_name(p)) + ".csv"), convergence_csv(r.convergence, p));
  nlohmann::ordered_json summary{{"train_samples", train_nodes.size()},
                                 {"steps", r.steps},
                                 {"last_epoch_loss", r.last_epoch_loss},
                                 {"missing_video_refs", env->features->missing_video_refs()},
                                 {"config", c.to_json()}};
  write_file(in_dir(o, "train_summary.json"), summary.dump(2) + "\n");
  out << "train: " << r.steps << " steps, last epoch loss " << r.last_epoch_loss << "\n";
}

void cmd_eval(const Options& o, const PipelineConfig& c, std::ostream& out) {
  auto env = make_env(input_or(o, "corpus.jsonl"), c);
  const ModelParams params = load_checked(o.params.empty() ? in_dir(o, "params.bin") : o.params, c);
  const SplitSpec split = split_by_date(*env->corpus, c.cutoff);
  const auto test_nodes = labeled_nodes(*env->graph, split.test_ids);
  if (test_nodes.empty()) throw DataError("no labeled test samples after the cutoff");
  const auto yhat = predict(env->ctx, params, test_nodes, c.train.batch_size, c.train.eval_epoch);
  const auto preds = make_predictions(*env->graph, test_nodes, yhat);
  const EvalResult res = evaluate_slices(preds);

  std::vector<int> train_labels;
  for (auto id : labeled_nodes(*env->graph, split.train_ids)) train_labels.push_back(*env->graph->label(id));
  nlohmann::ordered_json extra{{"split", "test"}, {"cutoff", format_date(c.cutoff)}, {"ablation", c.ablation.to_string()}};
  if (!train_labels.empty()) {
    const Baselines b = constant_baselines(train_labels, preds);
    extra["baselines"] = {{"median_label", b.median_label},
                          {"median", metrics_json(b.median)},
                          {"majority_label", b.majority_label},
                          {"majority", metrics_json(b.majority)}};
  }
  emit_report(res, preds, o.output_dir, extra);
  out << "eval: n=" << res.overall.n << " acc=" << fmt_real(res.overall.acc) << " mse=" << fmt_real(res.overall.mse)
      << " mae=" << fmt_real(res.overall.mae) << "\n";
}

void cmd_export(const Options& o, const PipelineConfig& c, std::ostream& out) {
  auto env = make_env(input_or(o, "corpus.jsonl"), c);
  const ModelParams params = load_checked(o.params.empty() ? in_dir(o, "params.bin") : o.params, c);
  std::vector<std::string> ids;
  std::vector<NodeId> nodes;
  for (std::size_t i = 0; i < env->corpus->size(); ++i) {
    const auto& r = (*env->corpus)[i];
    if (!r.influence_level) continue;
    ids.push_back(r.sample_id);
    nodes.push_back(*env->graph->video_node(r.sample_id));
  }
  if (ids.empty()) throw DataError("no labeled samples to export");
  const TokenBudget budget{c.instruct.max_tokens, approx_token_count};
  std::vector<InstructionPair> pairs;
  for (const auto& id : ids) {
    const auto& r = (*env->corpus)[*env->corpus->find(id)];
    pairs.push_back(truncate(render_pair(r, *r.influence_level, c.instruct.comment_cap, c.instruct.seed), budget));
  }
  const Eigen::MatrixXd states = embed_nodes(env->ctx, params, nodes, c.train.batch_size, c.train.eval_epoch);
  std::filesystem::create_directories(o.output_dir);
  write_file(in_dir(o, "instructions.jsonl"), instructions_jsonl(pairs));
  graph_sidecar(ids, states).save(in_dir(o, "sidecar.bin"));
  out << "export-instructions: " << pairs.size() << " pairs\n";
}

void cmd_stats(const Options& o, const PipelineConfig& c, std::ostream& out) {
  const auto corpus = load_corpus(input_or(o, "corpus.jsonl"), c);
  const CorpusStats s = corpus_stats(*corpus);
  std::filesystem::create_directories(o.output_dir);
  write_stats(s, o.output_dir);
  out << "stats: " << s.n_records << " samples, " << s.n_videos << " videos\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Short-video propagation graph toolkit", "vidprop"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "Config file (TOML-style); 'default' for built-in defaults");
  app.add_option("--seed", o.seed, "Override every seed");
  app.add_option("--threads", o.threads, "Worker cap; 1 is the reference path");
  app.add_option("--ablation", o.ablation, "Comma-separated subset of v,vv,iv,cv");
  app.add_option("--output-dir", o.output_dir, "Directory for outputs (and default inputs)");
  app.add_option("--input", o.input, "Input corpus (JSON lines)");
  app.add_option("--params", o.params, "Parameter file");
  app.add_option("--factors", o.factors, "Scaling factor file");
  app.add_option("--anchor", o.anchor, "Anchor corpus for factor fitting");
  app.add_option("--criteria", o.criteria, "Level criteria override (JSON)");
  app.add_flag("--strict", o.strict, "Reject unknown fields in input records");

  using Handler = void (*)(const Options&, const PipelineConfig&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
      {"synth", "Generate a labeled synthetic corpus, anchor corpus and manifest", cmd_synth},
      {"ingest", "Validate, deduplicate and split a corpus", cmd_ingest},
      {"build-graph", "Build the propagation graph snapshot and edge counts", cmd_build_graph},
      {"align", "Fit cross-platform scaling factors from an anchor corpus", cmd_align},
      {"annotate", "Assign influence levels and write the LIP table", cmd_annotate},
      {"train", "Train the stage-1 model", cmd_train},
      {"eval", "Evaluate the stage-1 model on the test split", cmd_eval},
      {"export-instructions", "Render instruction pairs and the graph-state sidecar", cmd_export},
      {"stats", "Corpus statistics", cmd_stats},
  };
  Handler chosen = nullptr;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&chosen, fn = fn] { chosen = fn; });
    if (name == "train") sub->add_flag("--dump-subgraph", o.dump_subgraph, "Write the first sampled batch as JSON");
  }

  std::vector<std::string> argv_store{"vidprop"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    const PipelineConfig cfg = resolve_config(o);
    chosen(o, cfg, out);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUnexpected;
  }
}

}  // namespace vidprop
