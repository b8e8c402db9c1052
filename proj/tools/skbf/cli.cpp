#include "skbf/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "skbf/config.hpp"
#include "skbf/errors.hpp"
#include "skbf/eval.hpp"
#include "skbf/io.hpp"
#include "skbf/llm_gateway.hpp"
#include "skbf/pipeline.hpp"
#include "skbf/skb.hpp"
#include "skbf/trace.hpp"
#include "skbf/vector_search.hpp"

namespace skbf::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct CommonFlags {
  std::string skb;
  std::string config;
  std::string index;
  std::optional<std::size_t> k_max;
  std::string mode_out;
  std::string mode_in;
  std::string replay;
  std::string record;
  std::optional<std::size_t> parallel;
  std::optional<bool> prefilter;
  std::vector<std::string> settings;  // key=value overrides
};

void add_pipeline_flags(CLI::App& cmd, CommonFlags& f) {
  cmd.add_option("--config", f.config, "Pipeline configuration file")->check(CLI::ExistingFile);
  cmd.add_option("--index", f.index,
                 "Embedding index from `skbf embed` (built in memory when absent)");
  cmd.add_option("--k-max", f.k_max, "Number of candidates passed to the reranker")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--edge-type-mode-out", f.mode_out, "Outgoing neighbor lookups: strict|relaxed")
      ->check(CLI::IsMember({"strict", "relaxed"}, CLI::ignore_case));
  cmd.add_option("--edge-type-mode-in", f.mode_in, "Incoming neighbor lookups: strict|relaxed")
      ->check(CLI::IsMember({"strict", "relaxed"}, CLI::ignore_case));
  auto* replay = cmd.add_option("--replay", f.replay, "Answer LLM calls from this transcript only")
                     ->check(CLI::ExistingFile);
  auto* record =
      cmd.add_option("--record", f.record, "Call the configured provider and save a transcript");
  replay->excludes(record);
  cmd.add_option("--prefilter", f.prefilter, "Enable triplet prefiltering (true|false)");
  cmd.add_option("--set", f.settings,
                 "Override a configuration key, e.g. --set rerank.parallelism=4");
}

PipelineConfig resolve_config(const CommonFlags& f) {
  PipelineConfig config = f.config.empty() ? PipelineConfig{} : load_config(f.config);
  for (const auto& s : f.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
  }
  if (f.k_max) config.k_max = *f.k_max;
  if (!f.mode_out.empty()) apply_setting(config, "filter.mode_out", f.mode_out);
  if (!f.mode_in.empty()) apply_setting(config, "filter.mode_in", f.mode_in);
  if (f.parallel) config.parallel = *f.parallel;
  if (f.prefilter) config.prefilter = *f.prefilter;
  config.validate();
  return config;
}

// Owns everything a pipeline run needs and saves the transcript on success.
struct Session {
  std::optional<SemiStructuredKB> skb;
  std::unique_ptr<Embedder> embedder;
  std::optional<EmbeddingIndex> index;
  std::unique_ptr<LLMProvider> provider;
  std::optional<LLMGateway> gateway;
  std::string record_path;

  Retrieval retrieval() { return Retrieval{*skb, *index, *embedder}; }

  void finish() {
    if (!record_path.empty()) gateway->transcript().save(record_path);
  }
};

void open_session(Session& s, const CommonFlags& f, const PipelineConfig& config,
                  std::ostream& err) {
  s.skb = SemiStructuredKB::load_directory(f.skb);
  s.embedder = make_embedder(config.embedder);
  if (!f.index.empty()) {
    s.index = EmbeddingIndex::load(f.index);
    if (s.index->embedder_tag() != s.embedder->tag()) {
      throw ConfigError("index " + f.index + " was built with '" + s.index->embedder_tag() +
                        "', configuration selects '" + s.embedder->tag() + "'");
    }
  } else {
    s.index = EmbeddingIndex::build(*s.skb, *s.embedder);
  }

  GatewayOptions options;
  options.max_attempts = config.max_attempts;
  options.requests_per_minute = config.requests_per_minute;
  if (!f.replay.empty()) {
    options.mode = GatewayMode::Replay;
    s.gateway.emplace(Transcript::load(f.replay), options);
  } else {
    s.provider = provider_from_environment();
    options.mode = f.record.empty() ? GatewayMode::Live : GatewayMode::Record;
    s.record_path = f.record;
    s.gateway.emplace(*s.provider, options);
    err << "using live provider " << s.provider->name() << "\n";
  }
}

void print_ranking(std::ostream& out, const SemiStructuredKB& skb, const RankedAnswers& answers) {
  for (std::size_t i = 0; i < answers.entries.size(); ++i) {
    const auto& e = answers.entries[i];
    out << i + 1 << "\t" << e.node.str() << "\t" << skb.node(e.node).canonical_name() << "\t"
        << to_string(e.block) << "\n";
  }
}

int cmd_ingest(const std::string& skb_dir, const std::string& out_dir, std::ostream& out) {
  const SemiStructuredKB skb = SemiStructuredKB::load_directory(skb_dir);
  out << "nodes: " << skb.node_count() << "\nedges: " << skb.edge_count()
      << "\ncandidates: " << skb.candidate_pool().size()
      << "\nnode types: " << skb.schema().node_types.size()
      << "\nedge types: " << skb.schema().edge_types.size() << "\n";
  if (out_dir.empty()) return kExitOk;

  // Normalized copies: one edge line per stored (directed) edge.
  std::ostringstream nodes;
  for (const Node& n : skb.nodes()) {
    json j = {{"id", n.id.str()},
              {"type", n.node_type},
              {"aliases", n.aliases},
              {"document", n.document ? json(*n.document) : json(nullptr)},
              {"is_candidate", n.is_candidate}};
    nodes << j.dump() << "\n";
  }
  std::ostringstream edges;
  for (const Edge& e : skb.edges()) {
    json j = {{"head", e.head.str()}, {"type", e.edge_type}, {"tail", e.tail.str()}};
    if (e.weight) j["weight"] = *e.weight;
    edges << j.dump() << "\n";
  }
  io::write_file_atomic((fs::path(out_dir) / "nodes.jsonl").string(), nodes.str());
  io::write_file_atomic((fs::path(out_dir) / "edges.jsonl").string(), edges.str());
  out << "wrote " << out_dir << "\n";
  return kExitOk;
}

int cmd_embed(const std::string& skb_dir, const std::string& out_path,
              const std::string& cache_path, const std::string& embedder_name, std::ostream& out) {
  const SemiStructuredKB skb = SemiStructuredKB::load_directory(skb_dir);
  auto embedder = make_embedder(embedder_name);
  std::optional<EmbeddingIndex> cache;
  const std::string from = cache_path.empty() ? out_path : cache_path;
  if (fs::exists(from)) cache = EmbeddingIndex::load(from);
  std::size_t reused = 0;
  const EmbeddingIndex index =
      EmbeddingIndex::build(skb, *embedder, cache ? &*cache : nullptr, &reused);
  index.save(out_path);
  out << "embedded " << index.size() - reused << " candidates, reused " << reused << ", wrote "
      << out_path << "\n";
  return kExitOk;
}

int cmd_query(const CommonFlags& f, const std::string& question, const std::string& trace_out,
              bool as_json, std::ostream& out, std::ostream& err) {
  const PipelineConfig config = resolve_config(f);
  Session s;
  open_session(s, f, config, err);
  const Answer a = answer(s.retrieval(), *s.gateway, config, question);
  s.finish();
  if (!trace_out.empty()) io::write_file_atomic(trace_out, serialize_trace(a.trace));
  if (as_json) {
    out << serialize_trace(a.trace);
  } else {
    print_ranking(out, *s.skb, a.answers);
    out << "\n" << render_summary(a.trace, &*s.skb);
  }
  return kExitOk;
}

struct EvalFlags {
  std::string dataset;
  std::string out;
  std::string json_out;
  std::string trace_dir;
  double sample_fraction = 1.0;
  std::uint64_t seed = 0;
};

int cmd_eval(const CommonFlags& f, const EvalFlags& e, std::ostream& out, std::ostream& err) {
  const PipelineConfig config = resolve_config(f);
  Session s;
  open_session(s, f, config, err);
  const auto dataset = load_dataset(e.dataset, &*s.skb);
  EvalOptions options;
  options.parallel = config.parallel;
  options.sample_fraction = e.sample_fraction;
  options.seed = e.seed;
  options.trace_dir = e.trace_dir;
  const MetricReport report = evaluate(s.retrieval(), *s.gateway, config, dataset, options);
  s.finish();

  const std::string csv = report_csv(report);
  if (!e.out.empty()) io::write_file_atomic(e.out, csv);
  if (!e.json_out.empty()) io::write_file_atomic(e.json_out, report_json(report).dump(2) + "\n");
  out << csv;
  for (const auto& row : report.rows) {
    if (!row.error.empty()) err << "query " << row.id << " failed: " << row.error << "\n";
  }
  return kExitOk;
}

int cmd_trace_show(const std::string& path, const std::string& skb_dir, bool as_json,
                   std::ostream& out) {
  const AnswerTrace trace = parse_trace(io::read_file(path));
  if (as_json) {
    out << serialize_trace(trace);
    return kExitOk;
  }
  std::optional<SemiStructuredKB> skb;
  if (!skb_dir.empty()) skb = SemiStructuredKB::load_directory(skb_dir);
  out << render_summary(trace, skb ? &*skb : nullptr);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-base question answering with triplet prefiltering", "skbf"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", "skbf 0.1.0");

  std::string ingest_skb;
  std::string ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Validate node/edge files and print statistics");
  ingest->add_option("--skb", ingest_skb, "Directory with nodes.jsonl and edges.jsonl")
      ->required()
      ->check(CLI::ExistingDirectory);
  ingest->add_option("--out", ingest_out, "Write normalized copies to this directory");

  std::string embed_skb;
  std::string embed_out;
  std::string embed_cache;
  std::string embed_embedder = "hashing";
  auto* embed = app.add_subcommand("embed", "Build or extend the candidate embedding index");
  embed->add_option("--skb", embed_skb, "SKB directory")->required()->check(CLI::ExistingDirectory);
  embed->add_option("--out", embed_out, "Index file to write")->required();
  embed->add_option("--cache", embed_cache, "Existing index to reuse (defaults to --out)");
  embed->add_option("--embedder", embed_embedder, "hashing|http");

  CommonFlags query_flags;
  std::string question;
  std::string trace_out;
  bool query_json = false;
  auto* query = app.add_subcommand("query", "Answer one question and show the evidence trace");
  query->add_option("--skb", query_flags.skb, "SKB directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  query->add_option("--question,-q", question, "Natural-language question")->required();
  query->add_option("--out", trace_out, "Write the JSON trace to this file");
  query->add_flag("--json", query_json, "Print the JSON trace instead of the summary");
  add_pipeline_flags(*query, query_flags);

  CommonFlags eval_flags;
  EvalFlags eval_opts;
  auto* eval = app.add_subcommand("eval", "Evaluate a QA dataset and write metric reports");
  eval->add_option("--skb", eval_flags.skb, "SKB directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--dataset", eval_opts.dataset, "QA JSON Lines file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out", eval_opts.out, "CSV report path");
  eval->add_option("--json-out", eval_opts.json_out, "JSON report path with per-query rows");
  eval->add_option("--trace-dir", eval_opts.trace_dir, "Directory for per-query traces");
  eval->add_option("--parallel", eval_flags.parallel, "Queries evaluated concurrently")
      ->check(CLI::PositiveNumber);
  eval->add_option("--sample-fraction", eval_opts.sample_fraction, "Evaluate a seeded subset")
      ->check(CLI::Range(0.0, 1.0));
  eval->add_option("--seed", eval_opts.seed, "Seed for --sample-fraction");
  add_pipeline_flags(*eval, eval_flags);

  std::string trace_path;
  std::string trace_skb;
  bool trace_json = false;
  auto* trace_show = app.add_subcommand("trace-show", "Pretty-print a stored trace");
  trace_show->add_option("trace", trace_path, "Trace JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  trace_show->add_option("--skb", trace_skb, "SKB directory for entity names");
  trace_show->add_flag("--json", trace_json, "Re-emit the normalized JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_skb, ingest_out, out);
    if (*embed) return cmd_embed(embed_skb, embed_out, embed_cache, embed_embedder, out);
    if (*query) return cmd_query(query_flags, question, trace_out, query_json, out, err);
    if (*eval) return cmd_eval(eval_flags, eval_opts, out, err);
    if (*trace_show) return cmd_trace_show(trace_path, trace_skb, trace_json, out);
  } catch (const Error& e) {
    err << "error [" << e.module() << "]: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"skbf"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace skbf::cli
