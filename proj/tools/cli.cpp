#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>

#include "cpgraph/dataset.hpp"
#include "cpgraph/graph_io.hpp"
#include "cpgraph/oracles.hpp"
#include "cpgraph/train.hpp"
#include "cpgraph/xcsp3.hpp"

namespace cpg::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

int threads_from_env() {
  const char* v = std::getenv("CPGRAPH_THREADS");
  if (!v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  return end != v && *end == '\0' && n >= 1 && n <= 1024 ? static_cast<int>(n) : 1;
}

namespace {

struct SizeRange {
  int lo = 0, hi = 0;
};

SizeRange parse_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      const int v = std::stoi(s);
      return {v, v};
    }
    const SizeRange r{std::stoi(s.substr(0, dots)), std::stoi(s.substr(dots + 2))};
    if (r.lo > r.hi) throw std::invalid_argument("empty range");
    return r;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("bad size range '" + s + "' (expected N or A..B)");
  }
}

// Line and column (1-based) of a byte offset.
std::string position(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args) : start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["args"] = args;
    j_["versions"] = {{"graph_format", kGraphFormatVersion},
                      {"feature_schema", kFeatureSchemaVersion},
                      {"dataset_format", kDatasetFormatVersion},
                      {"checkpoint", kCheckpointVersion}};
    j_["artifacts"] = json::array();
  }
  json& config() { return j_["config"]; }
  void set(const std::string& key, json value) { j_[key] = std::move(value); }
  void artifact(const std::string& path, std::string_view bytes) {
    j_["artifacts"].push_back({{"path", path}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
  }
  void write(const std::string& path) {
    j_["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_file(path, j_.dump(2) + "\n");
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
};

void write_artifact(Manifest& m, const std::string& path, std::string_view bytes) {
  write_file(path, bytes);
  m.artifact(path, bytes);
}

json stats_json(const EncodedGraph& g) {
  const auto s = graph_stats(g);
  json j;
  for (int t = 0; t < kVertexTypeCount; ++t) j[std::string(type_name(kVertexTypes[t]))] = s.counts[t];
  j["vertices"] = s.vertices();
  j["edges"] = s.edges;
  return j;
}

json metrics_json(const Metrics& m) {
  return {{"examples", m.total},
          {"accuracy", m.accuracy},
          {"mean_loss", m.mean_loss},
          {"confusion", {{"tp", m.true_pos}, {"tn", m.true_neg}, {"fp", m.false_pos}, {"fn", m.false_neg}}},
          {"mean_prob", {{"sat", m.mean_prob_sat}, {"unsat", m.mean_prob_unsat}}}};
}

// ---- generate

struct GenerateOpts {
  std::string problem, size, vars, cities, nodes, items, out, emit_xml, manifest;
  int pairs = 0;
  std::uint64_t seed = 0;
};

int cmd_generate(const GenerateOpts& o, int threads, const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err) {
  const auto parsed = problem_from_name(o.problem);
  if (!parsed) throw std::invalid_argument("unknown problem '" + o.problem + "' (sat, tsp-ext, tsp-elem, col, knap)");
  const Problem problem = *parsed;
  std::string size_text = o.size;
  for (const auto* alias : {&o.vars, &o.cities, &o.nodes, &o.items})
    if (!alias->empty()) size_text = *alias;
  if (size_text.empty()) throw std::invalid_argument("a size is required (--size, --vars, --cities, --nodes or --items)");
  const SizeRange range = parse_range(size_text);
  if (o.pairs < 1) throw std::invalid_argument("--pairs must be positive");

  const auto n = static_cast<std::size_t>(o.pairs);
  std::vector<std::pair<LabeledInstance, LabeledInstance>> pairs(n);
  std::vector<std::exception_ptr> errors(n);
  const long count = static_cast<long>(n);
  // Sizes cycle through the range so pair i is reproducible on its own.
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
  for (long i = 0; i < count; ++i) {
    const int size = range.lo + static_cast<int>(i % (range.hi - range.lo + 1));
    try {
      pairs[static_cast<std::size_t>(i)] = generate_pair(problem, size, o.seed, static_cast<std::uint64_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<LabeledExample> examples;
  examples.reserve(2 * n);
  for (const auto& [sat, unsat] : pairs) {
    examples.push_back(encode_example(sat));
    examples.push_back(encode_example(unsat));
  }

  Manifest m("generate", args);
  m.config() = {{"problem", o.problem}, {"sizes", {range.lo, range.hi}}, {"pairs", o.pairs}};
  m.set("seed", o.seed);
  m.set("threads", threads);
  write_artifact(m, o.out, dataset_to_jsonl(examples));
  if (!o.emit_xml.empty()) {
    fs::create_directories(o.emit_xml);
    for (std::size_t i = 0; i < n; ++i)
      for (const auto* li : {&pairs[i].first, &pairs[i].second}) {
        const auto path = (fs::path(o.emit_xml) / (o.problem + "-" + std::to_string(i) + (li->label ? "-sat" : "-unsat") + ".xml")).string();
        write_artifact(m, path, serialize_instance(li->instance));
      }
  }
  m.write(o.manifest.empty() ? o.out + ".manifest.json" : o.manifest);

  out << json{{"examples", examples.size()}, {"sat", n}, {"unsat", n}, {"out", o.out}}.dump() << "\n";
  err << "wrote " << examples.size() << " examples to " << o.out << "\n";
  return ok;
}

// ---- encode

int cmd_encode(const std::string& input, const std::string& output, const std::string& manifest,
               const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const std::string text = read_file(input);
  Instance inst;
  try {
    inst = parse_instance(text);
  } catch (const ParseError& e) {
    err << input << ":" << position(text, e.span().begin) << ": " << e.what();
    if (!e.tag().empty()) err << " [tag: " << e.tag() << "]";
    err << "\n";
    return parse_error;
  }
  const EncodedGraph g = encode(inst);
  const json stats = stats_json(g);
  if (!output.empty()) {
    Manifest m("encode", args);
    m.config() = {{"input", input}};
    m.set("input_sha256", sha256_hex(text));
    write_artifact(m, output, serialize_graph(g));
    m.set("stats", stats);
    m.write(manifest.empty() ? output + ".manifest.json" : manifest);
  }
  out << stats.dump() << "\n";
  return ok;
}

// ---- train

struct TrainOpts {
  std::string data, out_dir, resume, manifest;
  TrainConfig cfg;
};

int cmd_train(TrainOpts o, int threads, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  o.cfg.threads = threads;
  std::vector<Sample> samples;
  {
    const auto examples = read_dataset(o.data);
    if (examples.empty()) throw std::invalid_argument("dataset " + o.data + " is empty");
    samples = make_samples(examples);
  }
  fs::create_directories(o.out_dir);

  auto progress = [&](const EpochRecord& r) {
    err << "epoch " << r.epoch << "  train " << std::fixed << std::setprecision(4) << r.train_loss << "  val "
        << r.val_loss << "  acc " << r.val_acc << std::defaultfloat << std::setprecision(6) << "  lr " << r.lr << "  "
        << std::fixed << std::setprecision(1) << r.seconds << "s" << std::defaultfloat << std::setprecision(6) << "\n";
  };
  TrainResult res;
  if (o.resume.empty()) {
    res = train(samples, o.cfg, progress);
  } else {
    GnnParams init = load_checkpoint(o.resume);
    o.cfg.p = init.p;
    o.cfg.iterations = init.iterations;
    res = train(samples, o.cfg, std::move(init), progress);
  }

  const auto dir = fs::path(o.out_dir);
  Manifest m("train", args);
  m.config() = {{"data", o.data},
                {"lr", o.cfg.lr},
                {"weight_decay", o.cfg.weight_decay},
                {"batch_size", o.cfg.batch_size},
                {"max_epochs", o.cfg.max_epochs},
                {"plateau_patience", o.cfg.plateau_patience},
                {"plateau_factor", o.cfg.plateau_factor},
                {"min_lr", o.cfg.min_lr},
                {"clip_norm", o.cfg.clip_norm},
                {"p", o.cfg.p},
                {"iterations", o.cfg.iterations},
                {"val_fraction", o.cfg.val_fraction},
                {"time_budget_seconds", o.cfg.time_budget_seconds},
                {"resume", o.resume}};
  m.set("seed", o.cfg.seed);
  m.set("threads", threads);
  m.set("data_sha256", sha256_hex(read_file(o.data)));
  write_artifact(m, (dir / "best.ckpt").string(), serialize_checkpoint(res.best));
  write_artifact(m, (dir / "last.ckpt").string(), serialize_checkpoint(res.last));
  write_artifact(m, (dir / "history.csv").string(), history_csv(res.history));
  const json summary = {{"epochs", res.history.size()},
                        {"best_epoch", res.best_epoch},
                        {"best_val_acc", res.best_val_acc},
                        {"stopped_by_budget", res.stopped_by_budget},
                        {"train_examples", res.split.train.size()},
                        {"val_examples", res.split.val.size()},
                        {"parameters", res.best.parameter_count()}};
  m.set("summary", summary);
  m.write(o.manifest.empty() ? (dir / "manifest.json").string() : o.manifest);
  out << summary.dump() << "\n";
  return ok;
}

// ---- eval

int cmd_eval(const std::string& data, const std::string& ckpt, const std::string& out_path, const std::string& manifest,
             int threads, const std::vector<std::string>& args, std::ostream& out) {
  const GnnParams params = load_checkpoint(ckpt);
  const auto examples = read_dataset(data);
  if (examples.empty()) throw std::invalid_argument("dataset " + data + " is empty");
  const auto samples = make_samples(examples);
  json j = metrics_json(evaluate(samples, params, threads));

  std::map<int, std::vector<std::size_t>> by_size;
  for (std::size_t i = 0; i < examples.size(); ++i) by_size[examples[i].meta.size].push_back(i);
  if (by_size.size() > 1) {
    json sizes = json::object();
    for (const auto& [size, idx] : by_size) {
      const auto m = evaluate(samples, idx, params, threads);
      sizes[std::to_string(size)] = {{"examples", m.total}, {"accuracy", m.accuracy}};
    }
    j["by_size"] = sizes;
  }
  const std::string text = j.dump(2) + "\n";
  if (!out_path.empty() || !manifest.empty()) {
    Manifest m("eval", args);
    m.config() = {{"data", data}, {"checkpoint", ckpt}};
    m.set("threads", threads);
    m.set("checkpoint_sha256", sha256_hex(read_file(ckpt)));
    if (!out_path.empty()) write_artifact(m, out_path, text);
    m.write(manifest.empty() ? out_path + ".manifest.json" : manifest);
  }
  out << text;
  return ok;
}

// ---- inspect

int cmd_inspect(const std::string& path, int index, const std::string& manifest, const std::vector<std::string>& args,
                std::ostream& out) {
  const std::string bytes = read_file(path);
  EncodedGraph g;
  if (bytes.rfind("CPG", 0) == 0) {
    g = deserialize_graph(bytes);
  } else if (path.size() > 6 && path.substr(path.size() - 6) == ".jsonl") {
    const auto examples = dataset_from_jsonl(bytes);
    if (index < 0 || static_cast<std::size_t>(index) >= examples.size())
      throw std::invalid_argument("--index out of range (dataset has " + std::to_string(examples.size()) + " examples)");
    g = examples[static_cast<std::size_t>(index)].graph;
  } else {
    g = encode(parse_instance(bytes));
  }
  const std::string dump = inspect(g);
  if (!manifest.empty()) {
    Manifest m("inspect", args);
    m.config() = {{"input", path}, {"index", index}};
    m.set("input_sha256", sha256_hex(bytes));
    m.set("output_sha256", sha256_hex(dump));
    m.write(manifest);
  }
  out << dump;
  return ok;
}

// ---- rerun

int cmd_rerun(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  const json m = json::parse(read_file(manifest_path));
  auto args = m.at("args").get<std::vector<std::string>>();
  if (args.empty() || args.front() == "rerun") throw std::invalid_argument("manifest does not record a rerunnable command");
  // Keep the original manifest intact.
  args.push_back("--manifest");
  args.push_back(manifest_path + ".rerun.json");
  std::ostringstream sink;
  const int code = run(args, sink, err);
  if (code != ok) return code;
  int mismatches = 0;
  for (const auto& a : m.at("artifacts")) {
    const auto path = a.at("path").get<std::string>();
    const auto want = a.at("sha256").get<std::string>();
    const auto got = sha256_hex(read_file(path));
    out << (got == want ? "same    " : "DIFFERS ") << path << "\n";
    if (got != want) ++mismatches;
  }
  return mismatches == 0 ? ok : io_error;
}

int exit_code_for(const FormatError& e) {
  return e.kind() == FormatError::Kind::version_mismatch ? version_mismatch : parse_error;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph encoding of constraint problems and a recurrent GNN satisfiability classifier", "cpgraph"};
  app.require_subcommand(1);
  int threads = threads_from_env();
  app.add_option("--threads", threads, "Worker threads (default: CPGRAPH_THREADS or 1)")->check(CLI::Range(1, 1024));

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "Generate an oracle-labeled dataset of sat/unsat pairs");
  g->add_option("problem", gen.problem, "sat | tsp-ext | tsp-elem | col | knap")->required();
  g->add_option("--size", gen.size, "Size or range A..B (cycled across pairs)");
  g->add_option("--vars", gen.vars, "Alias of --size for sat");
  g->add_option("--cities", gen.cities, "Alias of --size for tsp");
  g->add_option("--nodes", gen.nodes, "Alias of --size for col");
  g->add_option("--items", gen.items, "Alias of --size for knap");
  g->add_option("--pairs", gen.pairs, "Number of pairs")->required();
  g->add_option("--seed", gen.seed, "Master seed");
  g->add_option("--out,-o", gen.out, "Output .jsonl")->required();
  g->add_option("--emit-xml", gen.emit_xml, "Also write every instance as XCSP3 into this directory");
  g->add_option("--manifest", gen.manifest, "Manifest path (default: <out>.manifest.json)");

  std::string enc_in, enc_out, enc_manifest;
  auto* e = app.add_subcommand("encode", "Encode an XCSP3 instance; prints vertex and edge counts as JSON");
  e->add_option("input", enc_in, "XCSP3 file")->required();
  e->add_option("--out,-o", enc_out, "Output CPG1 graph file");
  e->add_option("--manifest", enc_manifest, "Manifest path (default: <out>.manifest.json)");

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "Train a classifier; writes best.ckpt, last.ckpt, history.csv, manifest.json");
  t->add_option("--data", tr.data, "Dataset .jsonl")->required();
  t->add_option("--out,-o", tr.out_dir, "Output directory")->required();
  t->add_option("--lr", tr.cfg.lr, "Learning rate")->capture_default_str();
  t->add_option("--weight-decay", tr.cfg.weight_decay, "Decoupled weight decay")->capture_default_str();
  t->add_option("--batch", tr.cfg.batch_size, "Batch size")->capture_default_str();
  t->add_option("--epochs", tr.cfg.max_epochs, "Maximum epochs")->capture_default_str();
  t->add_option("--patience", tr.cfg.plateau_patience, "Plateau patience (epochs)")->capture_default_str();
  t->add_option("--factor", tr.cfg.plateau_factor, "Plateau decay factor")->capture_default_str();
  t->add_option("--min-lr", tr.cfg.min_lr, "Learning-rate floor for decay")->capture_default_str();
  t->add_option("--clip", tr.cfg.clip_norm, "Global gradient-norm clip")->capture_default_str();
  t->add_option("--p", tr.cfg.p, "Hidden size")->capture_default_str();
  t->add_option("--iterations,-I", tr.cfg.iterations, "Message-passing iterations")->capture_default_str();
  t->add_option("--val-fraction", tr.cfg.val_fraction, "Fraction of pairs held out")->capture_default_str();
  t->add_option("--time-budget", tr.cfg.time_budget_seconds, "Stop taking batches after this many seconds of training (0: none)");
  t->add_option("--seed", tr.cfg.seed, "Seed for init, split and shuffling")->capture_default_str();
  t->add_option("--resume", tr.resume, "Start from this checkpoint (its p and I win)");
  t->add_option("--manifest", tr.manifest, "Manifest path (default: <out>/manifest.json)");

  std::string ev_data, ev_ckpt, ev_out, ev_manifest;
  auto* v = app.add_subcommand("eval", "Evaluate a checkpoint; prints metrics JSON");
  v->add_option("--data", ev_data, "Dataset .jsonl")->required();
  v->add_option("--checkpoint,-c", ev_ckpt, "Checkpoint")->required();
  v->add_option("--out,-o", ev_out, "Also write metrics here");
  v->add_option("--manifest", ev_manifest, "Manifest path (default: <out>.manifest.json when --out is given)");

  std::string in_path, in_manifest;
  int in_index = 0;
  auto* i = app.add_subcommand("inspect", "Dump a graph: CPG1 file, XCSP3 file, or one example of a .jsonl dataset");
  i->add_option("input", in_path, "Graph, XCSP3 or dataset file")->required();
  i->add_option("--index", in_index, "Example index for datasets");
  i->add_option("--manifest", in_manifest, "Write a manifest here");

  std::string re_manifest;
  auto* r = app.add_subcommand("rerun", "Repeat the command recorded in a manifest and compare artifact hashes");
  r->add_option("manifest", re_manifest, "Manifest file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? ok : parse_error;
  }

  try {
    if (*g) return cmd_generate(gen, threads, args, out, err);
    if (*e) return cmd_encode(enc_in, enc_out, enc_manifest, args, out, err);
    if (*t) return cmd_train(tr, threads, args, out, err);
    if (*v) return cmd_eval(ev_data, ev_ckpt, ev_out, ev_manifest, threads, args, out);
    if (*i) return cmd_inspect(in_path, in_index, in_manifest, args, out);
    if (*r) return cmd_rerun(re_manifest, out, err);
  } catch (const OracleLimitError& ex) {
    err << "error: " << ex.what() << "\n";
    return oracle_limit;
  } catch (const FormatError& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code_for(ex);
  } catch (const ParseError& ex) {
    err << "error: " << ex.what();
    if (!ex.tag().empty()) err << " [tag: " << ex.tag() << "]";
    err << "\n";
    return parse_error;
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << "\n";
    return parse_error;
  } catch (const fs::filesystem_error& ex) {
    err << "error: " << ex.what() << "\n";
    return io_error;
  } catch (const json::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return parse_error;
  } catch (const std::runtime_error& ex) {
    err << "error: " << ex.what() << "\n";
    return io_error;
  }
  return parse_error;
}

}  // namespace cpg::cli
