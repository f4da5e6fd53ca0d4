#include "transprompt/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "transprompt/config_json.hpp"
#include "transprompt/errors.hpp"
#include "transprompt/oracle_check.hpp"
#include "transprompt/toy_data.hpp"
#include "transprompt/workflow.hpp"

namespace transprompt {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct DataOptions {
  std::string data;
  std::string val;
  std::string test;
  bool probability = false;
  std::optional<std::size_t> class_count;
};

struct RunOverrides {
  std::string config;
  std::optional<std::string> use_case;
  std::optional<std::string> method;
  std::optional<double> ratio;
  bool interleave = false;
  bool no_interleave = false;
  std::optional<int> decimals;
  std::optional<std::size_t> token_budget;
  std::optional<std::size_t> positive_class;
  bool raw_features = false;
  std::optional<std::string> backend;
  std::optional<std::string> endpoint;
  std::optional<std::string> model;
  std::optional<std::size_t> rpm;
  std::optional<std::size_t> budget;
  std::optional<std::string> api_key_env;
  std::optional<std::string> mock_fixture;
  std::optional<double> scale;
  std::optional<std::size_t> max_attempts;
  std::optional<std::int64_t> backoff_ms;
  std::optional<std::size_t> knn_k;
  std::optional<std::string> metric;
  std::optional<std::size_t> bags;
  std::optional<std::uint64_t> seed;
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.data, "CSV/JSON file holding both splits (split column val/test)");
  cmd->add_option("--val", d.val, "File with the validation (reference) rows");
  cmd->add_option("--test", d.test, "File with the test rows");
  cmd->add_flag("--probability", d.probability, "Reject rows that are not probability vectors");
  cmd->add_option("--class-count", d.class_count, "Number of classes (default: max label + 1)");
}

void add_run_options(CLI::App* cmd, RunOverrides& o, bool with_method) {
  cmd->add_option("--config", o.config, "JSON file mirroring the run configuration");
  cmd->add_option("--use-case", o.use_case, "error_detection | accuracy_improvement");
  cmd->add_option("--ratio", o.ratio, "Share of references placed in the prompt (default 0.25)");
  cmd->add_flag("--interleave", o.interleave, "Interleave the selection by class");
  cmd->add_flag("--no-interleave", o.no_interleave, "Rank the selection globally");
  cmd->add_option("--decimals", o.decimals, "Fractional digits per feature value (default 2)");
  cmd->add_option("--token-budget", o.token_budget, "Prompt token budget (default 4000)");
  cmd->add_flag("--raw-features", o.raw_features, "Features are not probability vectors");
  if (!with_method) return;
  cmd->add_option("--method", o.method, "gpt4mia | knn | ubknn");
  cmd->add_option("--positive-class", o.positive_class, "Positive class for binary reports (default 1)");
  cmd->add_option("--backend", o.backend, "remote | local-attention | mock");
  cmd->add_option("--endpoint", o.endpoint, "Completions endpoint URL (remote backend)");
  cmd->add_option("--model", o.model, "Model name sent to the remote endpoint");
  cmd->add_option("--rpm", o.rpm, "Requests-per-minute cap (remote backend)");
  cmd->add_option("--budget", o.budget, "Maximum HTTP requests per run (default 500)");
  cmd->add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key");
  cmd->add_option("--mock-fixture", o.mock_fixture, "Scripted answers for the mock backend");
  cmd->add_option("--scale", o.scale, "Attention scale s of the local backend (default 1e-6)");
  cmd->add_option("--max-attempts", o.max_attempts, "Remote attempts per request (default 4)");
  cmd->add_option("--backoff-ms", o.backoff_ms, "Base retry backoff in ms (default 500)");
  cmd->add_option("--knn-k", o.knn_k, "Neighbours for knn/ubknn (default 5)");
  cmd->add_option("--metric", o.metric, "cosine | euclidean (default cosine)");
  cmd->add_option("--bags", o.bags, "UnderBagging rounds (default 11)");
  cmd->add_option("--seed", o.seed, "UnderBagging seed (default 0)");
}

RunConfig resolve_config(const RunOverrides& o) {
  RunConfig cfg;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw_contract(fmt::format("cannot open config '{}'", o.config));
    try {
      apply_config_json(json::parse(in), cfg);
    } catch (const json::parse_error& e) {
      throw ParseError(0, fmt::format("config '{}': {}", o.config, e.what()));
    }
  }
  json flags = json::object();
  if (o.use_case) flags["use_case"] = *o.use_case;
  if (o.method) flags["method"] = *o.method;
  if (o.ratio) flags["selection_ratio"] = *o.ratio;
  if (o.interleave) flags["interleave"] = true;
  if (o.no_interleave) flags["interleave"] = false;
  if (o.positive_class) flags["positive_class"] = *o.positive_class;
  if (o.raw_features) flags["probability_features"] = false;
  if (o.decimals) flags["serialization"]["decimals"] = *o.decimals;
  if (o.token_budget) flags["serialization"]["token_budget"] = *o.token_budget;
  if (o.backend) flags["backend"]["kind"] = *o.backend;
  if (o.endpoint) flags["backend"]["endpoint_url"] = *o.endpoint;
  if (o.model) flags["backend"]["model_name"] = *o.model;
  if (o.rpm) flags["backend"]["rate_limit_rpm"] = *o.rpm;
  if (o.budget) flags["backend"]["request_budget"] = *o.budget;
  if (o.api_key_env) flags["backend"]["api_key_env"] = *o.api_key_env;
  if (o.mock_fixture) flags["backend"]["mock_fixture"] = *o.mock_fixture;
  if (o.scale) flags["backend"]["local"]["scale_s"] = *o.scale;
  if (o.max_attempts) flags["backend"]["retry"]["max_attempts"] = *o.max_attempts;
  if (o.backoff_ms) flags["backend"]["retry"]["base_backoff_ms"] = *o.backoff_ms;
  if (o.knn_k) flags["knn"]["k_neighbors"] = *o.knn_k;
  if (o.metric) flags["knn"]["metric"] = *o.metric;
  if (o.bags) flags["ubknn"]["n_bags"] = *o.bags;
  if (o.seed) flags["ubknn"]["seed"] = *o.seed;
  apply_config_json(flags, cfg);
  return cfg;
}

LabeledDataset load_data(const DataOptions& d) {
  IngestSchema schema;
  schema.is_probability = d.probability;
  schema.class_count = d.class_count;
  if (!d.data.empty()) {
    if (!d.val.empty() || !d.test.empty()) throw_contract("use either --data or --val/--test");
    return load_dataset(d.data, schema);
  }
  if (d.val.empty() || d.test.empty()) throw_contract("input needs --data, or both --val and --test");
  return load_split_files(d.val, d.test, schema);
}

/// The labelled reference set the prompt is built from for the chosen use case.
ReferenceSet reference_for(const LabeledDataset& data, const RunConfig& cfg) {
  if (cfg.use_case == UseCase::ErrorDetection) {
    return derive_error_detection_set(data.reference.features(), data.reference.labels());
  }
  return data.reference;
}

class Sink {
public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw_contract(fmt::format("cannot write '{}'", path));
    }
    stream_ = path.empty() ? &fallback : &file_;
  }
  std::ostream& operator*() { return *stream_; }

private:
  std::ofstream file_;
  std::ostream* stream_;
};

json plan_json(const SelectionPlan& plan) {
  return {{"k", plan.k},
          {"interleaved", plan.interleaved},
          {"ordered_indices", plan.ordered_indices},
          {"rep_scores", plan.rep_scores}};
}

json audit_json(const SampleRecord& rec) {
  json j = {{"index", rec.index}, {"prediction", rec.prediction.index}};
  if (rec.truth) j["truth"] = rec.truth->index;
  if (rec.audit) {
    j["fallback"] = rec.audit->fallback;
    j["backend"] = rec.audit->backend_id;
    j["prompt_hash"] = prompt_hash(rec.audit->prompt);
    j["completions"] = rec.audit->completions;
  }
  return j;
}

int cmd_plan(const DataOptions& d, const RunOverrides& o, const std::string& out_path,
             std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const auto data = load_data(d);
  const auto plan = build_plan(reference_for(data, cfg), cfg.selection_ratio, cfg.interleaved());
  Sink sink(out_path, out);
  *sink << plan_json(plan).dump(2) << '\n';
  return kExitOk;
}

int cmd_prompt(const DataOptions& d, const RunOverrides& o, const std::string& out_dir,
               std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const auto data = load_data(d);
  const auto ref = reference_for(data, cfg);
  const auto plan = build_plan(ref, cfg.selection_ratio, cfg.interleaved());

  std::ofstream manifest;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "part1.txt", std::ios::binary)
        << build_part1(ref, plan, cfg.serialization);
    manifest.open(fs::path(out_dir) / "prompts.jsonl");
  }
  std::ostream& lines = out_dir.empty() ? out : manifest;
  for (std::size_t i = 0; i < data.test_features.size(); ++i) {
    const auto bundle = build_prompt(ref, plan, data.test_features[i], cfg.serialization);
    const auto text = bundle.text();
    json j = {{"index", i},
              {"prompt_hash", prompt_hash(text)},
              {"token_estimate", bundle.token_estimate},
              {"part2", bundle.part2}};
    if (out_dir.empty()) {
      j["prompt"] = text;
    } else {
      const auto name = fmt::format("part2_{:04}.txt", i);
      std::ofstream(fs::path(out_dir) / name, std::ios::binary) << bundle.part2;
      j["part2_file"] = name;
    }
    lines << j.dump() << '\n';
  }
  return kExitOk;
}

int cmd_infer(const DataOptions& d, const RunOverrides& o, const std::string& out_path,
              std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const auto data = load_data(d);
  const auto ref = reference_for(data, cfg);
  std::unique_ptr<CompletionBackend> backend;
  if (cfg.method == Method::Transductive) backend = make_backend(cfg.backend);
  const auto run = infer(ref, data.test_features, cfg, backend.get());
  Sink sink(out_path, out);
  for (const auto& rec : run.records) *sink << audit_json(rec).dump() << '\n';
  return kExitOk;
}

int cmd_evaluate(const DataOptions& d, const RunOverrides& o, const std::string& report_path,
                 const std::string& predictions_path, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const auto data = load_data(d);
  std::unique_ptr<CompletionBackend> backend;
  if (cfg.method == Method::Transductive) backend = make_backend(cfg.backend);
  const auto result = run_evaluation(data, cfg, backend.get());

  json doc = {{"config", to_json(cfg)},
              {"plan", {{"k", result.run.plan.k},
                        {"ordered_indices", result.run.plan.ordered_indices}}},
              {"report", to_json(result.report)}};
  if (result.base_report) doc["base_report"] = to_json(*result.base_report);
  Sink sink(report_path, out);
  *sink << doc.dump(2) << '\n';
  if (!predictions_path.empty()) {
    std::ofstream preds(predictions_path);
    if (!preds) throw_contract(fmt::format("cannot write '{}'", predictions_path));
    for (const auto& rec : result.run.records) preds << audit_json(rec).dump() << '\n';
  }
  return kExitOk;
}

struct OracleOptions {
  std::size_t trials = 1000;
  double s = 1e-6;
  double literal_s = 0.05;
  std::size_t prop2_trials = 100;
  std::size_t fixtures = 20;
  double cluster_s = 0.05;
  double tol = 1e-8;
  std::size_t max_layers = 256;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_oracle_check(const OracleOptions& o, std::ostream& out) {
  const auto p1 = run_prop1_suite(o.trials, o.s, o.seed);
  const auto p2 = run_prop2_suite(o.prop2_trials, o.s, o.literal_s, o.seed);
  const auto p3 = run_prop3_suite(o.fixtures, o.cluster_s, o.tol, o.max_layers, o.seed);
  const bool ok = p1.agreements == p1.trials && p2.strict_max_abs_diff <= 1e-9 &&
                  p2.literal_agreements == p2.literal_trials && p3.converged == p3.fixtures &&
                  p3.separated == p3.fixtures;
  json doc = {{"nn_limit", to_json(p1)},
              {"self_attention_equivalence", to_json(p2)},
              {"clustering", to_json(p3)},
              {"settings",
               {{"s", o.s}, {"literal_s", o.literal_s}, {"cluster_s", o.cluster_s},
                {"tol", o.tol}, {"max_layers", o.max_layers}, {"seed", o.seed}}},
              {"all_passed", ok}};
  Sink sink(o.out, out);
  *sink << doc.dump(2) << '\n';
  return ok ? kExitOk : kExitCheckFailed;
}

int exit_code_for(const Error& e) {
  return e.kind() == ErrorKind::Transport || e.kind() == ErrorKind::Credential ? kExitTransport
                                                                              : kExitUsage;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transductive inference over a labelled reference set via prompts or attention"};
  app.require_subcommand(1);

  DataOptions data;
  RunOverrides run;
  std::string out_path;
  std::string report_path;
  std::string predictions_path;
  OracleOptions oracle;
  ToyConfig toy;
  std::string toy_shape = "circles";
  bool no_bias = false;

  auto* plan = app.add_subcommand("plan", "Select and order the reference samples; print the plan as JSON");
  add_data_options(plan, data);
  add_run_options(plan, run, false);
  plan->add_option("--out", out_path, "Output file (default stdout)");

  auto* prompt = app.add_subcommand("prompt", "Render the two-part prompt for every test sample");
  add_data_options(prompt, data);
  add_run_options(prompt, run, false);
  prompt->add_option("--out-dir", out_path, "Write part1.txt, part2_NNNN.txt and prompts.jsonl here");

  auto* infer_cmd = app.add_subcommand("infer", "Classify test samples; JSONL records with audit data");
  add_data_options(infer_cmd, data);
  add_run_options(infer_cmd, run, true);
  infer_cmd->add_option("--out", out_path, "Output file (default stdout)");

  auto* evaluate = app.add_subcommand("evaluate", "Run a use case end to end and report metrics");
  add_data_options(evaluate, data);
  add_run_options(evaluate, run, true);
  evaluate->add_option("--report", report_path, "Report JSON file (default stdout)");
  evaluate->add_option("--predictions", predictions_path, "Optional per-sample JSONL");

  auto* check = app.add_subcommand("oracle-check", "Run the attention/nearest-neighbour property suites");
  check->add_option("--trials", oracle.trials, "Random instances for the 1-NN limit suite");
  check->add_option("--s", oracle.s, "Attention scale for the 1-NN limit and strict equivalence");
  check->add_option("--literal-s", oracle.literal_s, "Scale for the literal self-attention suite");
  check->add_option("--prop2-trials", oracle.prop2_trials, "Instances for the self-attention suite");
  check->add_option("--fixtures", oracle.fixtures, "Two-cluster fixtures for the clustering suite");
  check->add_option("--cluster-s", oracle.cluster_s, "Scale for the clustering suite");
  check->add_option("--tol", oracle.tol, "Convergence tolerance");
  check->add_option("--max-layers", oracle.max_layers, "Layer cap for the clustering suite");
  check->add_option("--seed", oracle.seed, "Seed of the first random instance");
  check->add_option("--out", oracle.out, "Output file (default stdout)");

  auto* gen = app.add_subcommand("gen-toy", "Write a seeded two-moons or concentric-circles CSV");
  gen->add_option("--dataset", toy_shape, "moons | circles")->check(CLI::IsMember({"moons", "circles"}));
  gen->add_option("--n", toy.n, "Number of samples");
  gen->add_option("--noise", toy.noise, "Gaussian noise standard deviation");
  gen->add_option("--seed", toy.seed, "Random seed");
  gen->add_option("--factor", toy.factor, "Inner/outer radius ratio (circles)");
  gen->add_option("--ref-fraction", toy.reference_fraction, "Share of rows in the val split");
  gen->add_option("--decimals", toy.decimals, "Coordinate precision");
  gen->add_flag("--no-bias", no_bias, "Do not append the constant 1.0 feature");
  gen->add_option("--out", out_path, "Output file (default stdout)");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*plan) return cmd_plan(data, run, out_path, out);
    if (*prompt) return cmd_prompt(data, run, out_path, out);
    if (*infer_cmd) return cmd_infer(data, run, out_path, out);
    if (*evaluate) return cmd_evaluate(data, run, report_path, predictions_path, out);
    if (*check) return cmd_oracle_check(oracle, out);
    if (*gen) {
      toy.shape = toy_shape_from_string(toy_shape);
      toy.bias_feature = !no_bias;
      const auto ds = generate_toy(toy);
      Sink sink(out_path, out);
      write_dataset_csv(*sink, ds);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << json{{"error", to_string(e.kind())}, {"message", e.what()}}.dump() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace transprompt
