// diffcdr: batch command-line front end.
//
// Every command writes its artifacts atomically into --out and a
// <command>.manifest.json naming the command, config hash and seed. Failures
// print one JSON line on stderr and exit nonzero:
//   2  invalid plan (the line carries the offending key path)
//   3  missing or unusable checkpoint
//   1  anything else

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "diffcdr/io.hpp"
#include "diffcdr/log.hpp"
#include "diffcdr/pipeline.hpp"
#include "diffcdr/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace diffcdr::cli {
namespace {

constexpr const char* kToolVersion = "0.1.0";
constexpr const char* kBasesFile = "bases.json";
constexpr const char* kModelFile = "model.json";

struct CliError {
  int code;
  std::string kind;
  std::string message;
  std::string key;  // plan key path, exit code 2 only
};

[[noreturn]] void fail(int code, std::string kind, std::string message, std::string key = "") {
  throw CliError{code, std::move(kind), std::move(message), std::move(key)};
}

struct Common {
  std::string plan_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
};

// --- plan -----------------------------------------------------------------

struct LoadedPlan {
  ExperimentPlan plan;
  fs::path base_dir;  // relative data paths resolve against the plan's directory
};

ExperimentPlan parse_plan_doc(json doc, const Common& c) {
  try {
    for (const auto& o : c.overrides) apply_override(doc, o);
  } catch (const PlanError& e) {
    fail(2, "invalid_plan", e.what(), e.key_path());
  }
  if (c.seed) doc["seed"] = *c.seed;
  try {
    return ExperimentPlan::from_json(doc);
  } catch (const PlanError& e) {
    fail(2, "invalid_plan", e.what(), e.key_path());
  }
}

LoadedPlan load_plan(const Common& c) {
  if (c.plan_path.empty()) fail(2, "invalid_plan", "--plan is required", "<file>");
  json doc;
  try {
    doc = read_json(c.plan_path);
  } catch (const std::exception& e) {
    fail(2, "invalid_plan", e.what(), "<file>");
  }
  return {parse_plan_doc(std::move(doc), c), fs::absolute(c.plan_path).parent_path()};
}

// --- data -----------------------------------------------------------------

struct World {
  DomainPair pair;
  ColdSplit split;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

World load_world(const LoadedPlan& lp) {
  const auto& d = lp.plan.data;
  auto src = load_ratings_csv(resolve(lp.base_dir, d.source_csv), d.source_tag);
  auto tgt = load_ratings_csv(resolve(lp.base_dir, d.target_csv), d.target_tag);
  if (src.clamped + tgt.clamped > 0) {
    log::warn("clamped " + std::to_string(src.clamped + tgt.clamped) + " ratings into [0,5]");
  }
  World w{build_domain_pair(five_core_filter(src.records), five_core_filter(tgt.records)), {}};
  w.split = split_cold_start(w.pair, lp.plan.split);
  log::info("domains: source " + std::to_string(w.pair.source.users.size()) + " users, target " +
            std::to_string(w.pair.target.users.size()) + " users, overlap " +
            std::to_string(w.pair.overlap_users.size()) + " (train " + std::to_string(w.split.train_users.size()) +
            ", test " + std::to_string(w.split.test_users.size()) + ")");
  return w;
}

// Bases depend only on these plan sections; train refuses bases built from others.
std::string bases_key(const ExperimentPlan& plan) {
  const auto doc = plan.to_json();
  const json key = {{"data", doc.at("data")}, {"seed", doc.at("seed")}, {"split", doc.at("split")},
                    {"base", doc.at("base")}};
  return hex64(fnv1a(key.dump()));
}

// --- outputs --------------------------------------------------------------

class Outputs {
 public:
  Outputs(std::string command, const Common& c, std::string config_hash, std::uint64_t seed)
      : command_(std::move(command)), dir_(c.out_dir), hash_(std::move(config_hash)), seed_(seed) {
    fs::create_directories(dir_);
  }

  json header() const {
    return {{"command", command_}, {"config_hash", hash_}, {"seed", seed_}, {"tool_version", kToolVersion}};
  }

  void json_file(const std::string& name, json doc) {
    doc["manifest"] = header();
    write_json_atomic(dir_ / name, doc);
    files_.push_back(name);
  }

  void text_file(const std::string& name, const std::string& text) {
    write_file_atomic(dir_ / name, text);
    files_.push_back(name);
  }

  void record(const std::string& name) { files_.push_back(name); }

  void finish(json extra = json::object()) {
    auto m = header();
    m["files"] = files_;
    for (auto& [k, v] : extra.items()) m[k] = v;
    write_json_atomic(dir_ / (command_ + ".manifest.json"), m);
  }

  const fs::path& dir() const { return dir_; }

 private:
  std::string command_;
  fs::path dir_;
  std::string hash_;
  std::uint64_t seed_;
  std::vector<std::string> files_;
};

// --- checkpoints ----------------------------------------------------------

json read_checkpoint(const fs::path& path, const std::string& kind) {
  if (!fs::exists(path)) fail(3, "missing_checkpoint", "no checkpoint at " + path.string());
  json doc;
  try {
    doc = read_json(path);
  } catch (const std::exception& e) {
    fail(3, "bad_checkpoint", e.what());
  }
  if (doc.value("kind", "") != kind) fail(3, "bad_checkpoint", path.string() + " is not a " + kind + " checkpoint");
  if (doc.value("format_version", 0) != kCheckpointFormatVersion) {
    fail(3, "bad_checkpoint", path.string() + ": unsupported format_version");
  }
  return doc;
}

void assign_params(ParamStore& dst, const ParamStore& src, const std::string& what) {
  if (dst.names() != src.names()) fail(3, "bad_checkpoint", what + ": parameter names differ from the model");
  for (const auto& name : src.names()) {
    if (dst.value(name).shape() != src.value(name).shape()) {
      fail(3, "bad_checkpoint", what + ": '" + name + "' has the wrong shape");
    }
    dst.mutable_value(name) = src.value(name);
  }
}

json bases_to_json(const PretrainedBases& b, const ExperimentPlan& plan) {
  return {{"format_version", kCheckpointFormatVersion},
          {"kind", "bases"},
          {"bases_key", bases_key(plan)},
          {"source", params_to_json(b.source.to_params())},
          {"target", params_to_json(b.target.to_params())},
          {"source_epoch_mse", b.source_trace.epoch_mse},
          {"target_epoch_mse", b.target_trace.epoch_mse},
          {"checksums", {{"source", hex64(b.source.checksum())}, {"target", hex64(b.target.checksum())}}}};
}

PretrainedBases load_bases(const fs::path& path, const ExperimentPlan& plan) {
  const auto doc = read_checkpoint(path, "bases");
  if (doc.value("bases_key", "") != bases_key(plan)) {
    fail(3, "stale_checkpoint", path.string() + " was pretrained under different data, seed, split or base settings");
  }
  PretrainedBases b;
  try {
    b.source = EmbeddingTable::from_params(params_from_json(doc.at("source")));
    b.target = EmbeddingTable::from_params(params_from_json(doc.at("target")));
  } catch (const std::exception& e) {
    fail(3, "bad_checkpoint", path.string() + ": " + e.what());
  }
  return b;
}

json model_to_json(const TrainedDiffCDR& m, const World& w, const fs::path& data_dir) {
  return {{"format_version", kCheckpointFormatVersion},
          {"kind", "diffcdr_model"},
          {"plan", m.plan.to_json()},
          {"data_dir", data_dir.string()},
          {"source_users", w.pair.source.users.ids()},
          {"target_items", w.pair.target.items.ids()},
          {"train_users", w.split.train_users},
          {"test_users", w.split.test_users},
          {"params",
           {{"source", params_to_json(m.source.to_params())},
            {"target", params_to_json(m.target.to_params())},
            {"dim", params_to_json(m.dim.params())},
            {"sampler", params_to_json(m.sampler.params())},
            {"alm", params_to_json(m.alm.params())}}},
          {"training_manifest", m.manifest}};
}

struct LoadedModel {
  TrainedDiffCDR model;
  IdMap source_users;
  std::vector<std::string> train_users;
  std::vector<std::string> test_users;
  fs::path data_dir;  // where the training plan's relative data paths pointed
};

LoadedModel load_model(const fs::path& path) {
  const auto doc = read_checkpoint(path, "diffcdr_model");
  try {
    auto plan = ExperimentPlan::from_json(doc.at("plan"));
    const auto& p = doc.at("params");
    auto source = EmbeddingTable::from_params(params_from_json(p.at("source")));
    auto target = EmbeddingTable::from_params(params_from_json(p.at("target")));
    ScoreNetConfig net_cfg = plan.score_net;
    net_cfg.k = source.k();
    net_cfg.seed = plan.derived_seed("score_net");
    LoadedModel out{TrainedDiffCDR{std::move(source), std::move(target), ScoreNetwork(net_cfg), ScoreNetwork(net_cfg),
                                   AlmLayer(net_cfg.k), plan, doc.at("training_manifest")},
                    IdMap(doc.at("source_users").get<std::vector<std::string>>()),
                    doc.at("train_users").get<std::vector<std::string>>(),
                    doc.at("test_users").get<std::vector<std::string>>(),
                    doc.at("data_dir").get<std::string>()};
    assign_params(out.model.dim.params(), params_from_json(p.at("dim")), "dim");
    assign_params(out.model.sampler.params(), params_from_json(p.at("sampler")), "sampler");
    assign_params(out.model.alm.params(), params_from_json(p.at("alm")), "alm");
    return out;
  } catch (const CliError&) {
    throw;
  } catch (const std::exception& e) {
    fail(3, "bad_checkpoint", path.string() + ": " + e.what());
  }
}

fs::path checkpoint_path(const std::string& given, const Common& c, const char* file) {
  if (given.empty()) return fs::path(c.out_dir) / file;
  const fs::path p(given);
  return fs::is_directory(p) ? p / file : p;
}

std::string vectors_csv(const std::vector<std::string>& ids, const std::vector<std::pair<std::string, const Tensor*>>& blocks) {
  std::ostringstream os;
  os.precision(17);
  os << "user_id";
  for (const auto& [prefix, t] : blocks)
    for (std::size_t j = 0; j < t->cols(); ++j) os << ',' << prefix << j;
  os << '\n';
  for (std::size_t r = 0; r < ids.size(); ++r) {
    os << ids[r];
    for (const auto& [prefix, t] : blocks)
      for (std::size_t j = 0; j < t->cols(); ++j) os << ',' << (*t)(r, j);
    os << '\n';
  }
  return os.str();
}

Tensor source_rows(const TrainedDiffCDR& m, const IdMap& users, const std::vector<std::string>& ids) {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) {
    if (!users.contains(id)) fail(1, "unknown_user", "user '" + id + "' has no source-domain embedding");
    rows.push_back(users.at(id));
  }
  return ops::gather_rows(m.source.users, rows);
}

// --- commands -------------------------------------------------------------

int cmd_synth(const Common& c) {
  json doc = SynthConfig{}.to_json();
  SynthConfig sc;
  try {
    for (const auto& o : c.overrides) apply_override(doc, o);
    if (c.seed) doc["seed"] = *c.seed;
    sc = SynthConfig::from_json(doc);
  } catch (const PlanError& e) {
    fail(2, "invalid_plan", e.what(), e.key_path());
  } catch (const std::exception& e) {
    fail(2, "invalid_plan", e.what(), "<synth>");
  }
  const auto data = synth_generate(sc);

  // Plan that reproduces the desk-scale benchmark on the generated files.
  ExperimentPlan plan;
  plan.data.source_csv = "source.csv";
  plan.data.target_csv = "target.csv";
  plan.data.source_tag = kSourceTag;
  plan.data.target_tag = kTargetTag;
  plan.seed = sc.seed;
  plan.split.beta = 0.5;
  plan.split.seed = sc.seed;
  plan.eval.candidates.seed = sc.seed;
  plan.base.epochs = 100;
  plan.cdr.epochs = 100;
  plan.cdr.batch_size = 16;
  plan.cdr.patience = 0;
  plan.guidance.strength = 1.0;
  plan.loss.lambda_task = 0.1;
  plan.validate();

  Outputs out("synth", c, hex64(fnv1a(sc.to_json().dump())), sc.seed);
  write_ratings_csv(out.dir() / "source.csv", data.source_records, kSourceTag + ":");
  out.record("source.csv");
  write_ratings_csv(out.dir() / "target.csv", data.target_records, kTargetTag + ":");
  out.record("target.csv");
  out.json_file("truth.json", {{"synth", sc.to_json()}, {"truth", synth_truth_to_json(data.truth)}});
  write_json_atomic(out.dir() / "plan.json", plan.to_json());
  out.record("plan.json");
  out.finish({{"synth", sc.to_json()}, {"source_records", data.source_records.size()},
              {"target_records", data.target_records.size()}});
  log::info("wrote " + std::to_string(data.source_records.size()) + " source and " +
            std::to_string(data.target_records.size()) + " target ratings to " + out.dir().string());
  return 0;
}

int cmd_pretrain(const Common& c) {
  const auto lp = load_plan(c);
  const auto w = load_world(lp);
  const auto bases = pretrain_bases(w.pair, w.split, lp.plan);
  log::info("base models: source mse " + std::to_string(bases.source_trace.epoch_mse.back()) + ", target mse " +
            std::to_string(bases.target_trace.epoch_mse.back()));
  Outputs out("pretrain", c, lp.plan.config_hash(), lp.plan.seed);
  out.json_file(kBasesFile, bases_to_json(bases, lp.plan));
  out.finish({{"split", split_manifest(lp.plan.split, w.split)}});
  return 0;
}

int cmd_train(const Common& c, const std::string& bases_arg) {
  const auto lp = load_plan(c);
  const auto bases = load_bases(checkpoint_path(bases_arg, c, kBasesFile), lp.plan);
  const auto w = load_world(lp);
  if (bases.source.users.rows() != w.pair.source.users.size() ||
      bases.target.items.rows() != w.pair.target.items.size()) {
    fail(3, "stale_checkpoint", "base tables do not match the loaded data");
  }
  TrainReport rep;
  const auto model = train_diffcdr(w.pair, w.split, bases, lp.plan, &rep);
  log::info("trained " + to_string(lp.plan.variant) + " for " + std::to_string(rep.epochs_run) + " epochs");
  Outputs out("train", c, lp.plan.config_hash(), lp.plan.seed);
  out.json_file(kModelFile, model_to_json(model, w, lp.base_dir));
  out.json_file("train_report.json", rep.to_json());
  out.finish({{"variant", to_string(lp.plan.variant)}});
  return 0;
}

int cmd_eval(const Common& c, const std::string& model_arg, bool baselines, const std::string& protocol) {
  if (protocol != "cold" && protocol != "warm") fail(1, "usage", "--protocol must be cold or warm");
  auto loaded = load_model(checkpoint_path(model_arg, c, kModelFile));
  // The plan given on the command line decides data and evaluation settings;
  // without one, the checkpoint's own plan is used.
  LoadedPlan lp{loaded.model.plan, loaded.data_dir};
  if (!c.plan_path.empty()) {
    lp = load_plan(c);
  } else if (!c.overrides.empty() || c.seed) {
    lp.plan = parse_plan_doc(loaded.model.plan.to_json(), c);
  }
  const auto w = load_world(lp);
  if (w.pair.source.users.ids() != loaded.source_users.ids()) {
    fail(3, "stale_checkpoint", "checkpoint was trained on different source users");
  }

  json reports = json::array();
  const auto& eval = lp.plan.eval;
  if (protocol == "cold") {
    reports.push_back(evaluate_cold(loaded.model, w.pair, w.split, eval).to_json());
  } else {
    const auto warm_split = split_warm_start(test_user_target_records(w.pair, w.split), lp.plan.split);
    auto cold = evaluate_cold(loaded.model, w.pair, w.split, eval, &warm_split.eval);
    cold.method += "-cold";
    reports.push_back(cold.to_json());
    const auto tuned = warm_start_finetune(loaded.model, w.pair, warm_split.finetune, lp.plan.warm);
    auto warm = evaluate_cold(tuned, w.pair, w.split, eval, &warm_split.eval);
    warm.method += "-warm";
    reports.push_back(warm.to_json());
  }
  if (baselines) {
    const auto bases = load_bases(checkpoint_path("", c, kBasesFile), lp.plan);
    std::optional<std::vector<RatingRecord>> records;
    if (protocol == "warm") records = split_warm_start(test_user_target_records(w.pair, w.split), lp.plan.split).eval;
    for (const char* name : {"TGT", "CMF", "EMCDR"}) {
      reports.push_back(run_baseline(name, w.pair, w.split, bases, lp.plan, records ? &*records : nullptr).to_json());
    }
  }
  for (const auto& r : reports) {
    log::info(r.at("method").get<std::string>() + ": MAE " + std::to_string(r.at("mae").get<double>()) + ", RMSE " +
              std::to_string(r.at("rmse").get<double>()));
  }
  Outputs out("eval", c, lp.plan.config_hash(), lp.plan.seed);
  out.json_file("metrics.json", {{"protocol", protocol}, {"reports", reports}});
  out.finish();
  return 0;
}

std::vector<std::string> read_user_ids(const fs::path& path) {
  if (!fs::exists(path)) fail(1, "data_error", "no users file at " + path.string());
  std::istringstream in(read_file(path));
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto id = line.substr(0, line.find(','));
    if (id.empty() || (ids.empty() && id == "user_id")) continue;
    ids.push_back(id);
  }
  if (ids.empty()) fail(1, "data_error", path.string() + " lists no users");
  return ids;
}

int cmd_sample(const Common& c, const std::string& model_arg, const std::string& users_csv) {
  const auto loaded = load_model(checkpoint_path(model_arg, c, kModelFile));
  const auto& m = loaded.model;
  const auto ids = read_user_ids(users_csv);
  const auto u_hat = m.transfer(source_rows(m, loaded.source_users, ids));
  const auto aligned = m.alm.apply(u_hat);
  Outputs out("sample", c, m.plan.config_hash(), m.plan.seed);
  out.text_file("samples.csv", vectors_csv(ids, {{"gen_", &u_hat}, {"aligned_", &aligned}}));
  out.finish({{"users", ids.size()}});
  return 0;
}

int cmd_export(const Common& c, const std::string& model_arg, const std::string& which, std::size_t max_users) {
  const auto loaded = load_model(checkpoint_path(model_arg, c, kModelFile));
  const auto& m = loaded.model;
  std::vector<std::string> ids;
  if (which == "test" || which == "all") ids.insert(ids.end(), loaded.test_users.begin(), loaded.test_users.end());
  if (which == "train" || which == "all") ids.insert(ids.end(), loaded.train_users.begin(), loaded.train_users.end());
  if (which != "test" && which != "train" && which != "all") fail(1, "usage", "--users must be test, train or all");
  std::sort(ids.begin(), ids.end());
  if (max_users > 0 && ids.size() > max_users) {
    Rng rng = Rng(m.plan.derived_seed("export"));
    rng.shuffle(ids);
    ids.resize(max_users);
    std::sort(ids.begin(), ids.end());
  }
  const auto src = source_rows(m, loaded.source_users, ids);
  const auto gen = m.transfer(src);
  const auto aligned = m.alm.apply(gen);
  Outputs out("export-embeddings", c, m.plan.config_hash(), m.plan.seed);
  out.text_file("embeddings.csv", vectors_csv(ids, {{"src_", &src}, {"gen_", &gen}, {"aligned_", &aligned}}));
  out.finish({{"users", which}, {"rows", ids.size()}});
  return 0;
}

int cmd_bench(const Common& c, const std::string& model_arg, std::size_t n_users, std::size_t reps) {
  const auto loaded = load_model(checkpoint_path(model_arg, c, kModelFile));
  LoadedPlan lp{loaded.model.plan, loaded.data_dir};
  if (!c.plan_path.empty()) lp = load_plan(c);
  const auto w = load_world(lp);
  const auto report = bench_throughput(loaded.model, w.pair, w.split, n_users, reps);
  log::info("train " + std::to_string(report.train_samples_per_sec) + " users/s, inference " +
            std::to_string(report.infer_samples_per_sec) + " users/s");
  Outputs out("bench", c, loaded.model.plan.config_hash(), loaded.model.plan.seed);
  out.json_file("bench.json", report.to_json());
  out.finish();
  return 0;
}

void print_error(const CliError& e) {
  json line = {{"error", e.kind}, {"exit_code", e.code}, {"message", e.message}};
  if (!e.key.empty()) line["key"] = e.key;
  std::fprintf(stderr, "%s\n", line.dump().c_str());
}

int run(int argc, char** argv) {
  CLI::App app{"Diffusion-based cold-start cross-domain recommendation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common c;
  auto add_common = [&](CLI::App* sub, bool needs_plan) {
    auto* opt = sub->add_option("--plan", c.plan_path, "Plan file (JSON)");
    if (needs_plan) opt->required();
    sub->add_option("--seed", c.seed, "Override the plan seed");
    sub->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--set", c.overrides, "Dotted-path override, key=value (repeatable)");
  };

  auto* synth = app.add_subcommand("synth", "Generate a two-domain synthetic dataset and a matching plan");
  add_common(synth, false);

  auto* pretrain = app.add_subcommand("pretrain", "Train the source and target MF base models");
  add_common(pretrain, true);

  std::string bases_arg, model_arg, users_csv, protocol = "cold", which = "test";
  bool baselines = false;
  std::size_t max_users = 0, bench_users = 256, bench_reps = 3;

  auto* train = app.add_subcommand("train", "Train the diffusion mapper and alignment layer");
  add_common(train, true);
  train->add_option("--bases", bases_arg, "Pretrained bases (file or directory; default: --out)");

  auto* eval = app.add_subcommand("eval", "Evaluate a trained model on held-out users");
  add_common(eval, false);
  eval->add_option("--checkpoint", model_arg, "Model checkpoint (file or directory; default: --out)");
  eval->add_flag("--baselines", baselines, "Also evaluate TGT, CMF and EMCDR (needs bases in --out)");
  eval->add_option("--protocol", protocol, "cold or warm")->capture_default_str();

  auto* sample = app.add_subcommand("sample", "Generate target-domain embeddings for listed users");
  add_common(sample, false);
  sample->add_option("--checkpoint", model_arg, "Model checkpoint (file or directory; default: --out)");
  sample->add_option("--users", users_csv, "CSV whose first column lists user ids")->required();

  auto* exp = app.add_subcommand("export-embeddings", "Write source, generated and aligned user embeddings");
  add_common(exp, false);
  exp->add_option("--checkpoint", model_arg, "Model checkpoint (file or directory; default: --out)");
  exp->add_option("--users", which, "test, train or all")->capture_default_str();
  exp->add_option("--max-users", max_users, "Deterministic subsample size (0: every user)")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Measure training and inference throughput");
  add_common(bench, false);
  bench->add_option("--checkpoint", model_arg, "Model checkpoint (file or directory; default: --out)");
  bench->add_option("--users", bench_users, "Users per pass")->capture_default_str();
  bench->add_option("--repetitions", bench_reps, "Repetitions (at least 3)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error({1, "usage", e.what(), ""});
    return 1;
  }

  try {
    log::init_from_env();
    if (synth->parsed()) return cmd_synth(c);
    if (pretrain->parsed()) return cmd_pretrain(c);
    if (train->parsed()) return cmd_train(c, bases_arg);
    if (eval->parsed()) return cmd_eval(c, model_arg, baselines, protocol);
    if (sample->parsed()) return cmd_sample(c, model_arg, users_csv);
    if (exp->parsed()) return cmd_export(c, model_arg, which, max_users);
    if (bench->parsed()) return cmd_bench(c, model_arg, bench_users, bench_reps);
  } catch (const CliError& e) {
    print_error(e);
    return e.code;
  } catch (const PlanError& e) {
    print_error({2, "invalid_plan", e.what(), e.key_path()});
    return 2;
  } catch (const CheckpointError& e) {
    print_error({3, "bad_checkpoint", e.what(), ""});
    return 3;
  } catch (const DataError& e) {
    print_error({1, "data_error", e.what(), ""});
    return 1;
  } catch (const std::exception& e) {
    print_error({1, "runtime_error", e.what(), ""});
    return 1;
  }
  return 1;
}

}  // namespace
}  // namespace diffcdr::cli

int main(int argc, char** argv) { return diffcdr::cli::run(argc, argv); }
