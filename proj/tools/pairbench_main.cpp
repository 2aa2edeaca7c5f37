#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pairbench/core/embeddings.hpp"
#include "pairbench/core/error.hpp"
#include "pairbench/core/manifest_io.hpp"
#include "pairbench/gate/gate.hpp"
#include "pairbench/harness/service.hpp"
#include "pairbench/metrics/evaluate.hpp"
#include "pairbench/metrics/leaderboard.hpp"
#include "pairbench/syngen/experiment.hpp"
#include "pairbench/syngen/oracle.hpp"
#include "pairbench/syngen/syngen.hpp"

namespace {

using namespace pairbench;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << content;
  if (!out) throw Error("short write to " + path);
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content << '\n';
  } else {
    write_file(out_path, content + "\n");
  }
}

// "masked", "mr", "all" or a path to a protocol JSON document.
ProtocolSpec load_protocol(const std::string& source) {
  if (source == "masked" || source == "mr" || source == "all") {
    return protocol_preset(source);
  }
  return parse_protocol_json(read_file(source));
}

gate::SubtrackRules load_rules(const std::string& source) {
  if (source == "ms1m" || source == "glint360k") return gate::rules_preset(source);
  return gate::parse_rules_json(read_file(source));
}

struct GenerateArgs {
  std::string config_path;
  std::string out_manifest = "manifest.jsonl";
  std::string out_embeddings = "embeddings.pbemb";
  std::string out_config;
  syngen::SynConfig config;
  std::string group_mix;  // "uniform" or 4 comma-separated weights
  std::size_t images = 0;
};

int run_generate(GenerateArgs& args) {
  syngen::SynConfig cfg = args.config;
  if (!args.config_path.empty()) {
    cfg = syngen::synconfig_from_json(read_file(args.config_path));
  } else {
    if (args.images > 0) cfg.images_per_identity = {args.images, args.images};
    if (args.group_mix == "uniform") {
      cfg.group_mix = {{0.25, 0.25, 0.25, 0.25}};
    } else if (!args.group_mix.empty()) {
      std::array<double, kGroupCount> mix{};
      std::stringstream ss(args.group_mix);
      std::string tok;
      std::size_t i = 0;
      while (std::getline(ss, tok, ',') && i < kGroupCount) mix[i++] = std::stod(tok);
      if (i != kGroupCount) throw Error("--group-mix needs 4 comma-separated weights");
      cfg.group_mix = mix;
    }
  }
  const syngen::SynOutput out = syngen::synthesize(cfg);
  save_manifest(out.manifest, args.out_manifest);
  save_embeddings(out.embeddings, args.out_embeddings);
  if (!args.out_config.empty()) write_file(args.out_config, syngen::synconfig_to_json(cfg));
  std::cout << "generated " << out.manifest.size() << " records ("
            << out.manifest.identity_count() << " identities, dim " << cfg.dim << ") -> "
            << args.out_manifest << ", " << args.out_embeddings << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string manifest;
  std::string embeddings;
  std::string protocol = "all";
  std::vector<double> fpr;
  std::string out;
  metrics::EvalOptions options;
  bool oracle = false;
};

int run_evaluate(EvaluateArgs& args) {
  const Manifest manifest = load_manifest(args.manifest);
  EmbeddingSet set = normalize(load_embeddings(args.embeddings, manifest.size()));
  ProtocolSpec spec = load_protocol(args.protocol);
  if (!args.fpr.empty()) spec.fpr_targets = args.fpr;
  if (args.options.workers == 0) {
    args.options.workers = std::max(1u, std::thread::hardware_concurrency());
  }
  const metrics::MetricReport report =
      args.oracle ? syngen::oracle_evaluate(set, manifest, spec)
                  : metrics::evaluate(set, manifest, spec, args.options);
  emit(args.out, metrics::report_to_json(report));
  return 0;
}

struct GateArgs {
  std::string meta_path;
  std::string rules = "ms1m";
  std::string out;
};

int run_gate(GateArgs& args) {
  const json meta_obj = json::parse(read_file(args.meta_path));
  gate::SubmissionMeta meta;
  meta.participant = meta_obj.value("participant", "");
  meta.declared_dim = meta_obj.at("declared_dim").get<std::uint32_t>();
  if (meta_obj.contains("model_bytes")) {
    meta.model_bytes = meta_obj["model_bytes"].get<std::uint64_t>();
  } else if (meta_obj.contains("size_mb")) {
    meta.model_bytes =
        static_cast<std::uint64_t>(meta_obj["size_mb"].get<double>() * 1024.0 * 1024.0);
  } else {
    throw Error(args.meta_path + ": meta needs model_bytes or size_mb");
  }
  gate::MeasuredProfile profile;
  profile.ms_per_image = meta_obj.at("ms_per_image").get<double>();
  const gate::GateVerdict verdict =
      gate::gate_submission(meta, profile, load_rules(args.rules));
  emit(args.out, gate::verdict_to_json(verdict));
  return 0;
}

struct RankArgs {
  std::string entries_path;
  std::string out;
  bool json_only = false;
};

int run_rank(RankArgs& args) {
  auto entries = metrics::parse_leaderboard_json(read_file(args.entries_path));
  entries = metrics::rank_leaderboard(std::move(entries));
  if (!args.json_only) std::cout << metrics::leaderboard_table(entries);
  if (!args.out.empty()) write_file(args.out, metrics::leaderboard_to_json(entries) + "\n");
  return 0;
}

struct TrendArgs {
  std::uint64_t seed = 0;
  std::string out;
  std::string trace_baseline;
  std::string trace_augmented;
};

int run_trend(TrendArgs& args) {
  const syngen::TrendResult r = syngen::augmentation_trend(args.seed);
  json summary;
  summary["seed"] = args.seed;
  summary["tpr_masked_baseline"] = r.tpr_masked_baseline;
  summary["tpr_masked_augmented"] = r.tpr_masked_augmented;
  summary["tpr_unmasked_baseline"] = r.tpr_unmasked_baseline;
  summary["tpr_unmasked_augmented"] = r.tpr_unmasked_augmented;
  emit(args.out, summary.dump(2));
  const auto write_trace = [](const std::string& path, const std::vector<double>& trace) {
    if (path.empty()) return;
    std::string csv = "step,mean_loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
      csv += std::to_string(i) + "," + std::to_string(trace[i]) + "\n";
    }
    write_file(path, csv);
  };
  write_trace(args.trace_baseline, r.loss_trace_baseline);
  write_trace(args.trace_augmented, r.loss_trace_augmented);
  return 0;
}

struct ServeArgs {
  std::string data_dir;
  std::string config_path;
  std::string host = "127.0.0.1";
  int port = 8080;
};

int run_serve(ServeArgs& args) {
  if (args.data_dir.empty()) {
    const char* env = std::getenv("PAIRBENCH_DATA_DIR");
    args.data_dir = env ? env : "pairbench-data";
  }
  harness::ServiceConfig config = args.config_path.empty()
                                      ? harness::ServiceConfig::defaults()
                                      : harness::ServiceConfig::from_json(
                                            read_file(args.config_path));
  harness::Service service(args.data_dir, std::move(config));
  harness::HttpServer server(service);
  const int port = server.start(args.host, args.port);
  std::cout << "pairbench service listening on " << args.host << ":" << port << " (store: "
            << args.data_dir << ")\n";
  server.wait_until_ready();
  // Serve until killed.
  for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pairbench: verification benchmark engine (pair counting, TPR@FPR, "
               "gating, leaderboards)"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* cmd_gen = app.add_subcommand("generate", "Synthesize a manifest + embedding set");
  cmd_gen->add_option("--config", gen.config_path, "SynConfig JSON document");
  cmd_gen->add_option("--ids", gen.config.n_identities, "Number of identities");
  cmd_gen->add_option("--images-per-id", gen.images, "Images per identity (fixed)");
  cmd_gen->add_option("--dim", gen.config.dim, "Embedding dimension");
  cmd_gen->add_option("--sigma", gen.config.intra_noise, "Intra-identity noise");
  cmd_gen->add_option("--group-mix", gen.group_mix,
                      "'uniform' or 4 comma-separated group weights");
  cmd_gen->add_option("--mask-fraction", gen.config.mask_fraction,
                      "Fraction of identities with one masked image");
  cmd_gen->add_option("--gamma", gen.config.mask_gap, "Mask gap (embedding shift)");
  cmd_gen->add_option("--seed", gen.config.seed, "Generator seed");
  cmd_gen->add_option("--name", gen.config.name, "Set name");
  cmd_gen->add_option("--out-manifest", gen.out_manifest, "Manifest output path");
  cmd_gen->add_option("--out-embeddings", gen.out_embeddings, "Embeddings output path");
  cmd_gen->add_option("--out-config", gen.out_config, "Write the effective config JSON");

  EvaluateArgs ev;
  auto* cmd_ev = app.add_subcommand("evaluate", "TPR@FPR evaluation (streaming engine)");
  cmd_ev->add_option("--manifest", ev.manifest, "Manifest JSONL")->required();
  cmd_ev->add_option("--embeddings", ev.embeddings, "Embeddings file")->required();
  cmd_ev->add_option("--protocol", ev.protocol, "Preset (all|mr|masked) or JSON path");
  cmd_ev->add_option("--fpr", ev.fpr, "FPR target(s), overrides the protocol's");
  cmd_ev->add_option("--block-size", ev.options.block_size, "Rows per score block");
  cmd_ev->add_option("--workers", ev.options.workers, "Worker threads (0 = hardware)");
  cmd_ev->add_flag("--debug-pairs", ev.options.debug_top_pairs,
                   "Retain top negative pairs in the report");
  cmd_ev->add_option("--out", ev.out, "Report JSON path (default: stdout)");

  EvaluateArgs orc;
  orc.oracle = true;
  auto* cmd_orc = app.add_subcommand("oracle", "Brute-force reference evaluation (<= 5000 images)");
  cmd_orc->add_option("--manifest", orc.manifest, "Manifest JSONL")->required();
  cmd_orc->add_option("--embeddings", orc.embeddings, "Embeddings file")->required();
  cmd_orc->add_option("--protocol", orc.protocol, "Preset (all|mr|masked) or JSON path");
  cmd_orc->add_option("--fpr", orc.fpr, "FPR target(s), overrides the protocol's");
  cmd_orc->add_option("--out", orc.out, "Report JSON path (default: stdout)");

  GateArgs gt;
  auto* cmd_gate = app.add_subcommand("gate", "Check a submission against subtrack rules");
  cmd_gate->add_option("--meta", gt.meta_path, "Submission meta JSON")->required();
  cmd_gate->add_option("--rules", gt.rules, "Preset (ms1m|glint360k) or rules JSON path");
  cmd_gate->add_option("--out", gt.out, "Verdict JSON path (default: stdout)");

  RankArgs rk;
  auto* cmd_rank = app.add_subcommand("rank", "Order leaderboard entries by weighted score");
  cmd_rank->add_option("--entries", rk.entries_path, "Entries JSON")->required();
  cmd_rank->add_option("--out", rk.out, "Ranked entries JSON path");
  cmd_rank->add_flag("--json-only", rk.json_only, "Suppress the text table");

  TrendArgs tr;
  auto* cmd_trend = app.add_subcommand(
      "trend", "Run the mask-augmentation experiment for one seed");
  cmd_trend->add_option("--seed", tr.seed, "Experiment seed");
  cmd_trend->add_option("--out", tr.out, "Summary JSON path (default: stdout)");
  cmd_trend->add_option("--trace-baseline", tr.trace_baseline,
                        "CSV loss trace (step,mean_loss) of the plain run");
  cmd_trend->add_option("--trace-augmented", tr.trace_augmented,
                        "CSV loss trace (step,mean_loss) of the augmented run");

  ServeArgs sv;
  auto* cmd_serve = app.add_subcommand("serve", "Run the evaluation service");
  cmd_serve->add_option("--data-dir", sv.data_dir,
                        "Store directory (default: $PAIRBENCH_DATA_DIR or ./pairbench-data)");
  cmd_serve->add_option("--config", sv.config_path, "Service config JSON");
  cmd_serve->add_option("--host", sv.host, "Bind host");
  cmd_serve->add_option("--port", sv.port, "Bind port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_gen->parsed()) return run_generate(gen);
    if (cmd_ev->parsed()) return run_evaluate(ev);
    if (cmd_orc->parsed()) return run_evaluate(orc);
    if (cmd_gate->parsed()) return run_gate(gt);
    if (cmd_rank->parsed()) return run_rank(rk);
    if (cmd_trend->parsed()) return run_trend(tr);
    if (cmd_serve->parsed()) return run_serve(sv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
