// Acceptance suite: every release criterion with its pinned tolerance, one
// pass/fail line per criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <sys/resource.h>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "pairbench/core/embeddings.hpp"
#include "pairbench/core/manifest_io.hpp"
#include "pairbench/core/rng.hpp"
#include "pairbench/gate/gate.hpp"
#include "pairbench/harness/service.hpp"
#include "pairbench/margin/margin.hpp"
#include "pairbench/metrics/evaluate.hpp"
#include "pairbench/metrics/leaderboard.hpp"
#include "pairbench/metrics/metrics.hpp"
#include "pairbench/syngen/experiment.hpp"
#include "pairbench/syngen/oracle.hpp"
#include "pairbench/syngen/syngen.hpp"

using namespace pairbench;
using nlohmann::json;

namespace {

const std::string kDataDir = PAIRBENCH_DATA_DIR_PATH;
const std::string kCli = PAIRBENCH_CLI_PATH;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Scratch {
  std::filesystem::path root;
  Scratch() {
    root = std::filesystem::temp_directory_path() /
           ("pairbench_acceptance_" + std::to_string(::getpid()));
    std::filesystem::create_directories(root);
  }
  ~Scratch() {
    std::error_code ec;
    std::filesystem::remove_all(root, ec);
  }
  std::string str(const std::string& name) const { return (root / name).string(); }
};

double rss_gb() {
  struct rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return static_cast<double>(ru.ru_maxrss) / (1024.0 * 1024.0);
}

// --- criterion 1: published pair-count closure ------------------------------

void table_closure() {
  struct Row {
    const char* name;
    std::uint64_t images, positives, negatives;
  };
  const Row rows[] = {
      {"children", 157'280, 1'773'428, 24'735'067'692ULL},
      {"african", 298'010, 870'091, 88'808'791'999ULL},
      {"caucasian", 697'245, 2'024'609, 486'147'868'171ULL},
      {"south_asian", 237'080, 688'259, 56'206'001'061ULL},
      {"east_asian", 391'970, 1'106'078, 153'638'982'852ULL},
      {"mr_all", 1'624'305, 4'689'037, 2'638'360'419'683ULL},
  };
  for (const Row& r : rows) {
    const auto stats = metrics::PairStats::from_counts(r.images, r.positives);
    require(stats.n_negative_paper == r.negatives,
            std::string(r.name) + ": got " + std::to_string(stats.n_negative_paper) +
                ", published " + std::to_string(r.negatives));
    require(stats.n_positive + stats.n_negative_engine == r.images * (r.images - 1) / 2,
            std::string(r.name) + ": engine convention inconsistent");
  }
}

// --- criterion 2: leaderboard reproduction ----------------------------------

void leaderboard_reproduction() {
  for (const char* file : {"leaderboard_ms1m.json", "leaderboard_glint360k.json"}) {
    const auto published =
        metrics::parse_leaderboard_json(slurp(kDataDir + "/" + file));
    require(published.size() == 15, std::string(file) + ": expected 15 rows");
    std::vector<metrics::LeaderboardEntry> shuffled;
    for (std::size_t stride : {3u, 0u, 4u, 1u, 2u}) {
      for (std::size_t i = stride; i < published.size(); i += 5) {
        shuffled.push_back(published[i]);
      }
    }
    const auto ranked = metrics::rank_leaderboard(shuffled);
    for (std::size_t i = 0; i < 15; ++i) {
      require(ranked[i].participant == published[i].participant,
              std::string(file) + ": rank " + std::to_string(i + 1) + " is " +
                  ranked[i].participant + ", published " + published[i].participant);
      if (i > 0) {
        require(ranked[i - 1].weighted_score > ranked[i].weighted_score,
                std::string(file) + ": weighted scores not strictly decreasing at rank " +
                    std::to_string(i + 1));
      }
    }
  }
}

// --- criterion 3: streaming path equals the brute-force oracle --------------

void oracle_equivalence() {
  Philox4x32 rng(2024, 0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    syngen::SynConfig cfg;
    cfg.n_identities = 30 + rng.next_below(140);          // 30..169
    const std::size_t imgs = 3 + rng.next_below(9);       // 3..11
    cfg.images_per_identity = {imgs, imgs};
    cfg.dim = seed % 2 == 0 ? 64 : 512;
    cfg.intra_noise = (0.05 + rng.next_double() * 0.3) / std::sqrt(double(cfg.dim));
    cfg.intra_noise *= 8.0;
    cfg.group_mix = {{0.25, 0.25, 0.25, 0.25}};
    cfg.mask_fraction = 1.0;
    cfg.mask_gap = rng.next_double();
    cfg.seed = seed;
    const auto data = syngen::synthesize(cfg);
    require(data.manifest.size() <= 2000, "set exceeds 2000 images");

    ProtocolSpec spec;
    switch (seed % 3) {
      case 0: spec = protocol_preset("all"); break;
      case 1: spec = protocol_preset("mr"); break;
      default: spec = protocol_preset("masked"); break;
    }
    spec.fpr_targets = {1e-2, 1e-3, 5e-4};

    metrics::EvalOptions opt;
    opt.block_size = 128 + rng.next_below(512);
    opt.workers = 1 + rng.next_below(4);
    const auto streaming = metrics::evaluate(data.embeddings, data.manifest, spec, opt);
    const auto brute = syngen::oracle_evaluate(data.embeddings, data.manifest, spec);
    require(streaming == brute,
            "seed " + std::to_string(seed) + ": streaming and oracle reports differ");
    require(metrics::report_to_json(streaming) == metrics::report_to_json(brute),
            "seed " + std::to_string(seed) + ": serialized reports differ");
  }
}

// --- criterion 4: extreme-FPR operating point -------------------------------

void extreme_fpr() {
  syngen::SynConfig cfg;
  cfg.n_identities = 25;
  cfg.images_per_identity = {82, 82};
  cfg.dim = 64;
  cfg.intra_noise = 0.04;
  cfg.seed = 77;
  const auto data = syngen::synthesize(cfg);

  ProtocolSpec spec = protocol_preset("all");
  spec.fpr_targets = {1e-6};
  metrics::EvalOptions opt;
  opt.workers = 2;
  const auto streaming = metrics::evaluate(data.embeddings, data.manifest, spec, opt);
  require(streaming.pair_stats.n_negative_engine >= 2'000'000,
          "need at least 2e6 negative pairs, got " +
              std::to_string(streaming.pair_stats.n_negative_engine));
  require(streaming.entries[0].k == 2,
          "expected k=2, got " + std::to_string(streaming.entries[0].k));
  require(streaming.entries[0].achieved_fpr <= 1e-6,
          "achieved FPR " + std::to_string(streaming.entries[0].achieved_fpr) + " above 1e-6");
  const auto brute = syngen::oracle_evaluate(data.embeddings, data.manifest, spec);
  require(streaming == brute, "extreme-FPR report differs from the sort oracle");
}

// --- criterion 5: desk-scale run ---------------------------------------------

void desk_scale() {
  syngen::SynConfig cfg;
  cfg.n_identities = 5000;
  cfg.images_per_identity = {10, 10};
  cfg.dim = 512;
  cfg.intra_noise = 0.02;
  cfg.seed = 50'000;
  const auto data = syngen::synthesize(cfg);
  require(data.embeddings.rows() == 50'000, "expected 50k rows");

  ProtocolSpec spec = protocol_preset("all");
  spec.fpr_targets = {1e-6};

  metrics::EvalOptions eight;
  eight.workers = 8;
  const auto t0 = std::chrono::steady_clock::now();
  const auto parallel = metrics::evaluate(data.embeddings, data.manifest, spec, eight);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  require(wall < 300.0, "8-worker run took " + std::to_string(wall) + "s, budget 300s");
  require(rss_gb() < 2.0, "peak rss " + std::to_string(rss_gb()) + " GB, budget 2 GB");

  metrics::EvalOptions one;
  one.workers = 1;
  const auto serial = metrics::evaluate(data.embeddings, data.manifest, spec, one);
  require(parallel == serial, "8-worker and 1-worker results are not bit-identical");
  std::printf("        (8 workers: %.1fs, peak rss %.2f GB, tau %.6f)\n", wall, rss_gb(),
              parallel.entries[0].threshold);
}

// --- criterion 6: gradient verification --------------------------------------

void gradient_check() {
  using namespace pairbench::margin;
  std::size_t instances = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Philox4x32 rng(seed, 600);
    const std::size_t n_classes = 2 + rng.next_below(15);  // <= 16
    const std::size_t dim = 4 + rng.next_below(61);        // <= 64
    MatrixD centers(n_classes, dim);
    for (double& v : centers.data) v = rng.next_gaussian();
    normalize_rows(centers);
    MatrixD emb(1, dim);
    for (double& v : emb.data) v = rng.next_gaussian();
    normalize_rows(emb);
    const std::vector<double> e(emb.data.begin(), emb.data.end());
    const std::size_t label = rng.next_below(n_classes);
    const MarginConfig mcfg{1.0 + rng.next_double() * 63.0, rng.next_double() * 1.4};

    const GradientResult g = margin_gradient(e, centers, label, mcfg);
    double scale = 1e-2;
    for (double v : g.d_embedding) scale = std::max(scale, std::abs(v));
    for (double v : g.d_centers.data) scale = std::max(scale, std::abs(v));

    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t t = 0; t < dim; ++t) {
      std::vector<double> lo = e, hi = e;
      lo[t] -= h;
      hi[t] += h;
      const double fd = (margin_loss(hi, centers, label, mcfg).loss -
                         margin_loss(lo, centers, label, mcfg).loss) /
                        (2 * h);
      worst = std::max(worst, std::abs(fd - g.d_embedding[t]) / scale);
    }
    for (std::size_t j = 0; j < n_classes; ++j) {
      for (std::size_t t = 0; t < dim; ++t) {
        MatrixD lo = centers, hi = centers;
        lo.row(j)[t] -= h;
        hi.row(j)[t] += h;
        const double fd = (margin_loss(e, hi, label, mcfg).loss -
                           margin_loss(e, lo, label, mcfg).loss) /
                          (2 * h);
        worst = std::max(worst, std::abs(fd - g.d_centers.row(j)[t]) / scale);
      }
    }
    require(worst < 1e-5, "instance " + std::to_string(seed) + ": max relative error " +
                              std::to_string(worst));
    ++instances;

    // m=0, s=1 reduction to softmax cross-entropy on cosines.
    std::vector<double> logits(n_classes);
    for (std::size_t j = 0; j < n_classes; ++j) {
      double dot = 0.0;
      for (std::size_t t = 0; t < dim; ++t) dot += e[t] * centers.row(j)[t];
      logits[j] = std::clamp(dot, -1.0 + 1e-7, 1.0 - 1e-7);
    }
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - zmax);
    const double plain_ce = std::log(sum) + zmax - logits[label];
    const double reduced = margin_loss(e, centers, label, {1.0, 0.0}).loss;
    require(std::abs(reduced - plain_ce) < 1e-12,
            "m=0,s=1 reduction off by " + std::to_string(std::abs(reduced - plain_ce)));
  }
  require(instances == 100, "expected 100 instances");
}

// --- criterion 7: augmentation trend -----------------------------------------

void augmentation_trend_criterion() {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = syngen::augmentation_trend(seed);
    const bool win = r.tpr_masked_augmented >= r.tpr_masked_baseline;
    wins += win;
    std::printf("        (seed %llu: masked %.4f -> %.4f%s)\n",
                static_cast<unsigned long long>(seed), r.tpr_masked_baseline,
                r.tpr_masked_augmented, win ? "" : " MISS");
  }
  require(wins >= 4, "masked-side improvement in only " + std::to_string(wins) + "/5 seeds");
}

// --- criterion 8: gate fixtures ----------------------------------------------

void gate_fixtures() {
  const struct {
    const char* file;
    const char* preset;
  } tracks[] = {{"leaderboard_ms1m.json", "ms1m"},
                {"leaderboard_glint360k.json", "glint360k"}};
  for (const auto& track : tracks) {
    const auto rows = metrics::parse_leaderboard_json(slurp(kDataDir + "/" + track.file));
    const auto rules = gate::rules_preset(track.preset);
    for (const auto& row : rows) {
      gate::SubmissionMeta meta;
      meta.participant = row.participant;
      meta.declared_dim = row.feat_dim;
      meta.model_bytes = static_cast<std::uint64_t>(row.size_mb * 1024.0 * 1024.0);
      gate::MeasuredProfile profile;
      profile.ms_per_image = row.time_ms;
      const auto verdict = gate_submission(meta, profile, rules);
      require(verdict.pass, std::string(track.preset) + "/" + row.participant +
                                " should pass but failed");
    }
  }
  // Boundary cases with named reasons.
  gate::SubmissionMeta meta;
  meta.declared_dim = 512;
  meta.model_bytes = 100ULL << 20;
  gate::MeasuredProfile profile;
  profile.ms_per_image = 10.0;  // exactly the bound: strict < fails
  auto verdict = gate_submission(meta, profile, gate::rules_preset("ms1m"));
  require(!verdict.pass && verdict.reasons.size() == 1 && verdict.reasons[0].code == "latency",
          "10.0 ms boundary must fail with the latency reason");
  meta.declared_dim = 513;
  profile.ms_per_image = 5.0;
  verdict = gate_submission(meta, profile, gate::rules_preset("ms1m"));
  require(!verdict.pass && verdict.reasons.size() == 1 && verdict.reasons[0].code == "feat_dim",
          "dim 513 boundary must fail with the feat_dim reason");
}

// --- criterion 9: service round trip ------------------------------------------

void service_round_trip() {
  Scratch scratch;

  // Fixture payload.
  syngen::SynConfig cfg;
  cfg.n_identities = 30;
  cfg.images_per_identity = {3, 3};
  cfg.dim = 32;
  cfg.intra_noise = 0.15;
  cfg.group_mix = {{0.25, 0.25, 0.25, 0.25}};
  cfg.mask_fraction = 1.0;
  cfg.mask_gap = 0.6;
  cfg.seed = 90;
  const auto data = syngen::synthesize(cfg);
  const std::string manifest_path = scratch.str("manifest.jsonl");
  const std::string embeddings_path = scratch.str("embeddings.pbemb");
  save_manifest(data.manifest, manifest_path);
  save_embeddings(data.embeddings, embeddings_path);

  harness::ServiceConfig service_cfg = harness::ServiceConfig::defaults();
  service_cfg.subtracks["ms1m"].masked_fpr = 1e-2;
  service_cfg.subtracks["ms1m"].mr_fpr = 1e-2;
  service_cfg.eval.workers = 2;

  const std::string store_dir = scratch.str("store");
  double service_score = 0.0;
  std::string board_json_before;
  {
    harness::Service service(store_dir, service_cfg);
    harness::HttpServer server(service);
    const int port = server.start("127.0.0.1", 0);
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", port);

    json payload;
    payload["participant"] = "roundtrip";
    payload["subtrack"] = "ms1m";
    payload["manifest"] = manifest_path;
    payload["embeddings"] = embeddings_path;
    payload["meta"] = {{"declared_dim", 32}, {"model_bytes", 4 << 20}, {"ms_per_image", 2.5}};
    const auto res = client.Post("/submit", payload.dump(), "application/json");
    require(res && res->status == 200, "submit failed");
    const std::uint64_t id = json::parse(res->body).at("id").get<std::uint64_t>();

    service.drain();
    const auto status = client.Get("/status/" + std::to_string(id));
    require(status && status->status == 200, "status failed");
    const json record = json::parse(status->body);
    require(record.at("state") == "done",
            "submission ended in state " + record.at("state").get<std::string>());
    service_score = record.at("weighted_score").get<double>();

    const auto board = client.Get("/leaderboard/ms1m");
    require(board && board->status == 200, "leaderboard failed");
    board_json_before = json::parse(board->body).at("entries").dump();
    server.stop();
  }

  // The CLI pipeline over the same inputs must land on the same bits.
  const std::string mask_report = scratch.str("mask.json");
  const std::string mr_report = scratch.str("mr.json");
  const auto shell = [](const std::string& cmd) {
    return WEXITSTATUS(std::system((cmd + " >/dev/null 2>&1").c_str()));
  };
  require(shell(kCli + " evaluate --manifest " + manifest_path + " --embeddings " +
                embeddings_path + " --protocol masked --fpr 1e-2 --out " + mask_report) == 0,
          "CLI masked evaluate failed");
  require(shell(kCli + " evaluate --manifest " + manifest_path + " --embeddings " +
                embeddings_path + " --protocol mr --fpr 1e-2 --out " + mr_report) == 0,
          "CLI mr evaluate failed");
  const json mask = json::parse(slurp(mask_report));
  const json mr = json::parse(slurp(mr_report));
  json entry;
  entry["participant"] = "roundtrip";
  entry["tpr_mask"] = mask.at("entries")[0].at("tpr_percent");
  entry["tpr_mr_all"] = mr.at("groups").at("MR-All").at("entries")[0].at("tpr_percent");
  const std::string entries_path = scratch.str("entries.json");
  {
    std::ofstream out(entries_path);
    out << json::array({entry}).dump();
  }
  const std::string ranked_path = scratch.str("ranked.json");
  require(shell(kCli + " rank --entries " + entries_path + " --json-only --out " +
                ranked_path) == 0,
          "CLI rank failed");
  const double cli_score =
      json::parse(slurp(ranked_path))[0].at("weighted_score").get<double>();
  require(std::memcmp(&cli_score, &service_score, sizeof(double)) == 0,
          "service score " + std::to_string(service_score) + " != CLI score " +
              std::to_string(cli_score));

  // Restart on the same store: identical leaderboard.
  {
    harness::Service revived(store_dir, service_cfg);
    const auto entries = revived.leaderboard("ms1m");
    json roundtripped = json::parse(metrics::leaderboard_to_json(entries));
    require(roundtripped.dump() == board_json_before,
            "leaderboard changed across restart");
  }
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "pair-count closure (published integers, exact)", 1.0, table_closure},
      {2, "leaderboard reproduction (exact order)", 1.0, leaderboard_reproduction},
      {3, "oracle equivalence on 50 randomized sets", 300.0, oracle_equivalence},
      {4, "extreme-FPR path (k=2 at 1e-6)", 30.0, extreme_fpr},
      {5, "desk-scale 50k x 512 (8 workers, <2GB, bit-identical)", 330.0, desk_scale},
      {6, "gradient check (100 instances, <1e-5)", 30.0, gradient_check},
      {7, "augmentation trend (seeds 0-4)", 300.0, augmentation_trend_criterion},
      {8, "gate fixtures (30 rows + boundaries)", 1.0, gate_fixtures},
      {9, "service round trip (HTTP, CLI parity, restart)", 120.0, service_round_trip},
  };

  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.run();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (error.empty() && elapsed > c.budget_s) {
      error = "exceeded the " + std::to_string(c.budget_s) + "s budget";
    }
    std::printf("[%s] %d. %s (%.2fs)\n", error.empty() ? "PASS" : "FAIL", c.id, c.name,
                elapsed);
    if (!error.empty()) {
      std::printf("        %s\n", error.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures;
}
