#include "pairbench/gate/gate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <json.hpp>

#include "pairbench/core/error.hpp"

namespace pairbench::gate {

using nlohmann::json;

void SubtrackRules::validate() const {
  if (!(max_size_mb > 0.0) || max_feat_dim == 0 || !(max_ms_per_image > 0.0)) {
    throw Error("rules '" + name + "': all bounds must be positive");
  }
}

SubtrackRules rules_preset(const std::string& name) {
  if (name == "ms1m") return {"ms1m", 1024.0, 512, 10.0};
  if (name == "glint360k") return {"glint360k", 1024.0, 1024, 20.0};
  throw Error("unknown rules preset: '" + name + "'");
}

SubtrackRules parse_rules_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("rules: malformed JSON: ") + e.what());
  }
  SubtrackRules r;
  r.name = j.at("name").get<std::string>();
  r.max_size_mb = j.at("max_size_mb").get<double>();
  r.max_feat_dim = j.at("max_feat_dim").get<std::uint32_t>();
  r.max_ms_per_image = j.at("max_ms_per_image").get<double>();
  r.validate();
  return r;
}

std::string rules_to_json(const SubtrackRules& rules) {
  return json{{"name", rules.name},
              {"max_size_mb", rules.max_size_mb},
              {"max_feat_dim", rules.max_feat_dim},
              {"max_ms_per_image", rules.max_ms_per_image}}
      .dump(2);
}

GateVerdict gate_submission(const SubmissionMeta& meta, const MeasuredProfile& profile,
                            const SubtrackRules& rules) {
  rules.validate();
  GateVerdict v;
  const double size_mb = static_cast<double>(meta.model_bytes) / (1024.0 * 1024.0);
  if (!(size_mb < rules.max_size_mb)) {
    v.reasons.push_back({"model_size", std::to_string(size_mb) + " MB, must be < " +
                                           std::to_string(rules.max_size_mb) + " MB"});
  }
  if (meta.declared_dim > rules.max_feat_dim) {
    v.reasons.push_back({"feat_dim", std::to_string(meta.declared_dim) + " > " +
                                         std::to_string(rules.max_feat_dim)});
  }
  if (!(profile.ms_per_image < rules.max_ms_per_image)) {
    v.reasons.push_back({"latency", std::to_string(profile.ms_per_image) +
                                        " ms/image, must be < " +
                                        std::to_string(rules.max_ms_per_image) + " ms"});
  }
  v.pass = v.reasons.empty();
  return v;
}

std::string verdict_to_json(const GateVerdict& verdict) {
  json reasons = json::array();
  for (const auto& r : verdict.reasons) {
    reasons.push_back(json{{"code", r.code}, {"detail", r.detail}});
  }
  return json{{"pass", verdict.pass}, {"reasons", reasons}}.dump(2);
}

MeasuredProfile measure_latency(EmbeddingExtractor& extractor,
                                std::span<const std::vector<std::uint8_t>> probe_batch,
                                std::size_t warmup, std::size_t reps,
                                std::uint32_t declared_dim) {
  if (reps < 3) throw Error("measure_latency: need at least 3 timed reps");
  if (probe_batch.empty()) throw Error("measure_latency: empty probe batch");
  if (extractor.feature_dim() != declared_dim) {
    throw Error("measure_latency: extractor emits dim " +
                std::to_string(extractor.feature_dim()) + " but submission declares " +
                std::to_string(declared_dim));
  }

  const auto run_once = [&] {
    for (const auto& blob : probe_batch) {
      std::vector<float> out;
      try {
        out = extractor.extract(blob);
      } catch (const std::exception& e) {
        throw Error(std::string("measure_latency: extractor failed: ") + e.what());
      }
      if (out.size() != declared_dim) {
        throw Error("measure_latency: extractor emitted dim " + std::to_string(out.size()) +
                    " but submission declares " + std::to_string(declared_dim));
      }
    }
  };

  for (std::size_t i = 0; i < warmup; ++i) run_once();

  std::vector<double> per_image_ms;
  per_image_ms.reserve(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    const auto start = std::chrono::steady_clock::now();
    run_once();
    const auto stop = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(stop - start).count();
    per_image_ms.push_back(ms / static_cast<double>(probe_batch.size()));
  }
  std::sort(per_image_ms.begin(), per_image_ms.end());
  const std::size_t mid = per_image_ms.size() / 2;
  const double median = per_image_ms.size() % 2 == 1
                            ? per_image_ms[mid]
                            : 0.5 * (per_image_ms[mid - 1] + per_image_ms[mid]);

  MeasuredProfile p;
  p.ms_per_image = median;
  p.batch_size = probe_batch.size();
  p.warmup = warmup;
  p.reps = reps;
  return p;
}

}  // namespace pairbench::gate
