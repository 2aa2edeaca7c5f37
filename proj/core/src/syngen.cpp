#include "pairbench/syngen/syngen.hpp"

#include <cmath>

#include <json.hpp>

#include "pairbench/core/error.hpp"
#include "pairbench/core/rng.hpp"

namespace pairbench::syngen {

namespace {

void normalize_d(std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (!(sq > 0.0)) throw Error("syngen: cannot normalize a zero vector");
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
}

void fill_gaussian(Philox4x32& rng, std::vector<double>& v) {
  for (double& x : v) x = rng.next_gaussian();
}

}  // namespace

void SynConfig::validate() const {
  if (dim < 2) throw Error("syngen: dim must be >= 2");
  if (n_identities < 1) throw Error("syngen: need at least one identity");
  if (images_per_identity.min < 1 || images_per_identity.max < images_per_identity.min) {
    throw Error("syngen: bad images_per_identity range");
  }
  if (intra_noise < 0.0) throw Error("syngen: intra_noise must be >= 0");
  if (mask_fraction < 0.0 || mask_fraction > 1.0) {
    throw Error("syngen: mask_fraction must lie in [0,1]");
  }
  if (mask_gap < 0.0) throw Error("syngen: mask_gap must be >= 0");
  if (augment_prob < 0.0 || augment_prob > 1.0) {
    throw Error("syngen: augment_prob must lie in [0,1]");
  }
  if (mask_fraction > 0.0 && images_per_identity.min < 3) {
    throw Error("syngen: mask emulation needs at least 3 images per identity "
                "(1 masked + 2 non-masked)");
  }
  if (group_mix) {
    double sum = 0.0;
    for (double w : *group_mix) {
      if (w < 0.0) throw Error("syngen: group weights must be >= 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error("syngen: group weights must sum to 1");
  }
}

SynConfig synconfig_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("syngen config: malformed JSON: ") + e.what());
  }
  SynConfig c;
  c.n_identities = j.value("n_identities", c.n_identities);
  if (j.contains("images_per_identity")) {
    const auto& ipi = j["images_per_identity"];
    if (ipi.is_number()) {
      c.images_per_identity.min = c.images_per_identity.max = ipi.get<std::size_t>();
    } else {
      c.images_per_identity.min = ipi.at("min").get<std::size_t>();
      c.images_per_identity.max = ipi.at("max").get<std::size_t>();
    }
  }
  c.dim = j.value("dim", c.dim);
  c.intra_noise = j.value("intra_noise", c.intra_noise);
  if (j.contains("group_mix") && !j["group_mix"].is_null()) {
    std::array<double, kGroupCount> mix{};
    const auto& gm = j["group_mix"];
    if (gm.size() != kGroupCount) throw Error("syngen config: group_mix needs 4 weights");
    for (std::size_t i = 0; i < kGroupCount; ++i) mix[i] = gm[i].get<double>();
    c.group_mix = mix;
  }
  if (j.contains("group_sigma_scale")) {
    const auto& gs = j["group_sigma_scale"];
    if (gs.size() != kGroupCount) throw Error("syngen config: group_sigma_scale needs 4 values");
    for (std::size_t i = 0; i < kGroupCount; ++i) c.group_sigma_scale[i] = gs[i].get<double>();
  }
  c.mask_fraction = j.value("mask_fraction", c.mask_fraction);
  c.mask_gap = j.value("mask_gap", c.mask_gap);
  c.augment_prob = j.value("augment_prob", c.augment_prob);
  c.seed = j.value("seed", c.seed);
  c.name = j.value("name", c.name);
  c.validate();
  return c;
}

std::string synconfig_to_json(const SynConfig& config) {
  nlohmann::json j;
  j["n_identities"] = config.n_identities;
  j["images_per_identity"] = {{"min", config.images_per_identity.min},
                              {"max", config.images_per_identity.max}};
  j["dim"] = config.dim;
  j["intra_noise"] = config.intra_noise;
  if (config.group_mix) {
    j["group_mix"] = *config.group_mix;
  } else {
    j["group_mix"] = nullptr;
  }
  j["group_sigma_scale"] = config.group_sigma_scale;
  j["mask_fraction"] = config.mask_fraction;
  j["mask_gap"] = config.mask_gap;
  j["augment_prob"] = config.augment_prob;
  j["seed"] = config.seed;
  j["name"] = config.name;
  return j.dump(2);
}

std::vector<double> mask_direction(std::size_t dim, std::uint64_t seed) {
  Philox4x32 rng(seed, /*stream=*/0);
  std::vector<double> u(dim);
  fill_gaussian(rng, u);
  normalize_d(u);
  return u;
}

std::vector<double> apply_mask_shift(std::span<const double> embedding, double gamma,
                                     std::span<const double> direction) {
  std::vector<double> out(embedding.begin(), embedding.end());
  if (gamma == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += gamma * direction[i];
  normalize_d(out);
  return out;
}

void apply_mask_shift(std::span<float> row, double gamma, std::span<const double> direction) {
  if (gamma == 0.0) return;
  std::vector<double> tmp(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) tmp[i] = row[i] + gamma * direction[i];
  normalize_d(tmp);
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(tmp[i]);
}

SynOutput synthesize(const SynConfig& config) {
  config.validate();

  SynOutput out;
  out.manifest.name = config.name;
  out.mask_direction = mask_direction(config.dim, config.seed);

  // The mask direction re-consumes stream 0 from the start, so the generator
  // proper continues on the same stream right after those draws.
  Philox4x32 rng(config.seed, /*stream=*/0);
  {
    std::vector<double> scratch(config.dim);
    fill_gaussian(rng, scratch);  // skip the mask-direction draws
  }

  const std::size_t n_masked_ids = static_cast<std::size_t>(
      std::llround(config.mask_fraction * static_cast<double>(config.n_identities)));

  std::vector<double> center(config.dim), noise(config.dim), image(config.dim);
  std::vector<float> rows;

  for (std::size_t id = 0; id < config.n_identities; ++id) {
    Group group = Group::None;
    if (config.group_mix) {
      const double draw = rng.next_double();
      double cum = 0.0;
      std::size_t g = kGroupCount - 1;
      for (std::size_t i = 0; i < kGroupCount; ++i) {
        cum += (*config.group_mix)[i];
        if (draw < cum) {
          g = i;
          break;
        }
      }
      group = static_cast<Group>(g);
    }

    std::size_t n_images = config.images_per_identity.min;
    if (config.images_per_identity.max > config.images_per_identity.min) {
      const std::uint64_t span =
          config.images_per_identity.max - config.images_per_identity.min + 1;
      n_images += static_cast<std::size_t>(rng.next_below(span));
    }

    fill_gaussian(rng, center);
    normalize_d(center);

    const double sigma =
        config.intra_noise *
        (group == Group::None ? 1.0 : config.group_sigma_scale[static_cast<std::size_t>(group)]);
    const bool id_masked = id < n_masked_ids;

    for (std::size_t img = 0; img < n_images; ++img) {
      fill_gaussian(rng, noise);
      for (std::size_t t = 0; t < config.dim; ++t) image[t] = center[t] + sigma * noise[t];
      normalize_d(image);

      const bool masked = id_masked && img == 0;  // first image wears the mask
      if (masked) image = apply_mask_shift(image, config.mask_gap, out.mask_direction);

      ImageRecord rec;
      rec.image_id = "id" + std::to_string(id) + "_img" + std::to_string(img);
      rec.identity_id = "id" + std::to_string(id);
      rec.group = group;
      rec.masked = masked;
      rec.role = Role::Any;
      out.manifest.records.push_back(std::move(rec));
      out.identity_index.push_back(id);

      for (double v : image) rows.push_back(static_cast<float>(v));
    }
  }

  out.embeddings =
      EmbeddingSet(out.manifest.records.size(), config.dim, std::move(rows));
  return out;
}

}  // namespace pairbench::syngen
