#include "pairbench/syngen/experiment.hpp"

#include "pairbench/metrics/evaluate.hpp"

namespace pairbench::syngen {

namespace {

using margin::MatrixD;

MatrixD to_double(const EmbeddingSet& set) {
  MatrixD m(set.rows(), set.dim());
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = set.data()[i];
  return m;
}

EmbeddingSet to_float(const MatrixD& m) {
  std::vector<float> data(m.data.size());
  for (std::size_t i = 0; i < m.data.size(); ++i) data[i] = static_cast<float>(m.data[i]);
  return EmbeddingSet(m.rows, m.cols, std::move(data));
}

double masked_tpr(const EmbeddingSet& set, const Manifest& manifest, double fpr_target) {
  ProtocolSpec spec = protocol_preset("masked");
  spec.fpr_targets = {fpr_target};
  return metrics::evaluate(set, manifest, spec).entries[0].tpr;
}

double unmasked_tpr(const EmbeddingSet& set, const Manifest& manifest, double fpr_target) {
  ProtocolSpec spec;
  spec.name = "unmasked";
  spec.pairing = Pairing::AllPairs;
  spec.scope_filter.masked = false;
  spec.fpr_targets = {fpr_target};
  return metrics::evaluate(set, manifest, spec).entries[0].tpr;
}

}  // namespace

TrendResult augmentation_trend(std::uint64_t seed, const TrendConfig& config) {
  SynConfig syn;
  syn.n_identities = config.n_identities;
  syn.images_per_identity = {config.images_per_identity, config.images_per_identity};
  syn.dim = config.dim;
  syn.intra_noise = config.intra_noise;
  syn.mask_fraction = 1.0;
  syn.mask_gap = config.mask_gap;
  syn.seed = seed;
  syn.name = "trend";
  const SynOutput data = synthesize(syn);

  const MatrixD dataset = to_double(data.embeddings);
  const std::vector<std::size_t>& labels = data.identity_index;

  margin::TrainOptions plain;
  plain.steps = config.steps;
  plain.step_size = config.step_size;
  plain.seed = seed;

  margin::TrainOptions augmented = plain;
  augmented.augmentation.prob = config.augment_prob;
  augmented.augmentation.gamma = config.mask_gap;
  augmented.augmentation.direction = data.mask_direction;

  TrendResult r;
  const auto run = [&](const margin::TrainOptions& opts, std::vector<double>& trace) {
    auto trained = margin::toy_train(dataset, labels, config.margin, opts);
    trace = std::move(trained.loss_trace);
    return to_float(trained.embeddings);
  };
  const EmbeddingSet refined_plain = run(plain, r.loss_trace_baseline);
  const EmbeddingSet refined_aug = run(augmented, r.loss_trace_augmented);

  r.tpr_masked_baseline = masked_tpr(refined_plain, data.manifest, config.fpr_target);
  r.tpr_masked_augmented = masked_tpr(refined_aug, data.manifest, config.fpr_target);
  r.tpr_unmasked_baseline = unmasked_tpr(refined_plain, data.manifest, config.fpr_target);
  r.tpr_unmasked_augmented = unmasked_tpr(refined_aug, data.manifest, config.fpr_target);
  return r;
}

}  // namespace pairbench::syngen
