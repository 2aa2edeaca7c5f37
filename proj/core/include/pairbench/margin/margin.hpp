#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pairbench::margin {

// Additive angular margin configuration. The track baselines run s=64, m=0.5.
struct MarginConfig {
  double scale = 64.0;
  double margin = 0.5;  // radians

  void validate() const;  // s > 0, m in [0, pi/2)
};

// Row-major double matrix for the margin/training paths; all margin math runs
// in double so the finite-difference checks have headroom.
struct MatrixD {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  MatrixD() = default;
  MatrixD(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  bool operator==(const MatrixD&) const = default;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> logits;
};

// Target logit s*cos(theta_label + m), non-target logits s*cos(theta_j),
// cross-entropy over the softmax. Cosines are clamped to [-1+1e-7, 1-1e-7]
// before the angle shift; a shifted angle past pi saturates at pi.
LossResult margin_loss(std::span<const double> embedding, const MatrixD& centers,
                       std::size_t label, const MarginConfig& cfg);

struct GradientResult {
  double loss = 0.0;
  std::vector<double> d_embedding;
  MatrixD d_centers;
};

GradientResult margin_gradient(std::span<const double> embedding, const MatrixD& centers,
                               std::size_t label, const MarginConfig& cfg);

struct ToyModel {
  MatrixD centers;  // one unit-norm center per class
  MarginConfig config;
};

// Mask-style augmentation for training: with probability prob an eligible
// sample presents as its gamma-shifted copy for that step. The shift is a
// data transform, so the view's gradient steps both the shared centers and
// the stored sample.
struct MaskAugmentation {
  double prob = 0.0;
  double gamma = 0.0;
  std::vector<double> direction;        // unit vector, dim of the dataset
  std::vector<std::uint8_t> eligible;   // per sample; empty means all eligible
};

struct TrainOptions {
  std::size_t steps = 100;
  double step_size = 0.01;
  std::uint64_t seed = 0;
  MaskAugmentation augmentation;
};

struct TrainResult {
  ToyModel model;
  MatrixD embeddings;              // refined, unit-norm rows
  std::vector<double> loss_trace;  // mean loss per step, before the update
};

// Full-batch gradient descent with re-normalization of embeddings and centers
// after every step. Deterministic per seed; a non-finite mean loss aborts
// with an error.
TrainResult toy_train(const MatrixD& dataset, std::span<const std::size_t> labels,
                      const MarginConfig& cfg, const TrainOptions& options);

// Unit-normalizes in place; errors on a zero row.
void normalize_rows(MatrixD& m);

}  // namespace pairbench::margin
