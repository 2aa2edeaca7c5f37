#include "pairbench/margin/margin.hpp"

#include <algorithm>
#include <cmath>

#include "pairbench/core/error.hpp"
#include "pairbench/core/rng.hpp"

namespace pairbench::margin {

namespace {

constexpr double kCosClamp = 1.0 - 1e-7;  // keeps d(arccos) finite at the poles
constexpr double kHalfPi = 1.5707963267948966;

double dot_d(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_unit(std::span<const double> v, const char* what) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (std::abs(std::sqrt(sq) - 1.0) > 1e-4) {
    throw Error(std::string("margin: ") + what + " is not unit-norm (|v| = " +
                std::to_string(std::sqrt(sq)) + ")");
  }
}

struct Cosines {
  std::vector<double> clamped;      // clamp(dot(e, c_j))
  std::vector<std::uint8_t> saturated;  // clamp active: derivative is zero
};

Cosines cosines_against(std::span<const double> embedding, const MatrixD& centers) {
  Cosines out;
  out.clamped.resize(centers.rows);
  out.saturated.resize(centers.rows, 0);
  for (std::size_t j = 0; j < centers.rows; ++j) {
    const double u = dot_d(embedding, centers.row(j));
    if (u > kCosClamp) {
      out.clamped[j] = kCosClamp;
      out.saturated[j] = 1;
    } else if (u < -kCosClamp) {
      out.clamped[j] = -kCosClamp;
      out.saturated[j] = 1;
    } else {
      out.clamped[j] = u;
    }
  }
  return out;
}

// cos(theta + m) written algebraically so m = 0 reduces to the identity map
// exactly. Saturates at cos(pi) = -1 once theta + m passes pi.
double shifted_cos(double u, double cos_m, double sin_m, bool* saturated_angle) {
  if (u < -cos_m) {
    *saturated_angle = true;
    return -1.0;
  }
  *saturated_angle = false;
  return u * cos_m - std::sqrt(1.0 - u * u) * sin_m;
}

double shifted_cos_derivative(double u, double cos_m, double sin_m) {
  return cos_m + u * sin_m / std::sqrt(1.0 - u * u);
}

struct Forward {
  double loss;
  std::vector<double> logits;
  std::vector<double> probs;
  double target_derivative_factor;  // d(target logit)/d(cosine), without s
  Cosines cos;
};

Forward forward(std::span<const double> embedding, const MatrixD& centers, std::size_t label,
                const MarginConfig& cfg) {
  cfg.validate();
  if (label >= centers.rows) {
    throw Error("margin: label " + std::to_string(label) + " out of range for " +
                std::to_string(centers.rows) + " classes");
  }
  if (embedding.size() != centers.cols) {
    throw Error("margin: embedding dim " + std::to_string(embedding.size()) +
                " does not match centers dim " + std::to_string(centers.cols));
  }
  check_unit(embedding, "embedding");
  for (std::size_t j = 0; j < centers.rows; ++j) check_unit(centers.row(j), "center");

  Forward f;
  f.cos = cosines_against(embedding, centers);
  const double cos_m = std::cos(cfg.margin);
  const double sin_m = std::sin(cfg.margin);

  f.logits.resize(centers.rows);
  bool angle_saturated = false;
  for (std::size_t j = 0; j < centers.rows; ++j) {
    const double u = f.cos.clamped[j];
    f.logits[j] =
        cfg.scale * (j == label ? shifted_cos(u, cos_m, sin_m, &angle_saturated) : u);
  }
  f.target_derivative_factor =
      (angle_saturated || f.cos.saturated[label])
          ? 0.0
          : shifted_cos_derivative(f.cos.clamped[label], cos_m, sin_m);

  const double z_max = *std::max_element(f.logits.begin(), f.logits.end());
  double sum = 0.0;
  f.probs.resize(centers.rows);
  for (std::size_t j = 0; j < centers.rows; ++j) {
    f.probs[j] = std::exp(f.logits[j] - z_max);
    sum += f.probs[j];
  }
  for (double& p : f.probs) p /= sum;
  f.loss = std::log(sum) + z_max - f.logits[label];
  return f;
}

}  // namespace

void MarginConfig::validate() const {
  if (!(scale > 0.0)) throw Error("margin: scale must be positive");
  if (!(margin >= 0.0 && margin < kHalfPi)) {
    throw Error("margin: angular margin must lie in [0, pi/2)");
  }
}

LossResult margin_loss(std::span<const double> embedding, const MatrixD& centers,
                       std::size_t label, const MarginConfig& cfg) {
  Forward f = forward(embedding, centers, label, cfg);
  return {f.loss, std::move(f.logits)};
}

GradientResult margin_gradient(std::span<const double> embedding, const MatrixD& centers,
                               std::size_t label, const MarginConfig& cfg) {
  const Forward f = forward(embedding, centers, label, cfg);
  GradientResult g;
  g.loss = f.loss;
  g.d_embedding.assign(embedding.size(), 0.0);
  g.d_centers = MatrixD(centers.rows, centers.cols);

  for (std::size_t j = 0; j < centers.rows; ++j) {
    const double dz = f.probs[j] - (j == label ? 1.0 : 0.0);
    const double factor =
        cfg.scale * dz *
        (j == label ? f.target_derivative_factor : (f.cos.saturated[j] ? 0.0 : 1.0));
    if (factor == 0.0) continue;
    const auto center = centers.row(j);
    auto d_center = g.d_centers.row(j);
    for (std::size_t t = 0; t < embedding.size(); ++t) {
      g.d_embedding[t] += factor * center[t];
      d_center[t] = factor * embedding[t];
    }
  }
  return g;
}

void normalize_rows(MatrixD& m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto row = m.row(i);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    if (!(sq > 0.0) || !std::isfinite(sq)) {
      throw Error("normalize_rows: zero or non-finite norm at row " + std::to_string(i));
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : row) v *= inv;
  }
}

TrainResult toy_train(const MatrixD& dataset, std::span<const std::size_t> labels,
                      const MarginConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  if (labels.size() != dataset.rows) {
    throw Error("toy_train: " + std::to_string(labels.size()) + " labels for " +
                std::to_string(dataset.rows) + " samples");
  }
  if (dataset.rows == 0) throw Error("toy_train: empty dataset");
  if (!(options.step_size > 0.0)) throw Error("toy_train: step_size must be positive");
  std::size_t n_classes = 0;
  for (std::size_t l : labels) n_classes = std::max(n_classes, l + 1);
  if (n_classes < 2) throw Error("toy_train: need at least 2 classes");
  const auto& aug = options.augmentation;
  const bool augmenting = aug.prob > 0.0;
  if (augmenting) {
    if (aug.direction.size() != dataset.cols) {
      throw Error("toy_train: augmentation direction dim mismatch");
    }
    if (!aug.eligible.empty() && aug.eligible.size() != dataset.rows) {
      throw Error("toy_train: augmentation eligibility size mismatch");
    }
  }

  TrainResult result;
  result.embeddings = dataset;
  result.model.config = cfg;
  result.model.centers = MatrixD(n_classes, dataset.cols);
  {
    Philox4x32 rng(options.seed, /*stream=*/0);
    for (double& v : result.model.centers.data) v = rng.next_gaussian();
    normalize_rows(result.model.centers);
  }

  Philox4x32 aug_rng(options.seed, /*stream=*/1);
  MatrixD& X = result.embeddings;
  MatrixD& C = result.model.centers;
  const std::size_t n = X.rows;

  std::vector<double> presented(X.cols);
  MatrixD grad_x(n, X.cols);
  MatrixD grad_c(C.rows, C.cols);

  for (std::size_t step = 0; step < options.steps; ++step) {
    std::fill(grad_x.data.begin(), grad_x.data.end(), 0.0);
    std::fill(grad_c.data.begin(), grad_c.data.end(), 0.0);
    double loss_sum = 0.0;

    for (std::size_t i = 0; i < n; ++i) {
      std::span<const double> x = X.row(i);
      if (augmenting) {
        // One draw per (step, sample) keeps streams aligned regardless of
        // which samples end up eligible.
        const double draw = aug_rng.next_double();
        const bool eligible = aug.eligible.empty() || aug.eligible[i] != 0;
        if (eligible && draw < aug.prob) {
          double sq = 0.0;
          for (std::size_t t = 0; t < X.cols; ++t) {
            presented[t] = x[t] + aug.gamma * aug.direction[t];
            sq += presented[t] * presented[t];
          }
          if (!(sq > 0.0)) throw Error("toy_train: augmentation produced a zero vector");
          const double inv = 1.0 / std::sqrt(sq);
          for (double& v : presented) v *= inv;
          x = presented;
        }
      }
      GradientResult g = margin_gradient(x, C, labels[i], cfg);
      loss_sum += g.loss;
      auto gx = grad_x.row(i);
      for (std::size_t t = 0; t < X.cols; ++t) gx[t] = g.d_embedding[t];
      for (std::size_t t = 0; t < grad_c.data.size(); ++t) grad_c.data[t] += g.d_centers.data[t];
    }

    const double mean_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(mean_loss)) {
      throw Error("toy_train: diverged at step " + std::to_string(step) +
                  " (non-finite loss)");
    }
    result.loss_trace.push_back(mean_loss);

    // Per-sample gradients step the embeddings; centers step on the batch
    // mean. Everything is re-normalized onto the sphere after the update.
    for (std::size_t i = 0; i < n; ++i) {
      auto x = X.row(i);
      auto gx = grad_x.row(i);
      for (std::size_t t = 0; t < X.cols; ++t) x[t] -= options.step_size * gx[t];
    }
    normalize_rows(X);
    const double center_scale = options.step_size / static_cast<double>(n);
    for (std::size_t t = 0; t < C.data.size(); ++t) C.data[t] -= center_scale * grad_c.data[t];
    normalize_rows(C);
  }
  return result;
}

}  // namespace pairbench::margin
