#pragma once

#include "sfuda/class_align.hpp"
#include "sfuda/core.hpp"
#include "sfuda/probing.hpp"

#include <cstdint>
#include <vector>

namespace sfuda {

/// Affine map z -> M z + b applied to features before the frozen classifier.
struct FeatureAdapter {
  Matrix transform;  // D x D
  Vector offset;     // D

  static FeatureAdapter identity(Eigen::Index dim) {
    return {Matrix::Identity(dim, dim), Vector::Zero(dim)};
  }
  /// Adapted features, one row per sample.
  Matrix apply(const Matrix& feats) const {
    Matrix out = feats * transform.transpose();
    out.rowwise() += offset.transpose();
    return out;
  }
};

struct ShotConfig {
  int epochs = 15;
  double learning_rate = 1e-2;
  /// Weight of the pseudo-label cross-entropy term.
  double beta = 0.3;
  /// Gradient steps per epoch; stops early once the gradient's infinity norm is below grad_tol.
  int steps_per_epoch = 50;
  double grad_tol = 1e-8;
  /// Clustering rounds per pseudo-label refresh; each round re-seeds k-means from the
  /// soft-prediction prototypes of the previous round's labels.
  int cluster_rounds = 1;
  KMeansConfig kmeans;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ImLoss {
  double value = 0.0;
  Matrix grad_logits;  // N x C
};

/// Information maximization loss: mean per-sample entropy plus sum_c pbar_c log pbar_c,
/// pbar being the mean prediction. The gradient is with respect to the pre-softmax logits.
ImLoss im_loss(const SoftPredictions& probs);

struct PseudoLabels {
  std::vector<int> labels;
  Prototypes prototypes;
};

/// Soft-prediction prototypes refined by spherical k-means, then nearest-prototype labels.
PseudoLabels shot_pseudo_labels(const LinearClassifier& clf, const Matrix& target,
                                const KMeansConfig& cfg = {}, int rounds = 1);

struct AdapterLoss {
  double value = 0.0;
  Matrix grad_transform;
  Vector grad_offset;
};

/// L_IM + beta * CE(pseudo labels) of the frozen classifier on adapter-transformed
/// features, with the gradient with respect to the adapter parameters.
AdapterLoss adapter_loss(const FeatureAdapter& adapter, const LinearClassifier& clf,
                         const Matrix& target, const std::vector<int>& pseudo, double beta);

struct ShotResult {
  FeatureAdapter adapter;
  /// Accuracy before adaptation followed by the accuracy after each epoch.
  std::vector<double> accuracy_trace;
  /// Loss after every accepted gradient step, per epoch.
  std::vector<std::vector<double>> loss_trace;
  std::vector<int> predictions;
  double target_accuracy = 0.0;
};

/// SHOT-lite: alternates pseudo-labelling with full-batch gradient descent on an affine
/// feature adapter, keeping the classifier fixed. Target labels only feed the accuracy trace;
/// pass an unlabeled target to skip scoring (the trace is then empty).
ShotResult shot_lite_adapt(const LinearClassifier& clf, const LabeledDomain& target,
                           const ShotConfig& cfg = {});

/// Per-dimension mean and population standard deviation (floored at kStdFloor).
struct FeatureStats {
  static constexpr double kStdFloor = 1e-8;
  Vector mean;
  Vector std;
};

FeatureStats estimate_stats(const Matrix& feats);

/// Column j becomes (x_j - mean_j) / std_j.
Matrix standardize(const Matrix& feats, const FeatureStats& stats);

}  // namespace sfuda
