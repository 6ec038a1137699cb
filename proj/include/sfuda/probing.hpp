#pragma once

#include "sfuda/core.hpp"

#include <vector>

namespace sfuda {

/// Settings for the full-batch gradient-descent multinomial regression solver.
struct FitConfig {
  double lambda = 0.01;
  int max_iters = 10000;
  double grad_tol = 1e-6;
  double step_size = 1.0;
  bool use_bias = false;

  void validate() const;
};

/// lambda * ||W||_F^2 + mean negative log-likelihood. The bias is not penalized.
double multinomial_objective(const LinearClassifier& clf, const LabeledDomain& train);

/// Gradient of multinomial_objective; returns {dW, db} (db empty when the model has no bias).
std::pair<Matrix, Vector> multinomial_gradient(const LinearClassifier& clf,
                                               const LabeledDomain& train);

/// L2-regularized multinomial logistic regression, started from W = 0.
///
/// Fixed-step gradient descent. A step that raises the objective is rejected and the
/// step size halved, so the objective is non-increasing over accepted iterations.
/// Stops when the gradient's infinity norm falls below grad_tol; otherwise returns
/// the last iterate with converged = false.
LinearClassifier fit_multinomial(const LabeledDomain& train, const FitConfig& cfg = {});

/// Logits W z + b for every row of feats.
Matrix logits(const LinearClassifier& clf, const Matrix& feats);

SoftPredictions predict_proba(const LinearClassifier& clf, const Matrix& feats);

/// Argmax class per row, ties to the lowest index.
std::vector<int> predict_labels(const LinearClassifier& clf, const Matrix& feats);

double lp_accuracy(const LinearClassifier& clf, const LabeledDomain& test);

/// Per-class mean of the labeled features; rows are not normalized.
Prototypes class_prototypes(const LabeledDomain& train);

/// 1/2 - <a,b> / (2 |a| |b|), in [0, 1].
template <typename A, typename B>
double cosine_dissim(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  return 0.5 - 0.5 * a.dot(b) / (na * nb);
}

/// Nearest-prototype labels under cosine dissimilarity. Stale centroids never win;
/// ties go to the lowest class index.
std::vector<int> cp_classify(const Prototypes& protos, const Matrix& feats);

double cp_accuracy(const LabeledDomain& train, const LabeledDomain& test);

}  // namespace sfuda
