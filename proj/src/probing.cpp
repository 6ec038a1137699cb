#include "sfuda/probing.hpp"

#include <limits>

namespace sfuda {
namespace {

void check_dim(const LinearClassifier& clf, const Matrix& feats) {
  if (feats.cols() != clf.dim()) {
    throw Error(ErrorCode::DimMismatch, "features have " + std::to_string(feats.cols()) +
                                            " columns, classifier expects " +
                                            std::to_string(clf.dim()));
  }
}

// Mean negative log-likelihood from logits, computed with log-sum-exp.
double mean_nll(const Matrix& z, const std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    const double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
    total += lse - z(i, labels[static_cast<size_t>(i)]);
  }
  return total / static_cast<double>(z.rows());
}

}  // namespace

void FitConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::InvalidConfig, "lambda must be >= 0");
  }
  if (max_iters < 1) throw Error(ErrorCode::InvalidConfig, "max_iters must be >= 1");
  if (!(grad_tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "grad_tol must be > 0");
  if (!(step_size > 0.0)) throw Error(ErrorCode::InvalidConfig, "step_size must be > 0");
}

Matrix logits(const LinearClassifier& clf, const Matrix& feats) {
  check_dim(clf, feats);
  Matrix z = feats * clf.weights.transpose();
  if (clf.has_bias()) z.rowwise() += clf.bias.transpose();
  return z;
}

SoftPredictions predict_proba(const LinearClassifier& clf, const Matrix& feats) {
  return {softmax_rows(logits(clf, feats))};
}

std::vector<int> predict_labels(const LinearClassifier& clf, const Matrix& feats) {
  const Matrix z = logits(clf, feats);
  std::vector<int> out(static_cast<size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    out[static_cast<size_t>(i)] = static_cast<int>(argmax_lowest(z.row(i)));
  }
  return out;
}

double multinomial_objective(const LinearClassifier& clf, const LabeledDomain& train) {
  return clf.lambda * clf.weights.squaredNorm() + mean_nll(logits(clf, train.features), train.labels);
}

std::pair<Matrix, Vector> multinomial_gradient(const LinearClassifier& clf,
                                               const LabeledDomain& train) {
  Matrix residual = predict_proba(clf, train.features).probs;
  for (Eigen::Index i = 0; i < residual.rows(); ++i) {
    residual(i, train.labels[static_cast<size_t>(i)]) -= 1.0;
  }
  residual /= static_cast<double>(train.rows());
  Matrix grad_w = residual.transpose() * train.features + 2.0 * clf.lambda * clf.weights;
  Vector grad_b;
  if (clf.has_bias()) grad_b = residual.colwise().sum().transpose();
  return {std::move(grad_w), std::move(grad_b)};
}

LinearClassifier fit_multinomial(const LabeledDomain& train, const FitConfig& cfg) {
  cfg.validate();
  validate_domain(train, DomainRole::Source);

  LinearClassifier clf;
  clf.lambda = cfg.lambda;
  clf.weights = Matrix::Zero(train.num_classes, train.dim());
  if (cfg.use_bias) clf.bias = Vector::Zero(train.num_classes);

  auto grad_inf = [](const std::pair<Matrix, Vector>& g) {
    double n = g.first.lpNorm<Eigen::Infinity>();
    if (g.second.size() != 0) n = std::max(n, g.second.lpNorm<Eigen::Infinity>());
    return n;
  };

  double step = cfg.step_size;
  double objective = multinomial_objective(clf, train);
  auto grad = multinomial_gradient(clf, train);
  clf.grad_norm = grad_inf(grad);

  for (int it = 0; it < cfg.max_iters; ++it) {
    if (clf.grad_norm < cfg.grad_tol) {
      clf.converged = true;
      break;
    }
    LinearClassifier trial = clf;
    trial.weights -= step * grad.first;
    if (clf.has_bias()) trial.bias -= step * grad.second;
    const double trial_objective = multinomial_objective(trial, train);
    clf.iterations = it + 1;
    // Differences below a few ulps of the objective are rounding noise, not an increase;
    // treating them as increases would shrink the step to nothing near the optimum.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(objective));
    if (!(trial_objective <= objective + noise)) {
      step *= 0.5;
      if (step < std::numeric_limits<double>::min()) break;
      continue;
    }
    clf.weights = std::move(trial.weights);
    clf.bias = std::move(trial.bias);
    objective = trial_objective;
    grad = multinomial_gradient(clf, train);
    clf.grad_norm = grad_inf(grad);
  }
  if (clf.grad_norm < cfg.grad_tol) clf.converged = true;
  return clf;
}

double lp_accuracy(const LinearClassifier& clf, const LabeledDomain& test) {
  validate_domain(test, DomainRole::Evaluation);
  return accuracy(predict_labels(clf, test.features), test.labels);
}

Prototypes class_prototypes(const LabeledDomain& train) {
  validate_domain(train, DomainRole::Source);
  Matrix sums = Matrix::Zero(train.num_classes, train.dim());
  Vector counts = Vector::Zero(train.num_classes);
  for (Eigen::Index i = 0; i < train.rows(); ++i) {
    const int y = train.labels[static_cast<size_t>(i)];
    sums.row(y) += train.features.row(i);
    counts(y) += 1.0;
  }
  for (Eigen::Index c = 0; c < sums.rows(); ++c) sums.row(c) /= counts(c);
  return Prototypes::from_matrix(std::move(sums));
}

std::vector<int> cp_classify(const Prototypes& protos, const Matrix& feats) {
  if (feats.cols() != protos.dim()) {
    throw Error(ErrorCode::DimMismatch, "feature and prototype dimensions differ");
  }
  Vector centroid_norms(protos.num_classes());
  bool any_live = false;
  for (Eigen::Index c = 0; c < protos.num_classes(); ++c) {
    centroid_norms(c) = protos.centroids.row(c).norm();
    if (protos.is_stale(c)) continue;
    if (!(centroid_norms(c) > 0.0)) {
      throw Error(ErrorCode::ZeroVector, "centroid " + std::to_string(c) + " is zero");
    }
    any_live = true;
  }
  if (!any_live) throw Error(ErrorCode::AllCentroidsStale, "no usable centroid");

  std::vector<int> out(static_cast<size_t>(feats.rows()));
  for (Eigen::Index i = 0; i < feats.rows(); ++i) {
    const double norm = feats.row(i).norm();
    if (!(norm > 0.0)) throw Error(ErrorCode::ZeroVector, "row " + std::to_string(i) + " is zero");
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < protos.num_classes(); ++c) {
      if (protos.is_stale(c)) continue;
      const double d =
          0.5 - 0.5 * protos.centroids.row(c).dot(feats.row(i)) / (centroid_norms(c) * norm);
      if (best < 0 || d < best_d) {
        best = static_cast<int>(c);
        best_d = d;
      }
    }
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

double cp_accuracy(const LabeledDomain& train, const LabeledDomain& test) {
  validate_domain(test, DomainRole::Evaluation);
  if (test.num_classes > train.num_classes) {
    throw Error(ErrorCode::LabelOutOfRange, "test has more classes than train");
  }
  return accuracy(cp_classify(class_prototypes(train), test.features), test.labels);
}

}  // namespace sfuda
