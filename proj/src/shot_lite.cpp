#include "sfuda/shot_lite.hpp"

#include <algorithm>

namespace sfuda {
namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// p * log(q), treating 0 * log(0) as 0.
double xlogy(double x, double y) { return x > 0.0 ? x * std::log(y) : 0.0; }

bool fully_labeled(const LabeledDomain& d) {
  return std::none_of(d.labels.begin(), d.labels.end(), [](int y) { return y == kUnlabeled; });
}

}  // namespace

void ShotConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::InvalidConfig, "learning_rate must be >= 0");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorCode::InvalidConfig, "beta must be >= 0");
  if (steps_per_epoch < 1) throw Error(ErrorCode::InvalidConfig, "steps_per_epoch must be >= 1");
  if (!(grad_tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "grad_tol must be > 0");
  if (cluster_rounds < 1) throw Error(ErrorCode::InvalidConfig, "cluster_rounds must be >= 1");
  kmeans.validate();
}

ImLoss im_loss(const SoftPredictions& probs) {
  const Matrix& p = probs.probs;
  const Eigen::Index n = p.rows();
  const Eigen::Index c = p.cols();
  if (n < 1) throw Error(ErrorCode::EmptyInput, "IM loss needs at least one row");
  const double inv_n = 1.0 / static_cast<double>(n);
  const Vector pbar = p.colwise().mean().transpose();

  ImLoss out;
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < c; ++k) entropy -= xlogx(p(i, k));
  }
  double diversity = 0.0;
  for (Eigen::Index k = 0; k < c; ++k) diversity += xlogx(pbar(k));
  out.value = entropy * inv_n + diversity;

  // dL/dp_ik = (log pbar_k - log p_ik) / N, chained through the softmax Jacobian.
  out.grad_logits.resize(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    double weighted = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) weighted += xlogy(p(i, k), pbar(k)) - xlogx(p(i, k));
    for (Eigen::Index k = 0; k < c; ++k) {
      out.grad_logits(i, k) =
          inv_n * (xlogy(p(i, k), pbar(k)) - xlogx(p(i, k)) - p(i, k) * weighted);
    }
  }
  return out;
}

PseudoLabels shot_pseudo_labels(const LinearClassifier& clf, const Matrix& target,
                                const KMeansConfig& cfg, int rounds) {
  validate_features(target);
  SoftPredictions weights = predict_proba(clf, target);
  PseudoLabels out;
  for (int r = 0; r < std::max(rounds, 1); ++r) {
    const Prototypes init = init_from_soft_preds(weights, target);
    out.prototypes = spherical_kmeans(init, target, cfg).prototypes;
    out.labels = cp_classify(out.prototypes, target);
    weights.probs.setZero();
    for (Eigen::Index i = 0; i < target.rows(); ++i) {
      weights.probs(i, out.labels[static_cast<size_t>(i)]) = 1.0;
    }
  }
  return out;
}

AdapterLoss adapter_loss(const FeatureAdapter& adapter, const LinearClassifier& clf,
                         const Matrix& target, const std::vector<int>& pseudo, double beta) {
  if (pseudo.size() != static_cast<size_t>(target.rows())) {
    throw Error(ErrorCode::ShapeMismatch, "pseudo-label count differs from target rows");
  }
  const Matrix z = logits(clf, adapter.apply(target));
  const SoftPredictions probs{softmax_rows(z)};
  ImLoss im = im_loss(probs);

  const double inv_n = 1.0 / static_cast<double>(z.rows());
  double ce = 0.0;
  Matrix grad = std::move(im.grad_logits);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int y = pseudo[static_cast<size_t>(i)];
    const double mx = z.row(i).maxCoeff();
    ce += mx + std::log((z.row(i).array() - mx).exp().sum()) - z(i, y);
    grad.row(i) += beta * inv_n * probs.probs.row(i);
    grad(i, y) -= beta * inv_n;
  }

  AdapterLoss out;
  out.value = im.value + beta * ce * inv_n;
  const Matrix grad_features = grad * clf.weights;  // N x D
  out.grad_transform = grad_features.transpose() * target;
  out.grad_offset = grad_features.colwise().sum().transpose();
  return out;
}

ShotResult shot_lite_adapt(const LinearClassifier& clf, const LabeledDomain& target,
                           const ShotConfig& cfg) {
  cfg.validate();
  validate_domain(target);
  if (target.dim() != clf.dim()) {
    throw Error(ErrorCode::DimMismatch, "target and classifier dimensions differ");
  }
  const bool score = fully_labeled(target);
  const Matrix& x = target.features;

  ShotResult res;
  res.adapter = FeatureAdapter::identity(x.cols());
  if (score) res.accuracy_trace.push_back(accuracy(predict_labels(clf, x), target.labels));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto pseudo =
        shot_pseudo_labels(clf, res.adapter.apply(x), cfg.kmeans, cfg.cluster_rounds).labels;

    std::vector<double> losses;
    double lr = cfg.learning_rate;
    AdapterLoss current = adapter_loss(res.adapter, clf, x, pseudo, cfg.beta);
    losses.push_back(current.value);
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      const double g = std::max(current.grad_transform.lpNorm<Eigen::Infinity>(),
                                current.grad_offset.lpNorm<Eigen::Infinity>());
      if (g < cfg.grad_tol) break;
      FeatureAdapter trial{res.adapter.transform - lr * current.grad_transform,
                           res.adapter.offset - lr * current.grad_offset};
      AdapterLoss next = adapter_loss(trial, clf, x, pseudo, cfg.beta);
      if (!(next.value <= current.value)) {
        lr *= 0.5;
        continue;
      }
      res.adapter = std::move(trial);
      current = std::move(next);
      losses.push_back(current.value);
    }
    res.loss_trace.push_back(std::move(losses));
    if (score) {
      res.accuracy_trace.push_back(
          accuracy(predict_labels(clf, res.adapter.apply(x)), target.labels));
    }
  }
  res.predictions = predict_labels(clf, res.adapter.apply(x));
  if (score) res.target_accuracy = accuracy(res.predictions, target.labels);
  return res;
}

FeatureStats estimate_stats(const Matrix& feats) {
  validate_features(feats);
  if (feats.rows() < 2) throw Error(ErrorCode::TooFewSamples, "need at least two rows");
  // Welford's running update, one column vector at a time.
  Vector mean = Vector::Zero(feats.cols());
  Vector m2 = Vector::Zero(feats.cols());
  for (Eigen::Index i = 0; i < feats.rows(); ++i) {
    const Vector delta = feats.row(i).transpose() - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta.cwiseProduct(feats.row(i).transpose() - mean);
  }
  FeatureStats s;
  s.mean = std::move(mean);
  s.std = (m2 / static_cast<double>(feats.rows())).cwiseSqrt().cwiseMax(FeatureStats::kStdFloor);
  return s;
}

Matrix standardize(const Matrix& feats, const FeatureStats& stats) {
  if (feats.cols() != stats.mean.size() || feats.cols() != stats.std.size()) {
    throw Error(ErrorCode::DimMismatch, "feature and statistics dimensions differ");
  }
  Matrix out = feats.rowwise() - stats.mean.transpose();
  out.array().rowwise() /= stats.std.transpose().array();
  return out;
}

}  // namespace sfuda
