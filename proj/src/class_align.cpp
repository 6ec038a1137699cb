#include "sfuda/class_align.hpp"

namespace sfuda {

std::string_view to_string(ScaInit init) {
  switch (init) {
    case ScaInit::SourceLabels: return "source_labels";
    case ScaInit::MrWeights: return "mr_weights";
    case ScaInit::HardPreds: return "hard";
    case ScaInit::SoftPreds: return "soft";
  }
  return "?";
}

ScaInit parse_sca_init(std::string_view name) {
  for (auto i : {ScaInit::SourceLabels, ScaInit::MrWeights, ScaInit::HardPreds, ScaInit::SoftPreds}) {
    if (to_string(i) == name) return i;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown SCA init '" + std::string(name) + "'");
}

Prototypes init_from_source_labels(const LabeledDomain& source) { return class_prototypes(source); }

Prototypes init_from_mr_weights(const LinearClassifier& clf) {
  return Prototypes::from_matrix(clf.weights);
}

Prototypes init_from_hard_preds(const LinearClassifier& clf, const Matrix& target) {
  validate_features(target);
  const auto pseudo = predict_labels(clf, target);
  Matrix sums = Matrix::Zero(clf.num_classes(), target.cols());
  Vector counts = Vector::Zero(clf.num_classes());
  for (Eigen::Index i = 0; i < target.rows(); ++i) {
    const int c = pseudo[static_cast<size_t>(i)];
    sums.row(c) += target.row(i);
    counts(c) += 1.0;
  }
  Prototypes out = Prototypes::from_matrix(Matrix::Zero(sums.rows(), sums.cols()));
  for (Eigen::Index c = 0; c < sums.rows(); ++c) {
    if (counts(c) > 0.0) {
      out.centroids.row(c) = sums.row(c) / counts(c);
    } else {
      out.stale[static_cast<size_t>(c)] = true;
    }
  }
  return out;
}

Prototypes init_from_soft_preds(const SoftPredictions& probs, const Matrix& target) {
  validate_features(target);
  if (probs.probs.rows() != target.rows()) {
    throw Error(ErrorCode::DimMismatch, "probability rows differ from target rows");
  }
  // Row-by-row accumulation in the same order as init_from_hard_preds, so one-hot weights
  // reproduce the hard-label means bit for bit.
  const Eigen::Index classes = probs.probs.cols();
  Matrix weighted = Matrix::Zero(classes, target.cols());
  Vector mass = Vector::Zero(classes);
  for (Eigen::Index i = 0; i < target.rows(); ++i) {
    for (Eigen::Index c = 0; c < classes; ++c) {
      const double w = probs.probs(i, c);
      if (w == 0.0) continue;
      weighted.row(c) += w * target.row(i);
      mass(c) += w;
    }
  }
  Prototypes out = Prototypes::from_matrix(Matrix::Zero(weighted.rows(), weighted.cols()));
  for (Eigen::Index c = 0; c < weighted.rows(); ++c) {
    if (mass(c) > 1e-12) {
      out.centroids.row(c) = weighted.row(c) / mass(c);
    } else {
      out.stale[static_cast<size_t>(c)] = true;
    }
  }
  return out;
}

ScaResult spherical_kmeans(const Prototypes& init, const Matrix& target, const KMeansConfig& cfg) {
  cfg.validate();
  validate_features(target);
  if (init.dim() != target.cols()) {
    throw Error(ErrorCode::DimMismatch, "prototype and target dimensions differ");
  }
  const Matrix x = l2_normalize_rows(target);
  const Eigen::Index k = init.num_classes();
  const Eigen::Index n = x.rows();

  Matrix centroids = init.centroids;
  std::vector<bool> stale = init.stale;
  stale.resize(static_cast<size_t>(k), false);

  auto normalize_centroids = [&] {
    bool any = false;
    for (Eigen::Index c = 0; c < k; ++c) {
      const double norm = centroids.row(c).norm();
      if (norm > 0.0) {
        centroids.row(c) /= norm;
        any = true;
      }
    }
    return any;
  };

  ScaResult res;
  std::vector<int> assign(static_cast<size_t>(n), -1);
  std::vector<int> previous;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    if (!normalize_centroids()) {
      throw Error(ErrorCode::AllCentroidsStale, "every centroid is a zero vector");
    }
    // Zero rows give similarity 0 but are excluded explicitly.
    Vector live(k);
    for (Eigen::Index c = 0; c < k; ++c) live(c) = centroids.row(c).squaredNorm() > 0.0 ? 1.0 : 0.0;

    const Matrix sim = x * centroids.transpose();  // N x K
    double objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = -1;
      for (Eigen::Index c = 0; c < k; ++c) {
        if (live(c) == 0.0) continue;
        if (best < 0 || sim(i, c) > sim(i, best)) best = c;
      }
      assign[static_cast<size_t>(i)] = static_cast<int>(best);
      objective += 0.5 - 0.5 * sim(i, best);
    }
    res.objective_trace.push_back(objective);
    res.iterations_used = it;
    if (assign == previous) {
      res.converged = true;
      break;
    }

    Matrix sums = Matrix::Zero(k, x.cols());
    Vector counts = Vector::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<size_t>(i)]) += x.row(i);
      counts(assign[static_cast<size_t>(i)]) += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      stale[static_cast<size_t>(c)] = counts(c) == 0.0;
      // A cluster whose unit vectors cancel exactly has no mean direction; keep the old one.
      if (counts(c) > 0.0 && sums.row(c).squaredNorm() > 0.0) {
        centroids.row(c) = sums.row(c) / counts(c);
      }
    }
    previous = assign;
  }
  normalize_centroids();

  res.prototypes.centroids = std::move(centroids);
  res.prototypes.stale = std::move(stale);
  res.prototypes.normalized = true;
  res.assignments = std::move(assign);
  return res;
}

ScaOutcome sca(const Prototypes& source_side, const LabeledDomain& target, const KMeansConfig& cfg) {
  validate_domain(target);
  ScaOutcome out;
  out.result = spherical_kmeans(source_side, target.features, cfg);
  out.predictions = cp_classify(out.result.prototypes, target.features);
  out.target_accuracy = accuracy(out.predictions, target.labels);
  return out;
}

Prototypes sca_init(ScaInit init, const LabeledDomain& source, const LinearClassifier& clf,
                    const Matrix& target) {
  switch (init) {
    case ScaInit::SourceLabels: return init_from_source_labels(source);
    case ScaInit::MrWeights: return init_from_mr_weights(clf);
    case ScaInit::HardPreds: return init_from_hard_preds(clf, target);
    case ScaInit::SoftPreds: return init_from_soft_preds(predict_proba(clf, target), target);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown SCA init");
}

}  // namespace sfuda
