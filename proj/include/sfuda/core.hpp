#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sfuda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Sentinel for samples that carry no class label.
inline constexpr int kUnlabeled = -1;

enum class ErrorCode {
  // validation
  ShapeMismatch,
  DimMismatch,
  LabelOutOfRange,
  NonFiniteValue,
  EmptyClass,
  EmptyInput,
  UnlabeledSample,
  ZeroRow,
  ZeroVector,
  TooFewSamples,
  InvalidConfig,
  // feature-io
  IoFailure,
  BadMagic,
  UnsupportedVersion,
  TruncatedPayload,
  TrailingBytes,
  UnknownFlags,
  HeaderMismatch,
  RaggedRow,
  UnparsableNumber,
  ManifestInvalid,
  // adaptation
  AllCentroidsStale,
  UnknownMethod,
  // stats
  RankDeficient,
  MissingGroup,
  DegenerateDof,
  DegenerateVariance,
  MissingKey,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A labeled (or partially labeled) set of feature vectors, one row per sample.
struct LabeledDomain {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

enum class DomainRole {
  /// Labels may be missing; used for targets.
  Any,
  /// Every sample labeled and every class populated.
  Source,
  /// Every sample labeled; used for evaluation sets.
  Evaluation,
};

/// Throws sfuda::Error unless every LabeledDomain invariant holds for the role.
void validate_domain(const LabeledDomain& domain, DomainRole role = DomainRole::Any);

/// Throws NonFiniteValue / EmptyInput unless m is a valid feature matrix.
void validate_features(const Matrix& m);

/// Copy of the domain with every label replaced by kUnlabeled.
LabeledDomain strip_labels(const LabeledDomain& domain);

struct LinearClassifier {
  Matrix weights;  // C x D
  Vector bias;     // length C, or empty when the model has no bias
  double lambda = 0.0;
  // Solver diagnostics.
  bool converged = false;
  double grad_norm = 0.0;
  int iterations = 0;

  bool has_bias() const { return bias.size() != 0; }
  Eigen::Index num_classes() const { return weights.rows(); }
  Eigen::Index dim() const { return weights.cols(); }
};

struct Prototypes {
  Matrix centroids;        // C x D
  bool normalized = false;
  std::vector<bool> stale;  // per class; stale rows may be zero

  Eigen::Index num_classes() const { return centroids.rows(); }
  Eigen::Index dim() const { return centroids.cols(); }
  bool is_stale(Eigen::Index c) const {
    return !stale.empty() && stale[static_cast<size_t>(c)];
  }
  static Prototypes from_matrix(Matrix centroids, bool normalized = false) {
    Prototypes p;
    p.stale.assign(static_cast<size_t>(centroids.rows()), false);
    p.centroids = std::move(centroids);
    p.normalized = normalized;
    return p;
  }
};

/// Rows on the probability simplex.
struct SoftPredictions {
  Matrix probs;  // N x C
};

/// Row-wise L2 normalization. Throws ZeroRow if any row has zero norm.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> l2_normalize_rows(
    const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Scalar norm = m.row(i).norm();
    if (!(norm > Scalar(0))) {
      throw Error(ErrorCode::ZeroRow, "row " + std::to_string(i) + " has zero norm");
    }
    out.row(i) = m.row(i) / norm;
  }
  return out;
}

/// Row-wise softmax with max subtraction.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> softmax_rows(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar mx = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

/// Index of the largest entry; ties resolve to the lowest index.
template <typename Derived>
Eigen::Index argmax_lowest(const Eigen::DenseBase<Derived>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < v.size(); ++j) {
    if (v(j) > v(best)) best = j;
  }
  return best;
}

/// Fraction of positions where predicted == truth.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

}  // namespace sfuda
