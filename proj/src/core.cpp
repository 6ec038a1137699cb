#include "sfuda/core.hpp"

namespace sfuda {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnlabeledSample: return "UnlabeledSample";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::TrailingBytes: return "TrailingBytes";
    case ErrorCode::UnknownFlags: return "UnknownFlags";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::UnparsableNumber: return "UnparsableNumber";
    case ErrorCode::ManifestInvalid: return "ManifestInvalid";
    case ErrorCode::AllCentroidsStale: return "AllCentroidsStale";
    case ErrorCode::UnknownMethod: return "UnknownMethod";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::MissingGroup: return "MissingGroup";
    case ErrorCode::DegenerateDof: return "DegenerateDof";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::MissingKey: return "MissingKey";
  }
  return "Unknown";
}

void validate_features(const Matrix& m) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw Error(ErrorCode::EmptyInput, "feature matrix must have at least one row and column");
  }
  if (!m.allFinite()) {
    throw Error(ErrorCode::NonFiniteValue, "feature matrix contains NaN or Inf");
  }
}

void validate_domain(const LabeledDomain& domain, DomainRole role) {
  if (domain.labels.size() != static_cast<size_t>(domain.features.rows())) {
    throw Error(ErrorCode::ShapeMismatch,
                std::to_string(domain.labels.size()) + " labels for " +
                    std::to_string(domain.features.rows()) + " feature rows");
  }
  if (domain.num_classes < 1) {
    throw Error(ErrorCode::InvalidConfig, "num_classes must be positive");
  }
  for (size_t i = 0; i < domain.labels.size(); ++i) {
    const int y = domain.labels[i];
    if (y < kUnlabeled || y >= domain.num_classes) {
      throw Error(ErrorCode::LabelOutOfRange,
                  "label " + std::to_string(y) + " at row " + std::to_string(i));
    }
  }
  validate_features(domain.features);
  if (role == DomainRole::Any) return;

  std::vector<int> counts(static_cast<size_t>(domain.num_classes), 0);
  for (size_t i = 0; i < domain.labels.size(); ++i) {
    if (domain.labels[i] == kUnlabeled) {
      throw Error(ErrorCode::UnlabeledSample, "row " + std::to_string(i) + " is unlabeled");
    }
    ++counts[static_cast<size_t>(domain.labels[i])];
  }
  if (role == DomainRole::Source) {
    for (size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] == 0) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(c));
    }
  }
}

LabeledDomain strip_labels(const LabeledDomain& domain) {
  LabeledDomain out{domain.features, {}, domain.num_classes};
  out.labels.assign(domain.labels.size(), kUnlabeled);
  return out;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::ShapeMismatch, "prediction and label counts differ");
  }
  if (truth.empty()) throw Error(ErrorCode::EmptyInput, "no samples to score");
  size_t hits = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == kUnlabeled) {
      throw Error(ErrorCode::UnlabeledSample, "row " + std::to_string(i) + " is unlabeled");
    }
    hits += predicted[i] == truth[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace sfuda
