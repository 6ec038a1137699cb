#pragma once

#include "sfuda/core.hpp"
#include "sfuda/probing.hpp"

#include <vector>

namespace sfuda {

struct KMeansConfig {
  int max_iters = 100;

  void validate() const {
    if (max_iters < 1) throw Error(ErrorCode::InvalidConfig, "max_iters must be >= 1");
  }
};

struct ScaResult {
  Prototypes prototypes;  // unit rows except stale zero rows
  std::vector<int> assignments;
  int iterations_used = 0;
  bool converged = false;
  /// Spherical k-means objective sum_i (1/2 - <z_i, k_{c_i}>/2) after each assignment pass.
  std::vector<double> objective_trace;
};

enum class ScaInit { SourceLabels, MrWeights, HardPreds, SoftPreds };

std::string_view to_string(ScaInit init);
ScaInit parse_sca_init(std::string_view name);

/// Per-class mean of the source features.
Prototypes init_from_source_labels(const LabeledDomain& source);

/// Rows of the classifier weight matrix; the bias is ignored.
Prototypes init_from_mr_weights(const LinearClassifier& clf);

/// Mean target feature per argmax pseudo-label. Classes that receive no sample are
/// zero rows flagged stale.
Prototypes init_from_hard_preds(const LinearClassifier& clf, const Matrix& target);

/// Probability-weighted target means: k_c = sum_i p_ic z_i / sum_i p_ic.
/// A class whose total weight is below 1e-12 becomes a stale zero row.
Prototypes init_from_soft_preds(const SoftPredictions& probs, const Matrix& target);

/// Spherical k-means with a fixed number of clusters, started from init.
///
/// Target rows are normalized once. Each pass normalizes the centroids, assigns every
/// sample to the centroid of highest cosine similarity (ties to the lowest index), and
/// replaces each centroid by the mean of its assigned unit vectors. A centroid that
/// receives no sample keeps its previous value and is flagged stale for that pass;
/// stale centroids with a direction still compete in later passes, zero rows never do.
/// Stops when a pass reproduces the previous assignments exactly.
ScaResult spherical_kmeans(const Prototypes& init, const Matrix& target,
                           const KMeansConfig& cfg = {});

struct ScaOutcome {
  ScaResult result;
  std::vector<int> predictions;
  double target_accuracy = 0.0;
};

/// Spherical k-means on the target features followed by nearest-prototype
/// classification. Target labels are read only to score the predictions.
ScaOutcome sca(const Prototypes& source_side, const LabeledDomain& target,
               const KMeansConfig& cfg = {});

/// Builds the initial prototypes for a given strategy. clf is unused for SourceLabels.
Prototypes sca_init(ScaInit init, const LabeledDomain& source, const LinearClassifier& clf,
                    const Matrix& target);

}  // namespace sfuda
