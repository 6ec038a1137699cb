#pragma once

#include "sfuda/class_align.hpp"
#include "sfuda/core.hpp"
#include "sfuda/feature_io.hpp"
#include "sfuda/stats_lab.hpp"

#include <cstdint>
#include <json.hpp>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sfuda::harness {

/// Synthetic source/target pair description.
///
/// Class anchors sit at (class_separation / sqrt 2) * e_c, so every pair of anchors is
/// class_separation apart; this needs dim >= num_classes. Target samples are drawn fresh
/// from the same anchors and mapped through x -> R S (x + translation), where S is
/// diag(per_dim_scale) and R rotates the first two coordinates by rotation_angle.
struct ShiftSpec {
  int num_classes = 5;
  int dim = 16;
  int samples_per_class = 60;
  double class_separation = 4.0;
  double noise_sigma = 1.0;
  double rotation_angle = 0.0;  // radians
  Vector translation;           // empty means zero
  Vector per_dim_scale;         // empty means all ones
  std::uint64_t seed = 0;

  void validate() const;
  static ShiftSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct DomainPair {
  LabeledDomain source;
  LabeledDomain target;
};

DomainPair gen_domain_pair(const ShiftSpec& spec);

/// Per-method knobs; unset fields take the library defaults.
struct MethodParams {
  double lambda = 0.01;
  int fit_max_iters = 10000;
  ScaInit init = ScaInit::SourceLabels;
  int kmeans_max_iters = 100;
  int epochs = 15;
  double beta = 0.3;
  double learning_rate = 1e-2;
  int steps_per_epoch = 50;
  int cluster_rounds = 1;

  void validate() const;
  static MethodParams from_json(const nlohmann::json& j);
};

struct ExperimentOutcome {
  std::string pair_id;
  io::Method method = io::Method::Lp;
  std::uint64_t seed = 0;
  double source_acc = 0.0;           // source classifier on its own training set
  double baseline_cp_acc = 0.0;      // reported only, never used for `failed`
  double baseline_target_acc = 0.0;  // LP DGen
  double adapted_target_acc = 0.0;
  double delta = 0.0;
  bool failed = false;
  std::vector<int> predictions;
  std::map<std::string, std::string> metadata;
};

/// Builds an outcome from the two accuracies: failed iff adapted < baseline.
ExperimentOutcome make_outcome(double baseline, double adapted);

/// Predictions of an adaptation method on unlabeled target features.
std::vector<int> adapt_predict(io::Method method, const LabeledDomain& source,
                               const LinearClassifier& source_clf, const Matrix& target,
                               const MethodParams& params, std::uint64_t seed);

/// Trains the LP baseline on source, adapts transductively on the label-stripped target,
/// and scores both on the target labels.
ExperimentOutcome run_pair(const LabeledDomain& source, const LabeledDomain& target,
                           io::Method method, const MethodParams& params, std::uint64_t seed);

struct FailureSummary {
  double failure_rate = 0.0;  // percent
  stats::MeanStd delta;
};

FailureSummary failure_rate(std::span<const ExperimentOutcome> outcomes);

struct ConditionalDegradation {
  std::optional<stats::MeanStd> success;
  std::optional<stats::MeanStd> failure;
};

ConditionalDegradation conditional_degradation(std::span<const ExperimentOutcome> outcomes);

struct SummaryRow {
  std::string group;
  io::Method method = io::Method::Lp;
  std::size_t count = 0;
  stats::MeanStd delta;
  double failure_rate = 0.0;
};

/// One row per (group value, method), sorted by group then method name.
std::vector<SummaryRow> group_summary(std::span<const ExperimentOutcome> outcomes,
                                      const std::string& group_key);

}  // namespace sfuda::harness
