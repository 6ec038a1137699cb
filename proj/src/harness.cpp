#include "sfuda/harness.hpp"

#include "sfuda/probing.hpp"
#include "sfuda/shot_lite.hpp"

#include <algorithm>
#include <numbers>
#include <random>
#include <tuple>

namespace sfuda::harness {
namespace {

Vector json_vector(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  const auto values = j.at(key).get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void ShiftSpec::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (num_classes < 1) bad("num_classes must be >= 1");
  if (dim < num_classes) bad("dim must be >= num_classes");
  if (dim < 2 && rotation_angle != 0.0) bad("rotation needs dim >= 2");
  if (samples_per_class < 1) bad("samples_per_class must be >= 1");
  if (!(class_separation > 0.0) || !std::isfinite(class_separation)) bad("class_separation must be > 0");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) bad("noise_sigma must be >= 0");
  if (!std::isfinite(rotation_angle)) bad("rotation_angle must be finite");
  if (translation.size() != 0 && translation.size() != dim) bad("translation length must equal dim");
  if (!translation.allFinite()) bad("translation must be finite");
  if (per_dim_scale.size() != 0) {
    if (per_dim_scale.size() != dim) bad("per_dim_scale length must equal dim");
    if (!per_dim_scale.allFinite() || !(per_dim_scale.minCoeff() > 0.0)) bad("scales must be > 0");
  }
}

ShiftSpec ShiftSpec::from_json(const nlohmann::json& j) {
  ShiftSpec s;
  try {
    read_opt(j, "num_classes", s.num_classes);
    read_opt(j, "dim", s.dim);
    read_opt(j, "samples_per_class", s.samples_per_class);
    read_opt(j, "class_separation", s.class_separation);
    read_opt(j, "noise_sigma", s.noise_sigma);
    read_opt(j, "rotation_angle", s.rotation_angle);
    read_opt(j, "seed", s.seed);
    s.translation = json_vector(j, "translation");
    s.per_dim_scale = json_vector(j, "per_dim_scale");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  s.validate();
  return s;
}

nlohmann::json ShiftSpec::to_json() const {
  nlohmann::json j;
  j["num_classes"] = num_classes;
  j["dim"] = dim;
  j["samples_per_class"] = samples_per_class;
  j["class_separation"] = class_separation;
  j["noise_sigma"] = noise_sigma;
  j["rotation_angle"] = rotation_angle;
  j["seed"] = seed;
  if (translation.size() != 0) {
    j["translation"] = std::vector<double>(translation.data(), translation.data() + translation.size());
  }
  if (per_dim_scale.size() != 0) {
    j["per_dim_scale"] =
        std::vector<double>(per_dim_scale.data(), per_dim_scale.data() + per_dim_scale.size());
  }
  return j;
}

DomainPair gen_domain_pair(const ShiftSpec& spec) {
  spec.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(spec.num_classes) * spec.samples_per_class;
  const double radius = spec.class_separation / std::numbers::sqrt2;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  auto sample = [&] {
    LabeledDomain d;
    d.num_classes = spec.num_classes;
    d.features.resize(n, spec.dim);
    d.labels.resize(static_cast<size_t>(n));
    Eigen::Index row = 0;
    for (int c = 0; c < spec.num_classes; ++c) {
      for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
        for (Eigen::Index j = 0; j < spec.dim; ++j) d.features(row, j) = spec.noise_sigma * noise(rng);
        d.features(row, c) += radius;
        d.labels[static_cast<size_t>(row)] = c;
      }
    }
    return d;
  };

  DomainPair pair{sample(), sample()};
  Matrix& t = pair.target.features;
  if (spec.translation.size() != 0) t.rowwise() += spec.translation.transpose();
  if (spec.per_dim_scale.size() != 0) t.array().rowwise() *= spec.per_dim_scale.transpose().array();
  if (spec.rotation_angle != 0.0) {
    const double c = std::cos(spec.rotation_angle);
    const double s = std::sin(spec.rotation_angle);
    const Vector x0 = t.col(0);
    const Vector x1 = t.col(1);
    t.col(0) = c * x0 - s * x1;
    t.col(1) = s * x0 + c * x1;
  }
  return pair;
}

void MethodParams::validate() const {
  FitConfig{lambda, fit_max_iters}.validate();
  KMeansConfig{kmeans_max_iters}.validate();
  ShotConfig shot;
  shot.epochs = epochs;
  shot.beta = beta;
  shot.learning_rate = learning_rate;
  shot.steps_per_epoch = steps_per_epoch;
  shot.cluster_rounds = cluster_rounds;
  shot.validate();
}

MethodParams MethodParams::from_json(const nlohmann::json& j) {
  MethodParams p;
  try {
    read_opt(j, "lambda", p.lambda);
    read_opt(j, "fit_max_iters", p.fit_max_iters);
    if (j.contains("init")) p.init = parse_sca_init(j.at("init").get<std::string>());
    read_opt(j, "kmeans_max_iters", p.kmeans_max_iters);
    read_opt(j, "epochs", p.epochs);
    read_opt(j, "beta", p.beta);
    read_opt(j, "learning_rate", p.learning_rate);
    read_opt(j, "steps_per_epoch", p.steps_per_epoch);
    read_opt(j, "cluster_rounds", p.cluster_rounds);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  p.validate();
  return p;
}

ExperimentOutcome make_outcome(double baseline, double adapted) {
  ExperimentOutcome o;
  o.baseline_target_acc = baseline;
  o.adapted_target_acc = adapted;
  o.delta = adapted - baseline;
  o.failed = adapted < baseline;
  return o;
}

std::vector<int> adapt_predict(io::Method method, const LabeledDomain& source,
                               const LinearClassifier& source_clf, const Matrix& target,
                               const MethodParams& params, std::uint64_t seed) {
  const KMeansConfig kmeans{params.kmeans_max_iters};
  switch (method) {
    case io::Method::Lp:
      return predict_labels(source_clf, target);
    case io::Method::Cp:
      return cp_classify(class_prototypes(source), target);
    case io::Method::Sca: {
      const auto init = sca_init(params.init, source, source_clf, target);
      return cp_classify(spherical_kmeans(init, target, kmeans).prototypes, target);
    }
    case io::Method::ShotLite: {
      ShotConfig cfg;
      cfg.epochs = params.epochs;
      cfg.beta = params.beta;
      cfg.learning_rate = params.learning_rate;
      cfg.steps_per_epoch = params.steps_per_epoch;
      cfg.cluster_rounds = params.cluster_rounds;
      cfg.kmeans = kmeans;
      cfg.seed = seed;
      LabeledDomain unlabeled{target, std::vector<int>(static_cast<size_t>(target.rows()), kUnlabeled),
                              source.num_classes};
      return shot_lite_adapt(source_clf, unlabeled, cfg).predictions;
    }
    case io::Method::FtStats: {
      LabeledDomain standardized = source;
      standardized.features = standardize(source.features, estimate_stats(source.features));
      const auto clf = fit_multinomial(standardized, {params.lambda, params.fit_max_iters});
      return predict_labels(clf, standardize(target, estimate_stats(target)));
    }
  }
  throw Error(ErrorCode::UnknownMethod, "unhandled method");
}

ExperimentOutcome run_pair(const LabeledDomain& source, const LabeledDomain& target,
                           io::Method method, const MethodParams& params, std::uint64_t seed) {
  params.validate();
  validate_domain(source, DomainRole::Source);
  LabeledDomain scored = target;
  scored.num_classes = std::max(source.num_classes, 1);
  validate_domain(scored, DomainRole::Evaluation);
  if (target.dim() != source.dim()) {
    throw Error(ErrorCode::DimMismatch, "source and target dimensions differ");
  }

  const auto clf = fit_multinomial(source, {params.lambda, params.fit_max_iters});
  const double baseline = lp_accuracy(clf, scored);

  // Adaptation only ever sees the label-stripped view.
  const LabeledDomain blind = strip_labels(scored);
  auto predictions = adapt_predict(method, source, clf, blind.features, params, seed);

  ExperimentOutcome o = make_outcome(baseline, accuracy(predictions, scored.labels));
  o.method = method;
  o.seed = seed;
  o.source_acc = lp_accuracy(clf, source);
  o.baseline_cp_acc = cp_accuracy(source, scored);
  o.predictions = std::move(predictions);
  return o;
}

FailureSummary failure_rate(std::span<const ExperimentOutcome> outcomes) {
  if (outcomes.empty()) throw Error(ErrorCode::EmptyInput, "no outcomes");
  std::vector<double> deltas;
  std::size_t failed = 0;
  for (const auto& o : outcomes) {
    deltas.push_back(o.delta);
    failed += o.failed ? 1 : 0;
  }
  // Summation order fixed by value so the aggregate is permutation-invariant bit for bit.
  std::sort(deltas.begin(), deltas.end());
  return {100.0 * static_cast<double>(failed) / static_cast<double>(outcomes.size()),
          stats::mean_std(deltas)};
}

ConditionalDegradation conditional_degradation(std::span<const ExperimentOutcome> outcomes) {
  std::vector<double> ok, bad;
  for (const auto& o : outcomes) (o.failed ? bad : ok).push_back(o.delta);
  std::sort(ok.begin(), ok.end());
  std::sort(bad.begin(), bad.end());
  ConditionalDegradation out;
  if (!ok.empty()) out.success = stats::mean_std(ok);
  if (!bad.empty()) out.failure = stats::mean_std(bad);
  return out;
}

std::vector<SummaryRow> group_summary(std::span<const ExperimentOutcome> outcomes,
                                      const std::string& group_key) {
  std::map<std::pair<std::string, std::string>, std::vector<ExperimentOutcome>> groups;
  for (const auto& o : outcomes) {
    const auto it = o.metadata.find(group_key);
    if (it == o.metadata.end()) {
      throw Error(ErrorCode::MissingKey, "outcome '" + o.pair_id + "' has no '" + group_key + "'");
    }
    groups[{it->second, std::string(io::to_string(o.method))}].push_back(o);
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, members] : groups) {
    const auto summary = failure_rate(members);
    rows.push_back({key.first, members.front().method, members.size(), summary.delta,
                    summary.failure_rate});
  }
  return rows;
}

}  // namespace sfuda::harness
