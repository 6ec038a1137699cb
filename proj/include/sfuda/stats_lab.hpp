#pragma once

#include "sfuda/core.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace sfuda::stats {

/// Backbone-level observation: ImageNet top-1, pre-training flag, downstream accuracy.
struct BackboneRecord {
  double top1 = 0.0;
  int pretrain = 0;  // 0 = ImageNet, 1 = ImageNet21k
  double accuracy = 0.0;
};

/// Model terms, in coefficient order.
enum class Term {
  Intercept,          // q
  Slope,              // m
  PretrainIntercept,  // delta q
  PretrainSlope,      // delta m
};

std::string_view to_string(Term t);

struct RegressionFit {
  std::vector<Term> terms;
  Vector coefficients;
  Vector residuals;
  double ss_tot = 0.0;
  double ss_res = 0.0;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  Vector std_errors;
  Vector t_stats;
  Vector p_values;
  int df = 0;  // estimated parameters, intercept included
  int n = 0;

  /// Coefficient for a term, or nullopt when the term is not in the model.
  std::optional<double> coefficient(Term t) const;
  std::optional<double> p_value(Term t) const;
};

/// Design row for one record restricted to the given terms.
Vector design_row(const BackboneRecord& r, std::span<const Term> terms);

/// OLS on an arbitrary subset of the interaction model's columns.
RegressionFit fit_terms(std::span<const BackboneRecord> records, std::span<const Term> terms);

/// accuracy = m * top1 + q.
RegressionFit fit_linear(std::span<const BackboneRecord> records);

/// accuracy = (m + dm * pretrain) * top1 + q + dq * pretrain.
RegressionFit fit_interaction(std::span<const BackboneRecord> records);

/// 1 - (1 - r2) (n - 1) / (n - df).
double adjusted_r2(double r2, int n, int df);

struct CoefficientStats {
  Vector std_errors;
  Vector t_stats;
  Vector p_values;
};

/// Classical OLS standard errors and two-sided Student-t p-values with n - df degrees of
/// freedom. A zero residual sum yields p = 0 for every coefficient.
CoefficientStats coef_pvalues(const Matrix& design, const Vector& coefficients, double ss_res,
                              bool zero_residual);

/// Regularized incomplete beta I_x(a, b), continued fraction with modified Lentz.
double incomplete_beta(double x, double a, double b);

/// P(|T| >= |t|) for Student's t with nu degrees of freedom.
double student_t_two_sided(double t, double nu);

struct PrunedFit {
  RegressionFit fit;
  std::vector<Term> removed;
};

/// Backward elimination over {dm, dq}: while either has p > alpha, drop the larger-p term
/// and refit. m and q are always kept.
PrunedFit prune_insignificant(std::span<const BackboneRecord> records, double alpha = 0.01);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population (divide by N)
};

MeanStd mean_std(std::span<const double> values);

}  // namespace sfuda::stats
