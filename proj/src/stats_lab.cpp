#include "sfuda/stats_lab.hpp"

#include <algorithm>
#include <limits>
#include <set>

namespace sfuda::stats {
namespace {

constexpr double kConditionLimit = 1e12;
constexpr double kRelativeZero = 1e-24;
constexpr int kBetaMaxIters = 300;
constexpr double kBetaEps = 1e-12;

// Continued fraction for I_x(a, b); valid (fast) when x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double x, double a, double b) {
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kBetaMaxIters; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kBetaEps) break;
  }
  return h;
}

void check_records(std::span<const BackboneRecord> records) {
  for (const auto& r : records) {
    if (!std::isfinite(r.top1) || !std::isfinite(r.accuracy)) {
      throw Error(ErrorCode::NonFiniteValue, "record contains NaN or Inf");
    }
    if (r.pretrain != 0 && r.pretrain != 1) {
      throw Error(ErrorCode::InvalidConfig, "pretrain must be 0 or 1");
    }
  }
}

}  // namespace

std::string_view to_string(Term t) {
  switch (t) {
    case Term::Intercept: return "q";
    case Term::Slope: return "m";
    case Term::PretrainIntercept: return "dq";
    case Term::PretrainSlope: return "dm";
  }
  return "?";
}

std::optional<double> RegressionFit::coefficient(Term t) const {
  for (size_t j = 0; j < terms.size(); ++j) {
    if (terms[j] == t) return coefficients(static_cast<Eigen::Index>(j));
  }
  return std::nullopt;
}

std::optional<double> RegressionFit::p_value(Term t) const {
  for (size_t j = 0; j < terms.size(); ++j) {
    if (terms[j] == t) return p_values(static_cast<Eigen::Index>(j));
  }
  return std::nullopt;
}

Vector design_row(const BackboneRecord& r, std::span<const Term> terms) {
  Vector row(static_cast<Eigen::Index>(terms.size()));
  for (size_t j = 0; j < terms.size(); ++j) {
    double v = 0.0;
    switch (terms[j]) {
      case Term::Intercept: v = 1.0; break;
      case Term::Slope: v = r.top1; break;
      case Term::PretrainIntercept: v = r.pretrain; break;
      case Term::PretrainSlope: v = r.top1 * r.pretrain; break;
    }
    row(static_cast<Eigen::Index>(j)) = v;
  }
  return row;
}

double incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorCode::InvalidConfig, "beta parameters must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::InvalidConfig, "x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double student_t_two_sided(double t, double nu) {
  if (!(nu > 0.0)) throw Error(ErrorCode::DegenerateDof, "degrees of freedom must be > 0");
  if (std::isnan(t)) throw Error(ErrorCode::NonFiniteValue, "t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  const double p = incomplete_beta(nu / (nu + t * t), 0.5 * nu, 0.5);
  return std::clamp(p, 0.0, 1.0);
}

double adjusted_r2(double r2, int n, int df) {
  if (n - df <= 0) {
    throw Error(ErrorCode::DegenerateDof, "n = " + std::to_string(n) + ", df = " + std::to_string(df));
  }
  return 1.0 - (1.0 - r2) * static_cast<double>(n - 1) / static_cast<double>(n - df);
}

CoefficientStats coef_pvalues(const Matrix& design, const Vector& coefficients, double ss_res,
                              bool zero_residual) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (n <= p) throw Error(ErrorCode::DegenerateDof, "need more observations than parameters");
  const Matrix gram = design.transpose() * design;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::RankDeficient, "X'X is not positive definite");
  const Matrix inverse = llt.solve(Matrix::Identity(p, p));

  CoefficientStats out;
  out.std_errors.resize(p);
  out.t_stats.resize(p);
  out.p_values.resize(p);
  const double nu = static_cast<double>(n - p);
  const double sigma2 = ss_res / nu;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (zero_residual) {
      out.std_errors(j) = 0.0;
      out.t_stats(j) = std::copysign(std::numeric_limits<double>::infinity(), coefficients(j));
      out.p_values(j) = 0.0;
      continue;
    }
    out.std_errors(j) = std::sqrt(sigma2 * inverse(j, j));
    out.t_stats(j) = coefficients(j) / out.std_errors(j);
    out.p_values(j) = student_t_two_sided(out.t_stats(j), nu);
  }
  return out;
}

RegressionFit fit_terms(std::span<const BackboneRecord> records, std::span<const Term> terms) {
  check_records(records);
  const auto n = static_cast<Eigen::Index>(records.size());
  const auto p = static_cast<Eigen::Index>(terms.size());
  if (p == 0) throw Error(ErrorCode::InvalidConfig, "model has no terms");
  if (n <= p) {
    throw Error(ErrorCode::TooFewSamples, std::to_string(n) + " records for " +
                                              std::to_string(p) + " parameters");
  }

  Matrix x(n, p);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = design_row(records[static_cast<size_t>(i)], terms).transpose();
    y(i) = records[static_cast<size_t>(i)].accuracy;
  }

  const Matrix gram = x.transpose() * x;
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kConditionLimit) {
    throw Error(ErrorCode::RankDeficient, "design matrix is rank deficient or ill-conditioned");
  }
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::RankDeficient, "Cholesky failed");
  Vector beta = llt.solve(x.transpose() * y);
  // One round of iterative refinement on the normal equations.
  beta += llt.solve(x.transpose() * (y - x * beta));

  RegressionFit fit;
  fit.terms.assign(terms.begin(), terms.end());
  fit.coefficients = beta;
  fit.residuals = y - x * beta;
  fit.n = static_cast<int>(n);
  fit.df = static_cast<int>(p);
  fit.ss_res = fit.residuals.squaredNorm();
  fit.ss_tot = (y.array() - y.mean()).matrix().squaredNorm();

  const double scale = kRelativeZero * y.squaredNorm();
  const bool zero_residual = fit.ss_res <= scale;
  if (fit.ss_tot <= scale) {
    if (!zero_residual) throw Error(ErrorCode::DegenerateVariance, "constant response with nonzero residual");
    fit.r2 = 1.0;
  } else {
    fit.r2 = zero_residual ? 1.0 : 1.0 - fit.ss_res / fit.ss_tot;
  }
  fit.adj_r2 = adjusted_r2(fit.r2, fit.n, fit.df);

  auto coef = coef_pvalues(x, beta, fit.ss_res, zero_residual);
  fit.std_errors = std::move(coef.std_errors);
  fit.t_stats = std::move(coef.t_stats);
  fit.p_values = std::move(coef.p_values);
  return fit;
}

RegressionFit fit_linear(std::span<const BackboneRecord> records) {
  if (records.size() < 3) throw Error(ErrorCode::TooFewSamples, "need at least 3 records");
  const bool all_same = std::all_of(records.begin(), records.end(),
                                    [&](const auto& r) { return r.top1 == records.front().top1; });
  if (all_same) throw Error(ErrorCode::RankDeficient, "top1 is constant");
  static constexpr Term kTerms[] = {Term::Intercept, Term::Slope};
  return fit_terms(records, kTerms);
}

RegressionFit fit_interaction(std::span<const BackboneRecord> records) {
  check_records(records);
  std::set<double> distinct[2];
  for (const auto& r : records) distinct[r.pretrain].insert(r.top1);
  for (int g = 0; g < 2; ++g) {
    if (distinct[g].size() < 2) {
      throw Error(ErrorCode::MissingGroup, "pretrain group " + std::to_string(g) +
                                               " needs two distinct top1 values");
    }
  }
  static constexpr Term kTerms[] = {Term::Intercept, Term::Slope, Term::PretrainIntercept,
                                    Term::PretrainSlope};
  return fit_terms(records, kTerms);
}

PrunedFit prune_insignificant(std::span<const BackboneRecord> records, double alpha) {
  PrunedFit out{fit_interaction(records), {}};
  while (true) {
    std::optional<Term> worst;
    double worst_p = alpha;
    for (Term t : {Term::PretrainSlope, Term::PretrainIntercept}) {
      const auto p = out.fit.p_value(t);
      if (p && *p > worst_p) {
        worst = t;
        worst_p = *p;
      }
    }
    if (!worst) return out;
    std::vector<Term> kept;
    for (Term t : out.fit.terms) {
      if (t != *worst) kept.push_back(t);
    }
    out.removed.push_back(*worst);
    out.fit = fit_terms(records, kept);
  }
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "mean_std of no values");
  const Eigen::Map<const Vector> v(values.data(), static_cast<Eigen::Index>(values.size()));
  MeanStd out;
  out.mean = v.mean();
  out.std = std::sqrt((v.array() - out.mean).square().mean());
  return out;
}

}  // namespace sfuda::stats
