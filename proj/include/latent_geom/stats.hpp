#pragma once

#include "latent_geom/common.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lgeom {

/// Mean and biased (1/n) covariance of a point cloud with its inverse.
///
/// When the covariance is numerically singular (eigenvalue condition number above
/// 1e12, or not positive definite) a ridge of 1e-8 * tr(S) / d is added to the
/// diagonal before inversion. `cov` always holds the unregularized matrix.
struct CovarianceSummary {
    Vector mean;
    Matrix cov;
    Matrix cov_inv;
    bool ridge_applied = false;
    double ridge_value = 0.0;
};

CovarianceSummary covariance_summary(const Matrix& points);

/// Squared Mahalanobis distance of every row to the mean.
std::vector<double> mahalanobis_to_mean(const Matrix& points, const CovarianceSummary& cs);

struct HzResult {
    std::size_t n = 0;
    std::size_t d = 0;
    double beta = 0.0;
    double statistic = 0.0;
    double null_mean = 0.0;
    double null_var = 0.0;
    double log_mean = 0.0;
    double log_sd = 0.0;
    double p_value = 1.0;
    bool reject = false;
    double alpha = 0.05;
    bool ridge_applied = false;

    friend bool operator==(const HzResult&, const HzResult&) = default;
};

/// Henze-Zirkler smoothing parameter for sample size n and dimension d.
double hz_beta(std::size_t n, std::size_t d);

/// Henze-Zirkler multivariate normality test with lognormal null approximation.
HzResult henze_zirkler(const Matrix& points, double alpha = 0.05);

/// Lognormal-approximation p-value of an HZ statistic for fixed (n, d).
double hz_p_value(double statistic, std::size_t n, std::size_t d);

enum class CalibrationShape {
    Normal,
    /// Element-wise cubed standard normals: heavy tailed.
    CubedNormal,
};

/// Fraction of `trials` synthetic n x d samples that the HZ test rejects at `alpha`.
double hz_null_calibration(std::size_t n, std::size_t d, std::size_t trials, double alpha, std::uint64_t seed,
                           CalibrationShape shape = CalibrationShape::Normal);

/// Kolmogorov-Smirnov sup distance between the empirical CDF of `samples` and `cdf`.
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);

struct TriangularFit {
    double a = 0.0;
    double c = 0.0;
    double b = 1.0;
    double loglik = 0.0;
    double ks_stat = 0.0;
    double aic = 0.0;

    friend bool operator==(const TriangularFit&, const TriangularFit&) = default;
};

double triangular_pdf(double x, double a, double c, double b);
double triangular_cdf(double x, double a, double c, double b);

/// Maximum-likelihood triangular fit on the support [min - delta, max + delta], delta = range / n.
/// The mode is searched over the sample values.
TriangularFit fit_triangular(std::span<const double> samples);

struct NormalFit {
    double mean = 0.0;
    double sd = 1.0;
    double loglik = 0.0;
    double ks_stat = 0.0;
    double aic = 0.0;

    friend bool operator==(const NormalFit&, const NormalFit&) = default;
};

struct UniformFit {
    double a = 0.0;
    double b = 1.0;
    double loglik = 0.0;
    double ks_stat = 0.0;
    double aic = 0.0;

    friend bool operator==(const UniformFit&, const UniformFit&) = default;
};

struct FitComparison {
    TriangularFit triangular;
    NormalFit normal;
    UniformFit uniform;
    /// "triangular", "normal" or "uniform".
    std::string best_by_aic;
    /// True when the minimum AIC was shared and the tie-break order decided.
    bool aic_tie = false;

    friend bool operator==(const FitComparison&, const FitComparison&) = default;
};

/// Fit triangular, normal and uniform models and pick the minimum AIC.
/// Ties resolve in the order triangular, normal, uniform.
FitComparison compare_fits(std::span<const double> samples);

}  // namespace lgeom
