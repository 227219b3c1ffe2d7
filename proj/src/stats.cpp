#include "latent_geom/stats.hpp"

#include "latent_geom/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace lgeom {

namespace {

constexpr double kMaxCondition = 1e12;
constexpr double kRidgeScale = 1e-8;

struct Whitening {
    CovarianceSummary summary;
    // Lower Cholesky factor of the (possibly ridged) covariance.
    Matrix chol_lower;
};

Whitening whiten_setup(const Matrix& points) {
    const auto n = points.rows();
    const auto d = points.cols();
    if (d < 1) fail(ErrorKind::InvalidArgument, "points need at least one column");
    if (n < 2) fail(ErrorKind::InsufficientData, "covariance needs at least 2 points, got " + std::to_string(n));
    if (!points.allFinite()) fail(ErrorKind::InvalidArgument, "points contain non-finite values");

    Whitening w;
    auto& cs = w.summary;
    cs.mean = points.colwise().mean().transpose();
    const Matrix centered = points.rowwise() - cs.mean.transpose();
    cs.cov = (centered.transpose() * centered) / static_cast<double>(n);
    cs.cov = 0.5 * (cs.cov + cs.cov.transpose()).eval();

    const double trace = cs.cov.trace();
    if (!(trace > 0.0)) fail(ErrorKind::DegenerateData, "all points are identical");

    Eigen::SelfAdjointEigenSolver<Matrix> eig(cs.cov, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    const bool singular = eig.info() != Eigen::Success || !(lo > 0.0) || hi / lo > kMaxCondition;

    const auto factor = [&](double ridge) {
        Matrix m = cs.cov;
        m.diagonal().array() += ridge;
        return Eigen::LLT<Matrix>(m);
    };
    Eigen::LLT<Matrix> llt;
    if (!singular) {
        llt = factor(0.0);
    }
    if (singular || llt.info() != Eigen::Success) {
        cs.ridge_applied = true;
        cs.ridge_value = kRidgeScale * trace / static_cast<double>(d);
        llt = factor(cs.ridge_value);
        if (llt.info() != Eigen::Success) fail(ErrorKind::DegenerateData, "covariance is not positive definite after ridge");
    }
    cs.cov_inv = llt.solve(Matrix::Identity(d, d));
    w.chol_lower = llt.matrixL();
    return w;
}

// Rows mapped to L^{-1}(x - mean), so squared norms are Mahalanobis distances.
Matrix whitened_points(const Matrix& points, const Whitening& w) {
    const Matrix centered = points.rowwise() - w.summary.mean.transpose();
    const Matrix zt = w.chol_lower.triangularView<Eigen::Lower>().solve(centered.transpose());
    return zt.transpose();
}

}  // namespace

CovarianceSummary covariance_summary(const Matrix& points) { return whiten_setup(points).summary; }

std::vector<double> mahalanobis_to_mean(const Matrix& points, const CovarianceSummary& cs) {
    std::vector<double> out(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const Vector diff = points.row(i).transpose() - cs.mean;
        out[static_cast<std::size_t>(i)] = diff.dot(cs.cov_inv * diff);
    }
    return out;
}

double hz_beta(std::size_t n, std::size_t d) {
    const double dd = static_cast<double>(d);
    return std::pow((2.0 * dd + 1.0) * static_cast<double>(n) / 4.0, 1.0 / (dd + 4.0)) / std::numbers::sqrt2;
}

namespace {

struct HzNull {
    double mean;
    double var;
    double log_mean;
    double log_sd;
};

HzNull hz_null(std::size_t n, std::size_t d) {
    const double dd = static_cast<double>(d);
    const double beta = hz_beta(n, d);
    const double b2 = beta * beta;
    const double b4 = b2 * b2;
    const double b8 = b4 * b4;
    const double a = 1.0 + 2.0 * b2;
    const double w = (1.0 + b2) * (1.0 + 3.0 * b2);

    HzNull out{};
    out.mean = 1.0 - std::pow(a, -dd / 2.0) * (1.0 + dd * b2 / a + dd * (dd + 2.0) * b4 / (2.0 * a * a));
    out.var = 2.0 * std::pow(1.0 + 4.0 * b2, -dd / 2.0) +
              2.0 * std::pow(a, -dd) *
                  (1.0 + 2.0 * dd * b4 / (a * a) + 3.0 * dd * (dd + 2.0) * b8 / (4.0 * std::pow(a, 4))) -
              4.0 * std::pow(w, -dd / 2.0) * (1.0 + 3.0 * dd * b4 / (2.0 * w) + dd * (dd + 2.0) * b8 / (2.0 * w * w));
    const double log_var = std::log1p(out.var / (out.mean * out.mean));
    out.log_sd = std::sqrt(log_var);
    out.log_mean = std::log(out.mean) - log_var / 2.0;
    return out;
}

double lognormal_sf(double x, double log_mean, double log_sd) {
    if (!(x > 0.0)) return 1.0;
    return std::clamp(normal_sf((std::log(x) - log_mean) / log_sd), 0.0, 1.0);
}

}  // namespace

double hz_p_value(double statistic, std::size_t n, std::size_t d) {
    const auto null = hz_null(n, d);
    return lognormal_sf(statistic, null.log_mean, null.log_sd);
}

HzResult henze_zirkler(const Matrix& points, double alpha) {
    const auto n = static_cast<std::size_t>(points.rows());
    const auto d = static_cast<std::size_t>(points.cols());
    if (d < 1) fail(ErrorKind::InvalidArgument, "points need at least one column");
    if (n < d + 2) {
        fail(ErrorKind::InsufficientData,
             "Henze-Zirkler needs n >= d + 2 (n = " + std::to_string(n) + ", d = " + std::to_string(d) + ")");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::InvalidArgument, "alpha must lie in [0, 1]");

    const auto w = whiten_setup(points);
    const Matrix z = whitened_points(points, w);

    HzResult r;
    r.n = n;
    r.d = d;
    r.alpha = alpha;
    r.ridge_applied = w.summary.ridge_applied;
    r.beta = hz_beta(n, d);
    const double b2 = r.beta * r.beta;
    const double dd = static_cast<double>(d);
    const auto nn = static_cast<Eigen::Index>(n);
    const auto dim = static_cast<Eigen::Index>(d);

    // Pair term: diagonal pairs contribute exp(0) = 1 each.
    const double pair_scale = -b2 / 2.0;
    double pair_sum = 0.0;
    for (Eigen::Index i = 0; i < nn; ++i) {
        const double* zi = z.row(i).data();
        double row_sum = 0.0;
        for (Eigen::Index j = i + 1; j < nn; ++j) {
            const double* zj = z.row(j).data();
            double dij = 0.0;
            for (Eigen::Index c = 0; c < dim; ++c) {
                const double diff = zi[c] - zj[c];
                dij += diff * diff;
            }
            row_sum += std::exp(pair_scale * dij);
        }
        pair_sum += row_sum;
    }
    pair_sum = 2.0 * pair_sum + static_cast<double>(n);

    const double center_scale = -b2 / (2.0 * (1.0 + b2));
    double center_sum = 0.0;
    for (Eigen::Index i = 0; i < nn; ++i) center_sum += std::exp(center_scale * z.row(i).squaredNorm());

    const double nd = static_cast<double>(n);
    const double stat = nd * (pair_sum / (nd * nd) - 2.0 * std::pow(1.0 + b2, -dd / 2.0) * center_sum / nd +
                              std::pow(1.0 + 2.0 * b2, -dd / 2.0));
    r.statistic = std::max(stat, 0.0);

    const auto null = hz_null(n, d);
    r.null_mean = null.mean;
    r.null_var = null.var;
    r.log_mean = null.log_mean;
    r.log_sd = null.log_sd;
    r.p_value = lognormal_sf(r.statistic, null.log_mean, null.log_sd);
    r.reject = r.p_value < alpha;
    return r;
}

double hz_null_calibration(std::size_t n, std::size_t d, std::size_t trials, double alpha, std::uint64_t seed,
                           CalibrationShape shape) {
    if (trials < 50) fail(ErrorKind::InvalidArgument, "calibration needs at least 50 trials");
    if (d < 1 || n < d + 2) fail(ErrorKind::InvalidArgument, "calibration needs d >= 1 and n >= d + 2");
    Rng rng(seed);
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::size_t rejected = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double g = rng.normal();
            x.data()[i] = shape == CalibrationShape::CubedNormal ? g * g * g : g;
        }
        if (henze_zirkler(x, alpha).reject) ++rejected;
    }
    return static_cast<double>(rejected) / static_cast<double>(trials);
}

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) fail(ErrorKind::InvalidArgument, "KS statistic needs at least one sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = std::clamp(cdf(sorted[i]), 0.0, 1.0);
        const double idx = static_cast<double>(i);
        d = std::max({d, (idx + 1.0) / n - f, f - idx / n});
    }
    return std::clamp(d, 0.0, 1.0);
}

double triangular_pdf(double x, double a, double c, double b) {
    if (x < a || x > b) return 0.0;
    if (x <= c) return c > a ? 2.0 * (x - a) / ((b - a) * (c - a)) : 2.0 / (b - a);
    return 2.0 * (b - x) / ((b - a) * (b - c));
}

double triangular_cdf(double x, double a, double c, double b) {
    if (x <= a) return 0.0;
    if (x >= b) return 1.0;
    if (x <= c) return (x - a) * (x - a) / ((b - a) * (c - a));
    return 1.0 - (b - x) * (b - x) / ((b - a) * (b - c));
}

namespace {

struct Support {
    std::vector<double> sorted;
    double lo;
    double hi;
};

Support widened_support(std::span<const double> samples, std::size_t min_n) {
    if (samples.size() < min_n) {
        fail(ErrorKind::InsufficientData,
             "need at least " + std::to_string(min_n) + " samples, got " + std::to_string(samples.size()));
    }
    Support s;
    s.sorted.assign(samples.begin(), samples.end());
    for (double x : s.sorted)
        if (!std::isfinite(x)) fail(ErrorKind::InvalidArgument, "samples contain non-finite values");
    std::sort(s.sorted.begin(), s.sorted.end());
    const double mn = s.sorted.front();
    const double mx = s.sorted.back();
    if (!(mx > mn)) fail(ErrorKind::InsufficientData, "samples have zero range");
    const double delta = (mx - mn) / static_cast<double>(s.sorted.size());
    s.lo = mn - delta;
    s.hi = mx + delta;
    return s;
}

TriangularFit fit_triangular_sorted(const Support& s) {
    const auto& x = s.sorted;
    const std::size_t n = x.size();
    const double a = s.lo;
    const double b = s.hi;

    // prefix[k] = sum_{m<k} ln(x_m - a); suffix[k] = sum_{m>=k} ln(b - x_m).
    std::vector<double> prefix(n + 1, 0.0);
    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t m = 0; m < n; ++m) prefix[m + 1] = prefix[m] + std::log(x[m] - a);
    for (std::size_t m = n; m-- > 0;) suffix[m] = suffix[m + 1] + std::log(b - x[m]);

    const double nd = static_cast<double>(n);
    const double base = nd * std::log(2.0) - nd * std::log(b - a);
    double best_ll = -std::numeric_limits<double>::infinity();
    double best_c = x.front();
    std::size_t m = 0;
    while (m < n) {
        const double c = x[m];
        std::size_t k = m;
        while (k < n && x[k] == c) ++k;  // k = number of samples <= c
        const double kd = static_cast<double>(k);
        const double ll = base + prefix[k] - kd * std::log(c - a) + suffix[k] - (nd - kd) * std::log(b - c);
        if (ll > best_ll) {
            best_ll = ll;
            best_c = c;
        }
        m = k;
    }

    TriangularFit fit;
    fit.a = a;
    fit.b = b;
    fit.c = best_c;
    double ll = 0.0;
    for (double v : x) ll += std::log(triangular_pdf(v, a, best_c, b));
    fit.loglik = ll;
    fit.aic = 2.0 * 3.0 - 2.0 * ll;
    fit.ks_stat = ks_statistic(x, [&](double v) { return triangular_cdf(v, a, best_c, b); });
    return fit;
}

}  // namespace

TriangularFit fit_triangular(std::span<const double> samples) { return fit_triangular_sorted(widened_support(samples, 3)); }

FitComparison compare_fits(std::span<const double> samples) {
    const auto s = widened_support(samples, 8);
    const auto& x = s.sorted;
    const double n = static_cast<double>(x.size());

    FitComparison out;
    out.triangular = fit_triangular_sorted(s);

    auto& nf = out.normal;
    double sum = 0.0;
    for (double v : x) sum += v;
    nf.mean = sum / n;
    double ss = 0.0;
    for (double v : x) ss += (v - nf.mean) * (v - nf.mean);
    nf.sd = std::sqrt(ss / n);
    if (!(nf.sd > 0.0)) fail(ErrorKind::InsufficientData, "samples have zero variance");
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi) - std::log(nf.sd);
    double ll = 0.0;
    for (double v : x) {
        const double zv = (v - nf.mean) / nf.sd;
        ll += log_norm - 0.5 * zv * zv;
    }
    nf.loglik = ll;
    nf.aic = 2.0 * 2.0 - 2.0 * ll;
    nf.ks_stat = ks_statistic(x, [&](double v) { return normal_cdf((v - nf.mean) / nf.sd); });

    auto& uf = out.uniform;
    uf.a = s.lo;
    uf.b = s.hi;
    uf.loglik = -n * std::log(uf.b - uf.a);
    uf.aic = 2.0 * 2.0 - 2.0 * uf.loglik;
    uf.ks_stat = ks_statistic(x, [&](double v) { return std::clamp((v - uf.a) / (uf.b - uf.a), 0.0, 1.0); });

    const double aics[3] = {out.triangular.aic, nf.aic, uf.aic};
    const char* labels[3] = {"triangular", "normal", "uniform"};
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i)
        if (aics[i] < aics[best]) best = i;
    out.best_by_aic = labels[best];
    out.aic_tie = std::count(std::begin(aics), std::end(aics), aics[best]) > 1;
    return out;
}

}  // namespace lgeom
