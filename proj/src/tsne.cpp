#include "latent_geom/tsne.hpp"

#include "latent_geom/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lgeom {

namespace {

constexpr double kFloor = 1e-12;

}  // namespace

void validate(const TsneConfig& cfg, std::size_t n) {
    if (n < 4) fail(ErrorKind::InsufficientData, "t-SNE needs at least 4 points");
    if (!(cfg.perplexity > 1.0 && cfg.perplexity < static_cast<double>(n) - 1.0)) {
        fail(ErrorKind::InvalidArgument, "perplexity " + format_double(cfg.perplexity) + " must lie in (1, " +
                                             std::to_string(n - 1) + ") for " + std::to_string(n) + " points");
    }
    if (cfg.n_iter <= cfg.exaggeration_iters) fail(ErrorKind::InvalidArgument, "n_iter must exceed exaggeration_iters");
    if (!(cfg.learning_rate > 0.0)) fail(ErrorKind::InvalidArgument, "learning_rate must be positive");
    if (!(cfg.early_exaggeration > 0.0)) fail(ErrorKind::InvalidArgument, "early_exaggeration must be positive");
    if (!(cfg.perplexity_tol > 0.0)) fail(ErrorKind::InvalidArgument, "perplexity_tol must be positive");
    if (cfg.max_bisection_iters == 0) fail(ErrorKind::InvalidArgument, "max_bisection_iters must be positive");
}

PrecisionResult calibrate_precision(std::span<const double> sq_dists, double perplexity, double tol,
                                    std::size_t max_iter) {
    const std::size_t m = sq_dists.size();
    if (m == 0) fail(ErrorKind::InvalidArgument, "empty distance row");
    if (!(perplexity > 1.0) || perplexity > static_cast<double>(m)) {
        fail(ErrorKind::InvalidArgument, "perplexity " + format_double(perplexity) + " is unattainable with " +
                                             std::to_string(m) + " neighbours");
    }
    const double d_min = *std::min_element(sq_dists.begin(), sq_dists.end());
    if (!(d_min >= 0.0)) fail(ErrorKind::InvalidArgument, "squared distances must be non-negative");

    const double target_h = std::log(perplexity);
    double beta = 1.0;
    double lo = -1.0;  // unset
    double hi = -1.0;
    PrecisionResult out;
    for (std::size_t it = 0; it < max_iter; ++it) {
        // Distances are shifted by d_min; the normalized distribution is unchanged.
        double z = 0.0;
        double weighted = 0.0;
        for (double d : sq_dists) {
            const double e = d - d_min;
            const double w = std::exp(-beta * e);
            z += w;
            weighted += e * w;
        }
        const double h = std::log(z) + beta * weighted / z;
        out.beta = beta;
        out.perplexity = std::exp(h);
        if (std::abs(out.perplexity - perplexity) <= tol) {
            out.converged = true;
            return out;
        }
        if (h > target_h) {
            lo = beta;
            beta = hi < 0.0 ? beta * 2.0 : (beta + hi) / 2.0;
        } else {
            hi = beta;
            beta = lo < 0.0 ? beta / 2.0 : (beta + lo) / 2.0;
        }
    }
    return out;
}

double perplexity_search(std::span<const double> sq_dists, double perplexity, double tol, std::size_t max_iter) {
    return calibrate_precision(sq_dists, perplexity, tol, max_iter).beta;
}

ConditionalAffinities conditional_affinities(const Matrix& points, double perplexity, double tol,
                                             std::size_t max_iter) {
    const auto n = points.rows();
    if (n < 2) fail(ErrorKind::InsufficientData, "affinities need at least 2 points");
    if (!points.allFinite()) fail(ErrorKind::InvalidArgument, "points contain non-finite values");

    ConditionalAffinities out;
    out.p = Matrix::Zero(n, n);
    out.beta.resize(static_cast<std::size_t>(n));
    out.perplexity.resize(static_cast<std::size_t>(n));

    std::vector<double> row(static_cast<std::size_t>(n - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            row[m++] = (points.row(i) - points.row(j)).squaredNorm();
        }
        const auto cal = calibrate_precision(row, perplexity, tol, max_iter);
        if (!cal.converged) {
            fail(ErrorKind::DegenerateData, "perplexity calibration failed for row " + std::to_string(i) +
                                                " (reached " + format_double(cal.perplexity) + ")");
        }
        out.beta[static_cast<std::size_t>(i)] = cal.beta;
        out.perplexity[static_cast<std::size_t>(i)] = cal.perplexity;

        const double d_min = *std::min_element(row.begin(), row.end());
        double z = 0.0;
        m = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double w = std::exp(-cal.beta * (row[m++] - d_min));
            out.p(i, j) = w;
            z += w;
        }
        out.p.row(i) /= z;
    }
    return out;
}

Matrix joint_affinities(const Matrix& points, double perplexity, double tol, std::size_t max_iter) {
    const auto n = points.rows();
    if (n < 4) fail(ErrorKind::InsufficientData, "joint affinities need at least 4 points");
    Matrix p = conditional_affinities(points, perplexity, tol, max_iter).p;
    const double denom = 2.0 * static_cast<double>(n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        p(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double s = std::max((p(i, j) + p(j, i)) / denom, kFloor);
            p(i, j) = s;
            p(j, i) = s;
            total += 2.0 * s;
        }
    }
    p /= total;
    return p;
}

namespace {

void check_shapes(const Matrix& p, const Matrix& y) {
    if (p.rows() != p.cols() || p.rows() != y.rows())
        fail(ErrorKind::InvalidArgument, "affinity matrix and embedding sizes disagree");
}

}  // namespace

double kl_divergence(const Matrix& p, const Matrix& y) {
    check_shapes(p, y);
    const auto n = y.rows();
    const auto kernel = [&](Eigen::Index i, Eigen::Index j) { return 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm()); };
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) z += 2.0 * kernel(i, j);

    double kl = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double q = std::max(kernel(i, j) / z, kFloor);
            const double pij = p(i, j);
            const double pji = p(j, i);
            if (pij > 0.0) kl += pij * std::log(pij / q);
            if (pji > 0.0) kl += pji * std::log(pji / q);
        }
    }
    return std::max(kl, 0.0);
}

Matrix tsne_gradient(const Matrix& p, const Matrix& y, double exaggeration) {
    check_shapes(p, y);
    const auto n = y.rows();
    const auto dims = y.cols();
    Matrix attract = Matrix::Zero(n, dims);
    Matrix repulse = Matrix::Zero(n, dims);
    double z = 0.0;

    if (dims == 2) {
        // Specialized pair loop for the common 2D case.
        const double* yd = y.data();
        double* att = attract.data();
        double* rep = repulse.data();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double xi = yd[2 * i];
            const double yi = yd[2 * i + 1];
            const double* prow = p.row(i).data();
            double ax = 0.0, ay = 0.0, rx = 0.0, ry = 0.0;
            double zrow = 0.0;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double dx = xi - yd[2 * j];
                const double dy = yi - yd[2 * j + 1];
                const double q = 1.0 / (1.0 + dx * dx + dy * dy);
                zrow += q;
                const double pa = exaggeration * prow[j] * q;
                const double q2 = q * q;
                ax += pa * dx;
                ay += pa * dy;
                rx += q2 * dx;
                ry += q2 * dy;
                att[2 * j] -= pa * dx;
                att[2 * j + 1] -= pa * dy;
                rep[2 * j] -= q2 * dx;
                rep[2 * j + 1] -= q2 * dy;
            }
            att[2 * i] += ax;
            att[2 * i + 1] += ay;
            rep[2 * i] += rx;
            rep[2 * i + 1] += ry;
            z += 2.0 * zrow;
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const RowVector diff = y.row(i) - y.row(j);
                const double q = 1.0 / (1.0 + diff.squaredNorm());
                z += 2.0 * q;
                const double pa = exaggeration * p(i, j) * q;
                attract.row(i) += pa * diff;
                attract.row(j) -= pa * diff;
                repulse.row(i) += q * q * diff;
                repulse.row(j) -= q * q * diff;
            }
        }
    }
    return 4.0 * (attract - repulse / z);
}

Embedding2D tsne_from_affinities(const Matrix& p, const TsneConfig& cfg) {
    const auto n = p.rows();
    validate(cfg, static_cast<std::size_t>(n));
    if (p.cols() != n) fail(ErrorKind::InvalidArgument, "affinity matrix must be square");

    Embedding2D out;
    out.config = cfg;
    Rng rng(cfg.seed);
    Matrix y(n, 2);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 1e-4 * rng.normal();

    Matrix update = Matrix::Zero(n, 2);
    Matrix gains = Matrix::Ones(n, 2);
    for (std::size_t iter = 0; iter < cfg.n_iter; ++iter) {
        const double exaggeration = iter < cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;
        const double momentum = iter < cfg.momentum_switch_iter ? cfg.momentum_initial : cfg.momentum_final;
        const Matrix grad = tsne_gradient(p, y, exaggeration);

        for (Eigen::Index i = 0; i < grad.size(); ++i) {
            double& g = gains.data()[i];
            const bool same_sign = (grad.data()[i] > 0.0) == (update.data()[i] > 0.0);
            g = same_sign ? g * 0.8 : g + 0.2;
            g = std::max(g, 0.01);
            update.data()[i] = momentum * update.data()[i] - cfg.learning_rate * g * grad.data()[i];
        }
        y += update;
        y.rowwise() -= y.colwise().mean();

        if (!y.allFinite()) fail(ErrorKind::Numeric, "t-SNE embedding became non-finite at iteration " + std::to_string(iter + 1));
        if ((iter + 1) % 50 == 0) out.kl_trace.push_back({iter + 1, kl_divergence(p, y)});
    }
    out.points = std::move(y);
    return out;
}

Embedding2D tsne(const Matrix& points, const TsneConfig& cfg) {
    validate(cfg, static_cast<std::size_t>(points.rows()));
    const Matrix p = joint_affinities(points, cfg.perplexity, cfg.perplexity_tol, cfg.max_bisection_iters);
    return tsne_from_affinities(p, cfg);
}

}  // namespace lgeom
