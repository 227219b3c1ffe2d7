#pragma once

#include "latent_geom/common.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lgeom {

struct TsneConfig {
    double perplexity = 30.0;
    std::size_t n_iter = 1000;
    double early_exaggeration = 12.0;
    std::size_t exaggeration_iters = 250;
    double learning_rate = 200.0;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    std::size_t momentum_switch_iter = 250;
    std::uint64_t seed = 42;
    double perplexity_tol = 1e-5;
    std::size_t max_bisection_iters = 64;

    friend bool operator==(const TsneConfig&, const TsneConfig&) = default;
};

/// Throws InvalidArgument unless the configuration is usable for `n` points.
void validate(const TsneConfig& cfg, std::size_t n);

struct KlPoint {
    std::size_t iter = 0;
    double kl = 0.0;

    friend bool operator==(const KlPoint&, const KlPoint&) = default;
};

struct Embedding2D {
    Matrix points;
    std::vector<KlPoint> kl_trace;
    TsneConfig config;
};

struct PrecisionResult {
    double beta = 1.0;
    /// exp(H) of the calibrated conditional distribution.
    double perplexity = 0.0;
    bool converged = false;
};

/// Gaussian precision for one row of squared distances (self excluded) so that the
/// perplexity of p_j proportional to exp(-beta d_j) hits `perplexity` within `tol`.
PrecisionResult calibrate_precision(std::span<const double> sq_dists, double perplexity, double tol,
                                    std::size_t max_iter = 64);

/// As calibrate_precision, returning only beta.
double perplexity_search(std::span<const double> sq_dists, double perplexity, double tol, std::size_t max_iter = 64);

/// Conditional affinities p_{j|i} (rows sum to 1, zero diagonal) and achieved row perplexities.
struct ConditionalAffinities {
    Matrix p;
    std::vector<double> beta;
    std::vector<double> perplexity;
};

ConditionalAffinities conditional_affinities(const Matrix& points, double perplexity, double tol,
                                             std::size_t max_iter = 64);

/// Symmetrized joint affinities (p_{j|i} + p_{i|j}) / 2n, floored at 1e-12 off the diagonal.
Matrix joint_affinities(const Matrix& points, double perplexity, double tol = 1e-5, std::size_t max_iter = 64);

/// KL(P || Q) with Student-t Q computed from the embedding.
double kl_divergence(const Matrix& p, const Matrix& y);

/// Gradient of KL(exaggeration * P || Q) with respect to each embedding row.
Matrix tsne_gradient(const Matrix& p, const Matrix& y, double exaggeration = 1.0);

Embedding2D tsne(const Matrix& points, const TsneConfig& cfg);

/// Optimize from precomputed joint affinities.
Embedding2D tsne_from_affinities(const Matrix& p, const TsneConfig& cfg);

}  // namespace lgeom
