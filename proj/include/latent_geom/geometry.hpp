#pragma once

#include "latent_geom/common.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace lgeom {

struct BallSummary {
    std::vector<double> centroid;
    /// Largest distance to the centroid.
    double r_max = 0.0;
    /// 95th percentile of centroid distances, linear interpolation between order statistics.
    double r_q95 = 0.0;
    std::size_t n = 0;

    friend bool operator==(const BallSummary&, const BallSummary&) = default;
};

BallSummary ball_summary(const Matrix& points);

/// Quantile with linear interpolation at position q * (n - 1) of the sorted values.
double quantile(std::vector<double> values, double q);

/// Uniform-bin histogram in one or two dimensions.
///
/// Bins are left-closed and right-open except the last, which is closed. Values outside
/// an explicit range are clamped into the edge bins and counted in `clamped`.
/// Two-dimensional counts are stored row-major with the x bin as the row.
struct Histogram {
    std::size_t dims = 1;
    std::vector<std::vector<double>> edges;
    std::vector<std::size_t> counts;
    std::size_t n_total = 0;
    std::size_t clamped = 0;

    std::size_t bins(std::size_t axis) const { return edges.at(axis).size() - 1; }
    std::size_t at(std::size_t x_bin, std::size_t y_bin) const { return counts.at(x_bin * bins(1) + y_bin); }

    friend bool operator==(const Histogram&, const Histogram&) = default;
};

using Range = std::pair<double, double>;

Histogram histogram_1d(std::span<const double> samples, std::size_t bins, std::optional<Range> range = std::nullopt);

/// `points` is n x 2.
Histogram histogram_2d(const Matrix& points, std::size_t bins,
                       std::optional<std::array<Range, 2>> range = std::nullopt);

struct RadialProfile {
    std::vector<double> bin_edges;
    /// count / (pi (r_out^2 - r_in^2)) per annulus.
    std::vector<double> density;
    std::vector<std::size_t> counts;
    std::vector<double> centroid;

    friend bool operator==(const RadialProfile&, const RadialProfile&) = default;
};

/// Annulus densities of 2D points around their centroid, uniform bins over [0, r_max].
RadialProfile radial_profile(const Matrix& points2d, std::size_t n_bins);

double annulus_area(double r_in, double r_out);

struct ConeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2_linear = 0.0;
    double r2_constant = 0.0;
    bool is_cone_like = false;

    friend bool operator==(const ConeFit&, const ConeFit&) = default;
};

/// Threshold on r2_linear - r2_constant for a profile to count as cone-like.
inline constexpr double kConeR2Gain = 0.2;

/// Least-squares line through (bin centre, density) over non-empty bins.
ConeFit cone_fit(const RadialProfile& profile);

}  // namespace lgeom
