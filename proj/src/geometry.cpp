#include "latent_geom/geometry.hpp"

#include "latent_geom/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lgeom {

double quantile(std::vector<double> values, double q) {
    if (values.empty()) fail(ErrorKind::InvalidArgument, "quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

BallSummary ball_summary(const Matrix& points) {
    if (points.rows() == 0) fail(ErrorKind::InvalidArgument, "ball summary of an empty point set");
    const RowVector centroid = points.colwise().mean();
    std::vector<double> dist(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) dist[static_cast<std::size_t>(i)] = (points.row(i) - centroid).norm();

    BallSummary b;
    b.centroid.assign(centroid.data(), centroid.data() + centroid.size());
    b.n = dist.size();
    b.r_max = *std::max_element(dist.begin(), dist.end());
    b.r_q95 = std::min(quantile(std::move(dist), 0.95), b.r_max);
    return b;
}

namespace {

std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
    std::vector<double> e(bins + 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i <= bins; ++i) e[i] = lo + width * static_cast<double>(i);
    e.back() = hi;
    return e;
}

Range resolve_range(std::span<const double> values, std::size_t bins, const std::optional<Range>& range) {
    Range r;
    if (range) {
        r = *range;
        if (!(r.second >= r.first)) fail(ErrorKind::InvalidArgument, "histogram range is reversed");
    } else if (values.empty()) {
        r = {0.0, 1.0};
    } else {
        const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        r = {*mn, *mx};
    }
    if (r.second == r.first && bins > 1) fail(ErrorKind::DegenerateRange, "histogram range has zero width");
    return r;
}

// Bin index for x; sets `clamped` when x lies outside the range.
std::size_t bin_of(double x, const Range& r, std::size_t bins, bool& clamped) {
    if (!std::isfinite(x)) fail(ErrorKind::InvalidArgument, "histogram input is not finite");
    clamped = x < r.first || x > r.second;
    if (x <= r.first) return 0;
    if (x >= r.second) return bins - 1;
    const auto b = static_cast<std::size_t>((x - r.first) / (r.second - r.first) * static_cast<double>(bins));
    return std::min(b, bins - 1);
}

}  // namespace

Histogram histogram_1d(std::span<const double> samples, std::size_t bins, std::optional<Range> range) {
    if (bins == 0) fail(ErrorKind::InvalidArgument, "histogram needs at least one bin");
    const auto r = resolve_range(samples, bins, range);
    Histogram h;
    h.dims = 1;
    h.edges.push_back(uniform_edges(r.first, r.second, bins));
    h.counts.assign(bins, 0);
    for (double x : samples) {
        bool clamped = false;
        ++h.counts[bin_of(x, r, bins, clamped)];
        if (clamped) ++h.clamped;
    }
    h.n_total = samples.size();
    return h;
}

Histogram histogram_2d(const Matrix& points, std::size_t bins, std::optional<std::array<Range, 2>> range) {
    if (bins == 0) fail(ErrorKind::InvalidArgument, "histogram needs at least one bin");
    if (points.cols() != 2) fail(ErrorKind::InvalidArgument, "2D histogram needs n x 2 points");
    const Eigen::VectorXd xs = points.col(0);
    const Eigen::VectorXd ys = points.col(1);
    const std::span<const double> xspan(xs.data(), static_cast<std::size_t>(xs.size()));
    const std::span<const double> yspan(ys.data(), static_cast<std::size_t>(ys.size()));
    const auto rx = resolve_range(xspan, bins, range ? std::optional<Range>((*range)[0]) : std::nullopt);
    const auto ry = resolve_range(yspan, bins, range ? std::optional<Range>((*range)[1]) : std::nullopt);

    Histogram h;
    h.dims = 2;
    h.edges.push_back(uniform_edges(rx.first, rx.second, bins));
    h.edges.push_back(uniform_edges(ry.first, ry.second, bins));
    h.counts.assign(bins * bins, 0);
    for (std::size_t i = 0; i < xspan.size(); ++i) {
        bool cx = false;
        bool cy = false;
        const auto bx = bin_of(xspan[i], rx, bins, cx);
        const auto by = bin_of(yspan[i], ry, bins, cy);
        ++h.counts[bx * bins + by];
        if (cx || cy) ++h.clamped;
    }
    h.n_total = xspan.size();
    return h;
}

double annulus_area(double r_in, double r_out) { return std::numbers::pi * (r_out * r_out - r_in * r_in); }

RadialProfile radial_profile(const Matrix& points2d, std::size_t n_bins) {
    if (points2d.cols() != 2) fail(ErrorKind::InvalidArgument, "radial profile needs n x 2 points");
    if (n_bins < 2) fail(ErrorKind::InvalidArgument, "radial profile needs at least 2 bins");
    if (static_cast<std::size_t>(points2d.rows()) < n_bins)
        fail(ErrorKind::InsufficientData, "radial profile needs at least as many points as bins");

    const RowVector centroid = points2d.colwise().mean();
    std::vector<double> radii(static_cast<std::size_t>(points2d.rows()));
    for (Eigen::Index i = 0; i < points2d.rows(); ++i) radii[static_cast<std::size_t>(i)] = (points2d.row(i) - centroid).norm();
    const double r_max = *std::max_element(radii.begin(), radii.end());
    if (!(r_max > 0.0)) fail(ErrorKind::DegenerateData, "all points coincide with the centroid");

    RadialProfile rp;
    rp.centroid = {centroid(0), centroid(1)};
    rp.bin_edges = uniform_edges(0.0, r_max, n_bins);
    rp.counts.assign(n_bins, 0);
    const Range range{0.0, r_max};
    for (double r : radii) {
        bool clamped = false;
        ++rp.counts[bin_of(r, range, n_bins, clamped)];
    }
    rp.density.resize(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b)
        rp.density[b] = static_cast<double>(rp.counts[b]) / annulus_area(rp.bin_edges[b], rp.bin_edges[b + 1]);
    return rp;
}

ConeFit cone_fit(const RadialProfile& profile) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t b = 0; b < profile.counts.size(); ++b) {
        if (profile.counts[b] == 0) continue;
        xs.push_back(0.5 * (profile.bin_edges[b] + profile.bin_edges[b + 1]));
        ys.push_back(profile.density[b]);
    }
    if (xs.size() < 3) fail(ErrorKind::InsufficientData, "cone fit needs at least 3 non-empty bins");

    const double n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }

    double sum_sq = 0.0;
    for (double y : ys) sum_sq += y * y;
    // Variation at rounding level counts as a flat profile.
    if (syy <= 1e-20 * sum_sq) {
        syy = 0.0;
        sxy = 0.0;
    }

    ConeFit fit;
    fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
        ss_res += r * r;
    }
    // A constant profile has nothing to explain; report R^2 = 0 for both models.
    fit.r2_linear = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 0.0;
    fit.r2_constant = 0.0;
    fit.is_cone_like = fit.slope < 0.0 && fit.r2_linear - fit.r2_constant > kConeR2Gain;
    return fit;
}

}  // namespace lgeom
