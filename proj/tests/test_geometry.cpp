#include "latent_geom/error.hpp"
#include "latent_geom/geometry.hpp"
#include "support/test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

using namespace lgeom;

namespace {

Matrix unit_disk(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Matrix p(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double r = std::sqrt(rng.uniform());
        const double t = 2 * std::numbers::pi * rng.uniform();
        p.row(i) << r * std::cos(t), r * std::sin(t);
    }
    return p;
}

// Planar density proportional to (1 - r) on the unit disk, by rejection.
Matrix cone_disk(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Matrix p(static_cast<Eigen::Index>(n), 2);
    Eigen::Index filled = 0;
    while (filled < p.rows()) {
        const double x = 2 * rng.uniform() - 1;
        const double y = 2 * rng.uniform() - 1;
        const double r = std::hypot(x, y);
        if (r >= 1.0) continue;
        if (rng.uniform() < 1.0 - r) p.row(filled++) << x, y;
    }
    return p;
}

RadialProfile synthetic_profile(std::size_t bins, const std::function<double(double)>& f) {
    RadialProfile p;
    p.centroid = {0.0, 0.0};
    for (std::size_t b = 0; b <= bins; ++b) p.bin_edges.push_back(static_cast<double>(b) / static_cast<double>(bins));
    for (std::size_t b = 0; b < bins; ++b) {
        p.density.push_back(f(0.5 * (p.bin_edges[b] + p.bin_edges[b + 1])));
        p.counts.push_back(1);
    }
    return p;
}

}  // namespace

TEST_CASE("ball summary") {
    Matrix circle(360, 2);
    for (int i = 0; i < 360; ++i) {
        const double t = i * std::numbers::pi / 180.0;
        circle.row(i) << std::cos(t), std::sin(t);
    }
    const auto b = ball_summary(circle);
    CHECK(std::abs(b.centroid[0]) < 1e-12);
    CHECK(std::abs(b.centroid[1]) < 1e-12);
    CHECK(std::abs(b.r_max - 1.0) < 1e-9);
    CHECK(b.r_q95 <= b.r_max);
    CHECK(b.n == 360);

    Matrix one(1, 3);
    one << 4, 5, 6;
    const auto s = ball_summary(one);
    CHECK(s.r_max == 0.0);
    CHECK(s.r_q95 == 0.0);
}

TEST_CASE("ball radii are translation and rotation invariant") {
    const auto p = unit_disk(500, 3);
    const auto base = ball_summary(p);
    RowVector shift(2);
    shift << 3.0, -7.0;
    const Matrix moved = p.rowwise() + shift;
    const auto m = ball_summary(moved);
    CHECK(m.r_max == doctest::Approx(base.r_max).epsilon(1e-12));
    CHECK(m.r_q95 == doctest::Approx(base.r_q95).epsilon(1e-12));
    CHECK(m.centroid[0] == doctest::Approx(base.centroid[0] + 3.0));

    Matrix rot(2, 2);
    rot << 0.6, -0.8, 0.8, 0.6;
    const auto r = ball_summary(p * rot.transpose());
    CHECK(r.r_max == doctest::Approx(base.r_max).epsilon(1e-12));
    CHECK(r.r_q95 == doctest::Approx(base.r_q95).epsilon(1e-12));
}

TEST_CASE("quantile interpolates order statistics") {
    CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile({0, 10}, 0.95) == doctest::Approx(9.5));
}

TEST_CASE("histogram binning") {
    const std::vector<double> s{0.0, 0.4, 0.6, 1.0};
    const auto h = histogram_1d(s, 2, Range{0.0, 1.0});
    CHECK(h.counts == std::vector<std::size_t>{2, 2});
    CHECK(h.n_total == 4);

    const auto empty = histogram_1d(std::vector<double>{}, 5);
    CHECK(empty.n_total == 0);
    CHECK(empty.counts == std::vector<std::size_t>(5, 0));

    const auto clamped = histogram_1d(std::vector<double>{-1.0, 0.5, 2.0}, 2, Range{0.0, 1.0});
    CHECK(clamped.counts == std::vector<std::size_t>{1, 2});
    CHECK(clamped.clamped == 2);

    try {
        histogram_1d(std::vector<double>{3.0, 3.0}, 4);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateRange);
    }
    CHECK(histogram_1d(std::vector<double>{3.0, 3.0}, 1).counts == std::vector<std::size_t>{2});

    Matrix pts(3, 2);
    pts << 0, 0, 1, 1, 0.2, 0.9;
    const auto h2 = histogram_2d(pts, 2);
    CHECK(h2.at(0, 0) == 1);
    CHECK(h2.at(0, 1) == 1);
    CHECK(h2.at(1, 1) == 1);
}

TEST_CASE("histogram counts are conserved on random inputs") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto n = rng.index(300);
        const auto bins = 1 + rng.index(40);
        std::vector<double> s(n);
        for (auto& x : s) x = rng.normal() * 10;
        const auto h = histogram_1d(s, bins, seed % 2 ? std::optional<Range>(Range{-5.0, 5.0}) : std::nullopt);
        CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}) == n);
        CHECK(h.n_total == n);

        Matrix p(static_cast<Eigen::Index>(n), 2);
        for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform();
        if (n > 0 && rng.uniform() < 0.5) p.col(0).setConstant(0.25);
        if (n > 0 && p.col(0).maxCoeff() == p.col(0).minCoeff() && bins > 1) {
            CHECK_THROWS_AS(histogram_2d(p, bins), Error);
            continue;
        }
        const auto h2 = histogram_2d(p, bins);
        CHECK(std::accumulate(h2.counts.begin(), h2.counts.end(), std::size_t{0}) == n);
    }
}

TEST_CASE("radial profile of a uniform disk is flat") {
    const auto prof = radial_profile(unit_disk(10'000, 1), 20);
    double lo = 1e300, hi = 0;
    for (std::size_t b = 0; b + 1 < prof.density.size(); ++b) {
        lo = std::min(lo, prof.density[b]);
        hi = std::max(hi, prof.density[b]);
    }
    CHECK(hi / lo < 1.5);
    CHECK_FALSE(cone_fit(prof).is_cone_like);
}

TEST_CASE("radial profile of a cone density decreases") {
    const auto prof = radial_profile(cone_disk(10'000, 2), 20);
    std::vector<double> centres;
    for (std::size_t b = 0; b < prof.density.size(); ++b) centres.push_back(0.5 * (prof.bin_edges[b] + prof.bin_edges[b + 1]));
    CHECK(testing::spearman(centres, prof.density) < -0.9);
    CHECK(cone_fit(prof).is_cone_like);
}

TEST_CASE("a single outlier leaves the mass in the first bin") {
    Matrix p = Matrix::Zero(50, 2);
    p.row(49) << 10, 0;
    const auto prof = radial_profile(p, 5);
    for (std::size_t b = 1; b < prof.density.size(); ++b) CHECK(prof.density[0] > prof.density[b]);
    CHECK(prof.counts[0] == 49);

    const Matrix same = Matrix::Ones(10, 2);
    try {
        radial_profile(same, 4);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateData);
    }
}

TEST_CASE("radial densities integrate back to the point count") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        const auto n = 20 + rng.index(500);
        const auto bins = 2 + rng.index(18);
        Matrix p(static_cast<Eigen::Index>(n), 2);
        for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.normal() * (1 + seed);
        const auto prof = radial_profile(p, bins);
        double mass = 0.0;
        std::size_t count = 0;
        for (std::size_t b = 0; b < bins; ++b) {
            mass += prof.density[b] * annulus_area(prof.bin_edges[b], prof.bin_edges[b + 1]);
            count += prof.counts[b];
        }
        CHECK(count == n);
        CHECK(std::abs(mass - static_cast<double>(n)) <= 1e-9 * static_cast<double>(n));
    }
}

TEST_CASE("cone fit") {
    const auto exact = cone_fit(synthetic_profile(10, [](double r) { return 1.0 - r; }));
    CHECK(std::abs(exact.slope + 1.0) < 1e-9);
    CHECK(std::abs(exact.intercept - 1.0) < 1e-9);
    CHECK(std::abs(exact.r2_linear - 1.0) < 1e-9);
    CHECK(exact.r2_constant == 0.0);
    CHECK(exact.is_cone_like);

    const auto flat = cone_fit(synthetic_profile(10, [](double) { return 2.0; }));
    CHECK(std::abs(flat.slope) < 1e-12);
    CHECK_FALSE(flat.is_cone_like);

    auto sparse = synthetic_profile(4, [](double r) { return 1.0 - r; });
    sparse.counts = {1, 0, 0, 1};
    sparse.density[1] = sparse.density[2] = 0.0;
    CHECK_THROWS_AS(cone_fit(sparse), Error);
}

TEST_CASE("cone slope sign survives uniform rescaling") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        auto prof = synthetic_profile(12, [&](double r) { return 3.0 + (rng.uniform() - 0.5) * 4.0 * r; });
        const auto base = cone_fit(prof);
        const double sr = 0.01 + 100 * rng.uniform();
        const double sd = 0.01 + 100 * rng.uniform();
        for (auto& e : prof.bin_edges) e *= sr;
        for (auto& d : prof.density) d *= sd;
        const auto scaled = cone_fit(prof);
        CHECK((base.slope < 0) == (scaled.slope < 0));
        CHECK(base.is_cone_like == scaled.is_cone_like);
    }
}
