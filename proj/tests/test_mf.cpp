#include "latent_geom/error.hpp"
#include "latent_geom/mf.hpp"
#include "support/test_support.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <sstream>

using namespace lgeom;

namespace {

FactorModel make_model(std::initializer_list<double> u, std::initializer_list<double> v) {
    FactorModel m;
    m.k = u.size();
    m.u.resize(1, static_cast<Eigen::Index>(u.size()));
    m.v.resize(1, static_cast<Eigen::Index>(v.size()));
    Eigen::Index c = 0;
    for (double x : u) m.u(0, c++) = x;
    c = 0;
    for (double x : v) m.v(0, c++) = x;
    return m;
}

RatingDataset small_dataset() {
    std::istringstream in("1::1::5\n1::2::3\n2::1::4\n2::3::1\n3::2::2\n3::3::5\n");
    return parse_movielens(in);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_CASE("init_factors shape, bounds and determinism") {
    const auto m = init_factors(2, 3, 4, 9);
    CHECK(m.u.rows() == 2);
    CHECK(m.u.cols() == 4);
    CHECK(m.v.rows() == 3);
    CHECK(m.step == 0);
    CHECK(m.u.minCoeff() > 0.0);
    CHECK(m.u.maxCoeff() < 0.5);
    CHECK(m.v.minCoeff() > 0.0);
    CHECK(m.v.maxCoeff() < 0.5);
    CHECK(init_factors(2, 3, 4, 9) == m);
    CHECK_THROWS_AS(init_factors(2, 3, 0, 9), Error);
}

TEST_CASE("predict") {
    CHECK(predict(make_model({0.5, 0.5}, {0.5, 0.5}), 0, 0, PredMode::Dot) == doctest::Approx(0.5));
    CHECK(predict(make_model({1, 0}, {0, 1}), 0, 0, PredMode::Cosine) == 0.0);
    CHECK(predict(make_model({0.3, 0.4}, {0.6, 0.8}), 0, 0, PredMode::Cosine) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(predict(make_model({0, 0}, {0.6, 0.8}), 0, 0, PredMode::Cosine) == 0.0);
    try {
        predict(make_model({1}, {1}), 1, 0, PredMode::Dot);
        FAIL("expected index error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Index);
    }
}

TEST_CASE("loss components") {
    TrainConfig cfg;
    cfg.l2 = 0.0;

    SUBCASE("exact fit has zero squared loss and zero KL") {
        std::istringstream in("1::1::4\n");
        auto ds = parse_movielens(in, {"::", 5.0});
        auto m = make_model({0.8}, {1.0});
        cfg.variant = Variant::KlMat;
        const auto l = loss(m, ds, cfg);
        CHECK(l.squared == doctest::Approx(0.0));
        CHECK(l.kl_term == doctest::Approx(0.0));
    }
    SUBCASE("single rating at r_max with prediction 0.5") {
        std::istringstream in("1::1::5\n");
        auto ds = parse_movielens(in);
        const auto l = loss(make_model({0.5, 0.5}, {0.5, 0.5}), ds, cfg);
        CHECK(l.squared == doctest::Approx(0.25));
        CHECK(l.kl_term == 0.0);
    }
    SUBCASE("total is the exact sum, components are non-negative") {
        auto ds = small_dataset();
        auto m = init_factors(ds.n_users, ds.n_items, 3, 5);
        for (auto v : {Variant::Base, Variant::KlMat, Variant::ZeroMat}) {
            cfg.variant = v;
            cfg.l2 = 0.03;
            const auto l = loss(m, ds, cfg);
            CHECK(l.total == l.squared + l.l2_penalty + l.kl_term);
            CHECK(l.squared >= 0.0);
            CHECK(l.l2_penalty >= 0.0);
            CHECK(l.kl_term >= 0.0);
        }
    }
    SUBCASE("non-finite model is a numeric error") {
        auto ds = small_dataset();
        auto m = init_factors(ds.n_users, ds.n_items, 2, 5);
        m.u(0, 0) = std::nan("");
        try {
            loss(m, ds, cfg);
            FAIL("expected numeric error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Numeric);
        }
    }
    CHECK(bernoulli_kl(0.3, 0.3) == 0.0);
    CHECK(bernoulli_kl(1.0, 0.5) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("sgd_step hand-evaluated update") {
    TrainConfig cfg;
    cfg.variant = Variant::Base;
    cfg.lr = 0.1;
    cfg.l2 = 0.0;
    auto m = make_model({0.5}, {0.5});
    const Sample s{0, 0, 1.0};

    // Central difference of the per-sample objective confirms the hand gradient -2 e v = -0.75.
    const double h = 1e-6;
    auto plus = m, minus = m;
    plus.u(0, 0) += h;
    minus.u(0, 0) -= h;
    const double fd = (sample_objective(plus, s, cfg) - sample_objective(minus, s, cfg)) / (2 * h);
    CHECK(fd == doctest::Approx(-0.75).epsilon(1e-8));

    sgd_step(m, s, cfg);
    CHECK(m.u(0, 0) == doctest::Approx(0.575).epsilon(1e-15));
    CHECK(m.v(0, 0) == doctest::Approx(0.575).epsilon(1e-15));
    CHECK(m.step == 1);
}

TEST_CASE("sgd_step with zero error and no regularization leaves factors unchanged") {
    TrainConfig cfg;
    cfg.l2 = 0.0;
    for (auto v : {Variant::Base, Variant::KlMat, Variant::ZeroMat}) {
        cfg.variant = v;
        auto m = make_model({0.5, 0.5}, {0.5, 0.5});
        const auto before = m;
        sgd_step(m, {0, 0, 0.5}, cfg);
        CHECK(m.u == before.u);
        CHECK(m.v == before.v);
    }
}

TEST_CASE("sgd_step rejects targets outside (0, 1] and reports non-finite updates") {
    TrainConfig cfg;
    auto m = make_model({0.5}, {0.5});
    CHECK_THROWS_AS(sgd_step(m, {0, 0, 0.0}, cfg), Error);
    CHECK_THROWS_AS(sgd_step(m, {0, 0, 1.5}, cfg), Error);

    cfg.lr = 1e300;
    auto big = make_model({1e300}, {1e300});
    try {
        sgd_step(big, {0, 0, 1.0}, cfg);
        FAIL("expected numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
}

TEST_CASE("analytic sample gradient matches central finite differences") {
    const double h = 1e-6;
    std::size_t checked = 0;
    for (auto variant : {Variant::Base, Variant::KlMat, Variant::ZeroMat}) {
        for (auto mode : {PredMode::Dot, PredMode::Cosine}) {
            for (bool kl_sqrt : {false, true}) {
                if (kl_sqrt && variant != Variant::KlMat) continue;
                for (std::uint64_t seed = 0; seed < 10; ++seed) {
                    TrainConfig cfg;
                    cfg.variant = variant;
                    cfg.pred_mode = mode;
                    cfg.kl_sqrt = kl_sqrt;
                    cfg.l2 = 0.05;
                    cfg.kl_weight = 0.3;
                    auto m = init_factors(3, 3, 2, seed);
                    Rng rng(seed + 1000);
                    const Sample s{rng.index(3), rng.index(3), static_cast<double>(1 + rng.index(5)) / 5.0};
                    const auto g = sample_gradient(m, s, cfg);
                    for (int which = 0; which < 2; ++which) {
                        Matrix& mat = which == 0 ? m.u : m.v;
                        const auto row = static_cast<Eigen::Index>(which == 0 ? s.user : s.item);
                        const RowVector& analytic = which == 0 ? g.user : g.item;
                        for (Eigen::Index c = 0; c < 2; ++c) {
                            const double orig = mat(row, c);
                            mat(row, c) = orig + h;
                            const double fp = sample_objective(m, s, cfg);
                            mat(row, c) = orig - h;
                            const double fm = sample_objective(m, s, cfg);
                            mat(row, c) = orig;
                            const double fd = (fp - fm) / (2 * h);
                            INFO("variant " << to_string(variant) << " mode " << to_string(mode) << " sqrt " << kl_sqrt
                                            << " seed " << seed);
                            CHECK(rel_err(analytic(c), fd) < 1e-6);
                            ++checked;
                        }
                    }
                }
            }
        }
    }
    CHECK(checked == 320);
}

TEST_CASE("zipf_target") {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) CHECK(zipf_target(1, rng) == 1.0);
    CHECK_THROWS_AS(zipf_target(0, rng), Error);

    std::array<std::size_t, 5> counts{};
    const std::size_t draws = 100'000;
    for (std::size_t i = 0; i < draws; ++i) {
        const double t = zipf_target(5, rng);
        const auto m = static_cast<std::size_t>(std::lround(t * 5));
        REQUIRE(m >= 1);
        REQUIRE(m <= 5);
        ++counts[m - 1];
    }
    for (std::size_t m = 1; m <= 5; ++m) {
        CHECK(std::abs(static_cast<double>(counts[m - 1]) / draws - static_cast<double>(m) / 15.0) < 0.01);
    }
}

TEST_CASE("train snapshot semantics and determinism") {
    const auto ds = small_dataset();
    TrainConfig cfg;
    cfg.k = 3;
    cfg.total_steps = 200;
    cfg.snapshot_steps = {0, 200};
    cfg.seed = 17;
    for (auto v : {Variant::Base, Variant::KlMat, Variant::ZeroMat}) {
        cfg.variant = v;
        const auto a = train(ds, cfg);
        REQUIRE(a.snapshots.size() == 2);
        CHECK(a.snapshots[0].model == init_factors(ds.n_users, ds.n_items, 3, 17));
        CHECK(a.snapshots[1].step == 200);
        CHECK(a.snapshots[1].model.step == 200);
        CHECK(a.loss_trace.size() == 2);
        CHECK(a.loss_trace[0].step < a.loss_trace[1].step);
        CHECK(train(ds, cfg) == a);
    }
}

TEST_CASE("snapshots are deep copies") {
    const auto ds = small_dataset();
    TrainConfig cfg;
    cfg.total_steps = 10;
    cfg.snapshot_steps = {0, 10};
    auto series = train(ds, cfg);
    const auto copy = series.snapshots[0].model;
    series.snapshots[1].model.u.setZero();
    CHECK(series.snapshots[0].model == copy);
}

TEST_CASE("ZeroMat ignores rating values") {
    auto ds = small_dataset();
    TrainConfig cfg;
    cfg.variant = Variant::ZeroMat;
    cfg.total_steps = 300;
    cfg.snapshot_steps = {0, 100, 300};
    const auto a = train(ds, cfg);
    auto shuffled = ds;
    for (std::size_t i = 0; i < shuffled.triples.size(); ++i)
        shuffled.triples[i].rating = ds.triples[shuffled.triples.size() - 1 - i].rating;
    CHECK(train(shuffled, cfg) == a);
}

TEST_CASE("empty dataset and invalid configs") {
    RatingDataset empty;
    empty.n_users = 3;
    empty.n_items = 3;
    empty.r_max = 5;
    TrainConfig cfg;
    cfg.total_steps = 5;
    cfg.snapshot_steps = {5};
    try {
        train(empty, cfg);
        FAIL("expected empty-dataset error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyDataset);
    }
    cfg.variant = Variant::ZeroMat;
    CHECK(train(empty, cfg).snapshots.size() == 1);

    cfg.snapshot_steps = {5, 3};
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg.snapshot_steps = {6};
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg.snapshot_steps = {};
    cfg.clip_eps = 0.5;
    CHECK_THROWS_AS(validate(cfg), Error);
}

TEST_CASE("BASE training lowers the squared loss on a 100-user subsample") {
    const auto dir = testing::fresh_temp_dir("mf-base");
    RatingDataset ds;
    const auto ml = testing::movielens_1m_path();
    if (!ml.empty()) {
        const auto full = parse_movielens_file(ml);
        std::ostringstream text;
        for (const auto& t : full.triples) {
            if (t.user < 100) text << full.user_ids[t.user] << "::" << full.item_ids[t.item] << "::" << t.rating << '\n';
        }
        std::istringstream in(text.str());
        ds = parse_movielens(in, {"::", full.r_max});
    } else {
        testing::SyntheticCorpus corpus;
        corpus.n_users = 100;
        corpus.n_items = 400;
        corpus.n_ratings = 12'000;
        testing::write_synthetic_movielens(dir / "ratings.dat", corpus);
        ds = parse_movielens_file(dir / "ratings.dat");
    }
    TrainConfig cfg;
    cfg.total_steps = 100'000;
    cfg.snapshot_steps = {0, 100'000};
    const auto series = train(ds, cfg);
    CHECK(series.loss_trace.back().loss.squared < series.loss_trace.front().loss.squared);
    std::filesystem::remove_all(dir);
}

TEST_CASE("snapshot series survives a save/load round trip") {
    const auto dir = testing::fresh_temp_dir("mf-series");
    TrainConfig cfg;
    cfg.variant = Variant::KlMat;
    cfg.total_steps = 50;
    cfg.snapshot_steps = {0, 25, 50};
    const auto series = train(small_dataset(), cfg);
    save_series(series, dir);
    CHECK(load_series(dir) == series);
    std::filesystem::remove_all(dir);
}
