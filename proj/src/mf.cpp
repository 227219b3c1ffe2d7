#include "latent_geom/mf.hpp"

#include "latent_geom/csv_io.hpp"
#include "latent_geom/error.hpp"
#include "latent_geom/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace lgeom {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Base: return "base";
        case Variant::KlMat: return "klmat";
        case Variant::ZeroMat: return "zeromat";
    }
    return "base";
}

std::string to_string(PredMode m) { return m == PredMode::Dot ? "dot" : "cosine"; }

Variant parse_variant(std::string_view text) {
    if (text == "base") return Variant::Base;
    if (text == "klmat") return Variant::KlMat;
    if (text == "zeromat") return Variant::ZeroMat;
    fail(ErrorKind::InvalidArgument, "unknown variant '" + std::string(text) + "'");
}

PredMode parse_pred_mode(std::string_view text) {
    if (text == "dot") return PredMode::Dot;
    if (text == "cosine") return PredMode::Cosine;
    fail(ErrorKind::InvalidArgument, "unknown prediction mode '" + std::string(text) + "'");
}

void validate(const TrainConfig& cfg) {
    if (cfg.k < 1) fail(ErrorKind::InvalidArgument, "k must be at least 1");
    if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) fail(ErrorKind::InvalidArgument, "lr must be positive");
    if (!(cfg.l2 >= 0.0)) fail(ErrorKind::InvalidArgument, "l2 must be non-negative");
    if (!(cfg.kl_weight >= 0.0)) fail(ErrorKind::InvalidArgument, "kl_weight must be non-negative");
    if (!(cfg.clip_eps > 0.0 && cfg.clip_eps < 0.5)) fail(ErrorKind::InvalidArgument, "clip_eps must lie in (0, 0.5)");
    for (std::size_t s = 0; s < cfg.snapshot_steps.size(); ++s) {
        if (cfg.snapshot_steps[s] > cfg.total_steps)
            fail(ErrorKind::InvalidArgument, "snapshot step " + std::to_string(cfg.snapshot_steps[s]) + " exceeds total_steps");
        if (s > 0 && cfg.snapshot_steps[s] <= cfg.snapshot_steps[s - 1])
            fail(ErrorKind::InvalidArgument, "snapshot steps must be strictly increasing");
    }
}

FactorModel init_factors(std::size_t n_users, std::size_t n_items, std::size_t k, std::uint64_t seed) {
    if (k == 0) fail(ErrorKind::InvalidArgument, "latent dimension k must be at least 1");
    if (n_users == 0 || n_items == 0) fail(ErrorKind::InvalidArgument, "factor matrices need at least one row");
    const double scale = 1.0 / std::sqrt(static_cast<double>(k));
    Rng rng(seed);
    FactorModel m;
    m.k = k;
    m.u.resize(static_cast<Eigen::Index>(n_users), static_cast<Eigen::Index>(k));
    m.v.resize(static_cast<Eigen::Index>(n_items), static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < m.u.size(); ++i) m.u.data()[i] = scale * rng.uniform_open();
    for (Eigen::Index i = 0; i < m.v.size(); ++i) m.v.data()[i] = scale * rng.uniform_open();
    return m;
}

namespace {

void check_indices(const FactorModel& model, std::size_t user, std::size_t item) {
    if (user >= static_cast<std::size_t>(model.u.rows()))
        fail(ErrorKind::Index, "user index " + std::to_string(user) + " out of range");
    if (item >= static_cast<std::size_t>(model.v.rows()))
        fail(ErrorKind::Index, "item index " + std::to_string(item) + " out of range");
}

double raw_predict(const FactorModel& model, std::size_t user, std::size_t item, PredMode mode) {
    const auto ui = model.u.row(static_cast<Eigen::Index>(user));
    const auto vj = model.v.row(static_cast<Eigen::Index>(item));
    const double dot = ui.dot(vj);
    if (mode == PredMode::Dot) return dot;
    const double nu = ui.norm();
    const double nv = vj.norm();
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return dot / (nu * nv);
}

double clip(double x, double eps) { return std::clamp(x, eps, 1.0 - eps); }

// d/dq of BernKL(p, q).
double bernoulli_kl_dq(double p, double q) { return -p / q + (1.0 - p) / (1.0 - q); }

double kl_term_value(double p, double pred, const TrainConfig& cfg) {
    const double kl = bernoulli_kl(p, clip(pred, cfg.clip_eps));
    return cfg.kl_sqrt ? std::sqrt(kl) : kl;
}

void require_finite(const FactorModel& model) {
    if (!model.u.allFinite() || !model.v.allFinite()) fail(ErrorKind::Numeric, "factor model has non-finite entries");
}

}  // namespace

double predict(const FactorModel& model, std::size_t user, std::size_t item, PredMode mode) {
    check_indices(model, user, item);
    return raw_predict(model, user, item, mode);
}

double bernoulli_kl(double p, double q) {
    double kl = 0.0;
    if (p > 0.0) kl += p * std::log(p / q);
    if (p < 1.0) kl += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    // Rounding can leave a tiny negative value when p == q.
    return std::max(kl, 0.0);
}

LossBreakdown loss_on(const FactorModel& model, std::span<const Sample> samples, const TrainConfig& cfg) {
    require_finite(model);
    LossBreakdown out;
    double kl_sum = 0.0;
    for (const auto& s : samples) {
        check_indices(model, s.user, s.item);
        const double pred = raw_predict(model, s.user, s.item, cfg.pred_mode);
        const double e = s.target - pred;
        out.squared += e * e;
        if (cfg.variant == Variant::KlMat) kl_sum += kl_term_value(s.target, pred, cfg);
    }
    out.l2_penalty = cfg.l2 * (model.u.squaredNorm() + model.v.squaredNorm());
    out.kl_term = cfg.variant == Variant::KlMat ? cfg.kl_weight * kl_sum : 0.0;
    out.total = out.squared + out.l2_penalty + out.kl_term;
    return out;
}

LossBreakdown loss(const FactorModel& model, const RatingDataset& ds, const TrainConfig& cfg) {
    if (static_cast<std::size_t>(model.u.rows()) != ds.n_users || static_cast<std::size_t>(model.v.rows()) != ds.n_items)
        fail(ErrorKind::InvalidArgument, "model dimensions do not match the dataset");
    std::vector<Sample> samples;
    samples.reserve(ds.triples.size());
    for (const auto& t : ds.triples) samples.push_back({t.user, t.item, t.rating / ds.r_max});
    return loss_on(model, samples, cfg);
}

double sample_objective(const FactorModel& model, const Sample& s, const TrainConfig& cfg) {
    check_indices(model, s.user, s.item);
    const double pred = raw_predict(model, s.user, s.item, cfg.pred_mode);
    const double e = s.target - pred;
    double obj = e * e + cfg.l2 * (model.u.row(static_cast<Eigen::Index>(s.user)).squaredNorm() +
                                   model.v.row(static_cast<Eigen::Index>(s.item)).squaredNorm());
    if (cfg.variant == Variant::KlMat) obj += cfg.kl_weight * kl_term_value(s.target, pred, cfg);
    return obj;
}

SampleGradient sample_gradient(const FactorModel& model, const Sample& s, const TrainConfig& cfg) {
    check_indices(model, s.user, s.item);
    const auto ui = model.u.row(static_cast<Eigen::Index>(s.user));
    const auto vj = model.v.row(static_cast<Eigen::Index>(s.item));
    const double pred = raw_predict(model, s.user, s.item, cfg.pred_mode);

    double d_pred = -2.0 * (s.target - pred);
    if (cfg.variant == Variant::KlMat && pred > cfg.clip_eps && pred < 1.0 - cfg.clip_eps) {
        double d_kl = bernoulli_kl_dq(s.target, pred);
        if (cfg.kl_sqrt) {
            const double kl = bernoulli_kl(s.target, pred);
            d_kl = kl > 0.0 ? d_kl / (2.0 * std::sqrt(kl)) : 0.0;
        }
        d_pred += cfg.kl_weight * d_kl;
    }

    SampleGradient g;
    if (cfg.pred_mode == PredMode::Dot) {
        g.user = d_pred * vj;
        g.item = d_pred * ui;
    } else {
        const double nu = ui.norm();
        const double nv = vj.norm();
        if (nu == 0.0 || nv == 0.0) {
            g.user = RowVector::Zero(ui.size());
            g.item = RowVector::Zero(vj.size());
        } else {
            g.user = d_pred * (vj / (nu * nv) - pred * ui / (nu * nu));
            g.item = d_pred * (ui / (nu * nv) - pred * vj / (nv * nv));
        }
    }
    g.user += 2.0 * cfg.l2 * ui;
    g.item += 2.0 * cfg.l2 * vj;
    return g;
}

void sgd_step(FactorModel& model, const Sample& s, const TrainConfig& cfg) {
    if (!(s.target > 0.0 && s.target <= 1.0)) fail(ErrorKind::InvalidArgument, "SGD target must lie in (0, 1]");
    const auto g = sample_gradient(model, s, cfg);
    auto ui = model.u.row(static_cast<Eigen::Index>(s.user));
    auto vj = model.v.row(static_cast<Eigen::Index>(s.item));
    ui -= cfg.lr * g.user;
    vj -= cfg.lr * g.item;
    ++model.step;
    if (!ui.allFinite() || !vj.allFinite()) {
        fail(ErrorKind::Numeric, "non-finite update at step " + std::to_string(model.step) + " (user " +
                                     std::to_string(s.user) + ", item " + std::to_string(s.item) + ")");
    }
}

double zipf_target(std::size_t levels, Rng& rng) {
    if (levels == 0) fail(ErrorKind::InvalidArgument, "zipf levels must be at least 1");
    const std::uint64_t total = static_cast<std::uint64_t>(levels) * (levels + 1) / 2;
    const std::uint64_t r = rng.index(total);
    // Smallest m with m(m+1)/2 > r.
    auto m = static_cast<std::uint64_t>((std::sqrt(8.0 * static_cast<double>(r) + 1.0) - 1.0) / 2.0);
    while (m * (m + 1) / 2 <= r) ++m;
    while (m > 1 && (m - 1) * m / 2 > r) --m;
    return static_cast<double>(m) / static_cast<double>(levels);
}

std::size_t effective_zipf_levels(const TrainConfig& cfg, const RatingDataset& ds) {
    if (cfg.zipf_levels > 0) return cfg.zipf_levels;
    return static_cast<std::size_t>(std::max(1L, std::lround(ds.r_max)));
}

namespace {

constexpr std::size_t kZeroMatEvalBatch = 10'000;

}  // namespace

SnapshotSeries train(const RatingDataset& ds, const TrainConfig& cfg) {
    validate(cfg);
    const bool uses_ratings = cfg.variant != Variant::ZeroMat;
    if (uses_ratings && ds.triples.empty()) fail(ErrorKind::EmptyDataset, "training requires observed ratings");
    if (ds.n_users == 0 || ds.n_items == 0) fail(ErrorKind::EmptyDataset, "dataset has no users or items");

    SnapshotSeries series;
    series.config = cfg;
    series.n_users = ds.n_users;
    series.n_items = ds.n_items;

    FactorModel model = init_factors(ds.n_users, ds.n_items, cfg.k, cfg.seed);
    Rng rng(derive_seed(cfg.seed, 1));

    std::vector<Sample> eval;
    std::size_t levels = 1;
    if (uses_ratings) {
        eval.reserve(ds.triples.size());
        for (const auto& t : ds.triples) eval.push_back({t.user, t.item, t.rating / ds.r_max});
    } else {
        levels = effective_zipf_levels(cfg, ds);
        Rng eval_rng(derive_seed(cfg.seed, 2));
        eval.reserve(kZeroMatEvalBatch);
        for (std::size_t n = 0; n < kZeroMatEvalBatch; ++n) {
            const auto u = static_cast<std::size_t>(eval_rng.index(ds.n_users));
            const auto i = static_cast<std::size_t>(eval_rng.index(ds.n_items));
            eval.push_back({u, i, zipf_target(levels, eval_rng)});
        }
    }

    auto next = cfg.snapshot_steps.begin();
    const auto record = [&] {
        series.snapshots.push_back({model.step, model});
        series.loss_trace.push_back({model.step, loss_on(model, eval, cfg)});
        ++next;
    };
    if (next != cfg.snapshot_steps.end() && *next == 0) record();

    for (std::uint64_t s = 1; s <= cfg.total_steps; ++s) {
        Sample sample;
        if (uses_ratings) {
            const auto& t = ds.triples[static_cast<std::size_t>(rng.index(ds.triples.size()))];
            sample = {t.user, t.item, t.rating / ds.r_max};
        } else {
            sample.user = static_cast<std::size_t>(rng.index(ds.n_users));
            sample.item = static_cast<std::size_t>(rng.index(ds.n_items));
            sample.target = zipf_target(levels, rng);
        }
        sgd_step(model, sample, cfg);
        if (next != cfg.snapshot_steps.end() && *next == s) record();
    }
    return series;
}

void save_series(const SnapshotSeries& series, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json snaps = nlohmann::json::array();
    for (const auto& snap : series.snapshots) {
        const std::string u_file = "U_" + std::to_string(snap.step) + ".csv";
        const std::string v_file = "V_" + std::to_string(snap.step) + ".csv";
        write_matrix_csv(dir / u_file, snap.model.u);
        write_matrix_csv(dir / v_file, snap.model.v);
        snaps.push_back({{"step", snap.step}, {"u_file", u_file}, {"v_file", v_file}});
    }
    nlohmann::json j;
    j["format"] = "latent-geom-snapshots";
    j["version"] = 1;
    j["config"] = series.config;
    j["n_users"] = series.n_users;
    j["n_items"] = series.n_items;
    j["snapshots"] = std::move(snaps);
    j["loss_trace"] = series.loss_trace;
    write_json_file(dir / "manifest.json", j);
}

SnapshotSeries load_series(const std::filesystem::path& dir) {
    const auto j = read_json_file(dir / "manifest.json");
    SnapshotSeries series;
    try {
        series.config = j.at("config").get<TrainConfig>();
        series.n_users = j.at("n_users").get<std::size_t>();
        series.n_items = j.at("n_items").get<std::size_t>();
        series.loss_trace = j.at("loss_trace").get<std::vector<LossPoint>>();
        for (const auto& s : j.at("snapshots")) {
            Snapshot snap;
            snap.step = s.at("step").get<std::uint64_t>();
            snap.model.u = read_matrix_csv(dir / s.at("u_file").get<std::string>());
            snap.model.v = read_matrix_csv(dir / s.at("v_file").get<std::string>());
            snap.model.k = static_cast<std::size_t>(snap.model.u.cols());
            snap.model.step = snap.step;
            series.snapshots.push_back(std::move(snap));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, "snapshot manifest in " + dir.string() + ": " + e.what());
    }
    return series;
}

}  // namespace lgeom
