#include "latent_geom/pipeline.hpp"

#include "latent_geom/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace lgeom {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SetFits, x, y)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RadialResult, profile, cone)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SnapshotArtifacts, embedding_csv, scatter_svg, hist_x_user_svg, hist_x_user_csv,
                                   hist_y_user_svg, hist_y_user_csv, hist2d_user_svg, hist2d_user_csv, hist2d_item_svg,
                                   hist2d_item_csv)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SnapshotReport, step, n_user, n_item, hz_raw_user, hz_raw_item, hz_embedded_user,
                                   hz_embedded_item, ball_user, ball_item, ball_raw_user, ball_raw_item,
                                   marginal_fits_user, marginal_fits_item, radial_user, radial_item, tsne_kl_trace,
                                   artifacts)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(VariantError, kind, message)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ReportSummary, all_hz_rejected, hz_tests, hz_rejected, triangular_best_count,
                                   marginal_fit_count, cone_like_count, radial_count, failed_variants)

std::vector<std::string> SnapshotArtifacts::all() const {
    return {embedding_csv,   scatter_svg,     hist_x_user_svg, hist_x_user_csv, hist_y_user_svg,
            hist_y_user_csv, hist2d_user_svg, hist2d_user_csv, hist2d_item_svg, hist2d_item_csv};
}

// ---------------------------------------------------------------------------
// Configuration

PipelineConfig default_pipeline_config(const std::vector<Variant>& variants) {
    PipelineConfig cfg;
    for (const auto v : variants) {
        TrainConfig tc;
        tc.variant = v;
        tc.seed = cfg.seed;
        cfg.train.push_back(tc);
    }
    cfg.analysis.tsne.seed = cfg.seed;
    return cfg;
}

void validate(const PipelineConfig& cfg) {
    if (cfg.train.empty()) fail(ErrorKind::InvalidArgument, "no variants to run");
    std::set<Variant> seen;
    for (const auto& tc : cfg.train) {
        validate(tc);
        if (!seen.insert(tc.variant).second) fail(ErrorKind::InvalidArgument, "variant " + to_string(tc.variant) + " listed twice");
    }
    const auto& a = cfg.analysis;
    if (a.subsample_max < 4) fail(ErrorKind::InvalidArgument, "subsample_max must be at least 4");
    if (!(a.hz_alpha >= 0.0 && a.hz_alpha <= 1.0)) fail(ErrorKind::InvalidArgument, "hz_alpha must lie in [0, 1]");
    if (a.radial_bins < 2) fail(ErrorKind::InvalidArgument, "radial_bins must be at least 2");
    if (a.hist_bins < 1) fail(ErrorKind::InvalidArgument, "hist_bins must be at least 1");
    if (a.tsne.n_iter <= a.tsne.exaggeration_iters) fail(ErrorKind::InvalidArgument, "t-SNE n_iter must exceed exaggeration_iters");
    if (cfg.threads < 1) fail(ErrorKind::InvalidArgument, "threads must be at least 1");
    if (cfg.dataset_path.empty()) fail(ErrorKind::InvalidArgument, "no dataset path given");
}

namespace {

Json analysis_to_json(const AnalysisConfig& a) {
    return Json{{"tsne", a.tsne},
                {"subsample_max", a.subsample_max},
                {"hz_alpha", a.hz_alpha},
                {"radial_bins", a.radial_bins},
                {"hist_bins", a.hist_bins}};
}

void analysis_from_json(const Json& j, AnalysisConfig& a) {
    if (j.contains("tsne")) from_json(j.at("tsne"), a.tsne);
    a.subsample_max = j.value("subsample_max", a.subsample_max);
    a.hz_alpha = j.value("hz_alpha", a.hz_alpha);
    a.radial_bins = j.value("radial_bins", a.radial_bins);
    a.hist_bins = j.value("hist_bins", a.hist_bins);
}

}  // namespace

PipelineConfig pipeline_config_from_json(const Json& j) {
    try {
        PipelineConfig cfg;
        cfg.seed = j.value("seed", cfg.seed);
        cfg.dataset_path = j.value("dataset", cfg.dataset_path);
        cfg.delimiter = j.value("delimiter", cfg.delimiter);
        if (j.contains("r_max") && !j.at("r_max").is_null()) cfg.r_max = j.at("r_max").get<double>();
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
        cfg.threads = j.value("threads", cfg.threads);
        cfg.record_timings = j.value("record_timings", cfg.record_timings);

        TrainConfig shared;
        shared.seed = cfg.seed;
        if (j.contains("train") && j.at("train").is_array()) {
            for (const auto& e : j.at("train")) {
                TrainConfig tc = shared;
                from_json(e, tc);
                cfg.train.push_back(tc);
            }
        } else {
            if (j.contains("train")) from_json(j.at("train"), shared);
            const auto names = j.value("variants", std::vector<std::string>{"klmat", "zeromat"});
            const Json overrides = j.value("train_overrides", Json::object());
            for (const auto& name : names) {
                TrainConfig tc = shared;
                tc.variant = parse_variant(name);
                if (overrides.contains(name)) from_json(overrides.at(name), tc);
                tc.variant = parse_variant(name);
                cfg.train.push_back(tc);
            }
        }

        cfg.analysis.tsne.seed = cfg.seed;
        if (j.contains("analysis")) analysis_from_json(j.at("analysis"), cfg.analysis);
        return cfg;
    } catch (const Json::exception& e) {
        fail(ErrorKind::InvalidArgument, std::string("pipeline config: ") + e.what());
    }
}

Json to_json(const PipelineConfig& cfg) {
    return Json{{"dataset", cfg.dataset_path},
                {"delimiter", cfg.delimiter},
                {"r_max", cfg.r_max ? Json(*cfg.r_max) : Json(nullptr)},
                {"train", cfg.train},
                {"analysis", analysis_to_json(cfg.analysis)},
                {"out_dir", cfg.out_dir},
                {"seed", cfg.seed},
                {"threads", cfg.threads},
                {"record_timings", cfg.record_timings}};
}

// ---------------------------------------------------------------------------
// Report serialization

Json to_json(const RunReport& report) {
    Json variants = Json::array();
    for (const auto& v : report.variants) {
        variants.push_back(Json{{"variant", v.variant},
                                {"train", v.train},
                                {"snapshot_dir", v.snapshot_dir},
                                {"loss_trace", v.loss_trace},
                                {"snapshots", v.snapshots},
                                {"error", v.error ? Json(*v.error) : Json(nullptr)}});
    }
    return Json{{"config", report.config},
                {"dataset", report.dataset ? Json(*report.dataset) : Json(nullptr)},
                {"variants", variants},
                {"summary", report.summary},
                {"timings", report.timings},
                {"version", report.version}};
}

RunReport run_report_from_json(const Json& j) {
    try {
        RunReport r;
        r.config = j.at("config");
        if (!j.at("dataset").is_null()) r.dataset = j.at("dataset").get<DatasetStats>();
        for (const auto& v : j.at("variants")) {
            VariantReport vr;
            vr.variant = v.at("variant").get<std::string>();
            vr.train = v.at("train").get<TrainConfig>();
            vr.snapshot_dir = v.at("snapshot_dir").get<std::string>();
            vr.loss_trace = v.at("loss_trace").get<std::vector<LossPoint>>();
            vr.snapshots = v.at("snapshots").get<std::vector<SnapshotReport>>();
            if (!v.at("error").is_null()) vr.error = v.at("error").get<VariantError>();
            r.variants.push_back(std::move(vr));
        }
        r.summary = j.at("summary").get<ReportSummary>();
        r.timings = j.at("timings");
        r.version = j.at("version").get<std::string>();
        return r;
    } catch (const Json::exception& e) {
        fail(ErrorKind::Parse, std::string("report: ") + e.what());
    }
}

ReportSummary summarize(const std::vector<VariantReport>& variants) {
    ReportSummary s;
    for (const auto& v : variants) {
        if (v.error) ++s.failed_variants;
        for (const auto& snap : v.snapshots) {
            for (const auto* hz : {&snap.hz_raw_user, &snap.hz_raw_item, &snap.hz_embedded_user, &snap.hz_embedded_item}) {
                ++s.hz_tests;
                if (hz->reject) ++s.hz_rejected;
            }
            for (const auto* fits : {&snap.marginal_fits_user, &snap.marginal_fits_item}) {
                for (const auto* fc : {&fits->x, &fits->y}) {
                    ++s.marginal_fit_count;
                    if (fc->best_by_aic == "triangular") ++s.triangular_best_count;
                }
            }
            for (const auto* rad : {&snap.radial_user, &snap.radial_item}) {
                ++s.radial_count;
                if (rad->cone.is_cone_like) ++s.cone_like_count;
            }
        }
    }
    s.all_hz_rejected = s.hz_tests > 0 && s.hz_rejected == s.hz_tests;
    return s;
}

// ---------------------------------------------------------------------------
// Embedding files and figures

void write_embedding_csv(const std::filesystem::path& path, const Matrix& points, std::span<const PointSet> sets) {
    std::ostringstream out;
    out << "x,y,set\n";
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        out << format_double(points(i, 0)) << ',' << format_double(points(i, 1)) << ','
            << to_string(sets[static_cast<std::size_t>(i)]) << '\n';
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::Io, "cannot write " + path.string());
    f << out.str();
    if (!f) fail(ErrorKind::Io, "write failed for " + path.string());
}

void read_embedding_csv(const std::filesystem::path& path, Matrix& points, std::vector<PointSet>& sets) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::string line;
    std::vector<double> xy;
    sets.clear();
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;
        std::istringstream fields(line);
        std::string x, y, s;
        if (!std::getline(fields, x, ',') || !std::getline(fields, y, ',') || !std::getline(fields, s))
            throw ParseError(line_no, line, "expected x,y,set");
        try {
            xy.push_back(std::stod(x));
            xy.push_back(std::stod(y));
        } catch (const std::exception&) {
            throw ParseError(line_no, line, "bad coordinate");
        }
        sets.push_back(parse_point_set(s));
    }
    points.resize(static_cast<Eigen::Index>(sets.size()), 2);
    std::copy(xy.begin(), xy.end(), points.data());
}

namespace {

Matrix rows_of_set(const Matrix& points, std::span<const PointSet> sets, PointSet which) {
    const auto n = std::count(sets.begin(), sets.end(), which);
    Matrix out(n, points.cols());
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        if (sets[static_cast<std::size_t>(i)] == which) out.row(r++) = points.row(i);
    return out;
}

std::vector<double> column(const Matrix& m, Eigen::Index c) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, c);
    return out;
}

SnapshotArtifacts artifact_paths(const std::string& snap_rel) {
    SnapshotArtifacts a;
    a.embedding_csv = snap_rel + "/embedding.csv";
    a.scatter_svg = snap_rel + "/scatter.svg";
    a.hist_x_user_svg = snap_rel + "/hist_x_user.svg";
    a.hist_x_user_csv = snap_rel + "/hist_x_user.csv";
    a.hist_y_user_svg = snap_rel + "/hist_y_user.svg";
    a.hist_y_user_csv = snap_rel + "/hist_y_user.csv";
    a.hist2d_user_svg = snap_rel + "/hist2d_user.svg";
    a.hist2d_user_csv = snap_rel + "/hist2d_user.csv";
    a.hist2d_item_svg = snap_rel + "/hist2d_item.svg";
    a.hist2d_item_csv = snap_rel + "/hist2d_item.csv";
    return a;
}

// Writes every figure and histogram CSV of one snapshot; returns the file count.
std::size_t render_figures(const Matrix& embedding, std::span<const PointSet> sets, std::size_t hist_bins,
                           const std::string& title, const std::filesystem::path& out_dir, const SnapshotArtifacts& a) {
    ScatterStyle scatter;
    scatter.title = title + ": user and item factors";
    emit_svg_scatter(out_dir / a.scatter_svg, embedding, sets, scatter);

    const Matrix users = rows_of_set(embedding, sets, PointSet::User);
    const Matrix items = rows_of_set(embedding, sets, PointSet::Item);
    std::size_t written = 1;

    const auto one_d = [&](const std::vector<double>& values, const std::string& axis, const std::string& svg,
                           const std::string& csv) {
        if (values.empty()) return;
        const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        const auto hist = histogram_1d(values, *mx > *mn ? hist_bins : 1);
        HistogramStyle style;
        style.title = title + ": user " + axis + " marginal";
        style.x_label = "t-SNE " + axis;
        emit_svg_histogram(out_dir / svg, hist, style);
        write_histogram_csv(out_dir / csv, hist);
        written += 2;
    };
    one_d(column(users, 0), "x", a.hist_x_user_svg, a.hist_x_user_csv);
    one_d(column(users, 1), "y", a.hist_y_user_svg, a.hist_y_user_csv);

    const auto two_d = [&](const Matrix& pts, const std::string& who, const std::string& svg, const std::string& csv) {
        if (pts.rows() == 0) return;
        const bool flat = pts.col(0).maxCoeff() == pts.col(0).minCoeff() || pts.col(1).maxCoeff() == pts.col(1).minCoeff();
        const auto hist = histogram_2d(pts, flat ? 1 : hist_bins);
        HistogramStyle style;
        style.title = title + ": " + who + " density";
        style.x_label = "t-SNE x";
        style.y_label = "t-SNE y";
        emit_svg_histogram(out_dir / svg, hist, style);
        write_histogram_csv(out_dir / csv, hist);
        written += 2;
    };
    two_d(users, "user", a.hist2d_user_svg, a.hist2d_user_csv);
    two_d(items, "item", a.hist2d_item_svg, a.hist2d_item_csv);
    return written;
}

}  // namespace

// ---------------------------------------------------------------------------
// Analysis

SnapshotReport analyze_snapshot(const Snapshot& snap, const AnalysisConfig& cfg, std::uint64_t seed,
                                const std::filesystem::path& out_dir, const std::string& rel_dir) {
    const std::uint64_t snap_seed = derive_seed(seed, snap.step);
    const Matrix users = subsample_rows(snap.model.u, cfg.subsample_max, derive_seed(snap_seed, 0));
    const Matrix items = subsample_rows(snap.model.v, cfg.subsample_max, derive_seed(snap_seed, 1));

    SnapshotReport r;
    r.step = snap.step;
    r.n_user = static_cast<std::size_t>(users.rows());
    r.n_item = static_cast<std::size_t>(items.rows());
    r.hz_raw_user = henze_zirkler(users, cfg.hz_alpha);
    r.hz_raw_item = henze_zirkler(items, cfg.hz_alpha);
    r.ball_raw_user = ball_summary(users);
    r.ball_raw_item = ball_summary(items);

    Matrix joint(users.rows() + items.rows(), users.cols());
    joint << users, items;
    std::vector<PointSet> sets(static_cast<std::size_t>(users.rows()), PointSet::User);
    sets.resize(static_cast<std::size_t>(joint.rows()), PointSet::Item);

    const auto emb = tsne(joint, cfg.tsne);
    r.tsne_kl_trace = emb.kl_trace;
    const Matrix eu = emb.points.topRows(users.rows());
    const Matrix ei = emb.points.bottomRows(items.rows());

    r.hz_embedded_user = henze_zirkler(eu, cfg.hz_alpha);
    r.hz_embedded_item = henze_zirkler(ei, cfg.hz_alpha);
    r.ball_user = ball_summary(eu);
    r.ball_item = ball_summary(ei);
    r.marginal_fits_user = {compare_fits(column(eu, 0)), compare_fits(column(eu, 1))};
    r.marginal_fits_item = {compare_fits(column(ei, 0)), compare_fits(column(ei, 1))};
    const auto radial = [&](const Matrix& pts) {
        RadialResult rr;
        rr.profile = radial_profile(pts, cfg.radial_bins);
        rr.cone = cone_fit(rr.profile);
        return rr;
    };
    r.radial_user = radial(eu);
    r.radial_item = radial(ei);

    const std::string snap_rel = rel_dir + "/step_" + std::to_string(snap.step);
    std::filesystem::create_directories(out_dir / snap_rel);
    r.artifacts = artifact_paths(snap_rel);
    write_embedding_csv(out_dir / r.artifacts.embedding_csv, emb.points, sets);
    render_figures(emb.points, sets, cfg.hist_bins, rel_dir + " step " + std::to_string(snap.step), out_dir, r.artifacts);
    return r;
}

std::vector<SnapshotReport> analyze_series(const SnapshotSeries& series, const AnalysisConfig& cfg, std::uint64_t seed,
                                           const std::filesystem::path& out_dir, const std::string& rel_dir,
                                           std::size_t threads) {
    const std::size_t n = series.snapshots.size();
    std::vector<SnapshotReport> reports(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                reports[i] = analyze_snapshot(series.snapshots[i], cfg, seed, out_dir, rel_dir);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t pool = std::min(std::max<std::size_t>(threads, 1), std::max<std::size_t>(n, 1));
    if (pool == 1) {
        worker();
    } else {
        std::vector<std::jthread> workers;
        for (std::size_t t = 0; t < pool; ++t) workers.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return reports;
}

RunReport run_pipeline(const PipelineConfig& cfg) {
    validate(cfg);
    if (!std::filesystem::exists(cfg.dataset_path))
        fail(ErrorKind::DatasetNotFound, "dataset not found: " + cfg.dataset_path);

    using Clock = std::chrono::steady_clock;
    const auto seconds_since = [](Clock::time_point t0) {
        return std::chrono::duration<double>(Clock::now() - t0).count();
    };
    const auto t_start = Clock::now();

    ParseOptions opts;
    opts.delimiter = cfg.delimiter;
    opts.r_max = cfg.r_max;
    const RatingDataset ds = load_any_dataset(cfg.dataset_path, opts);
    const double t_ingest = seconds_since(t_start);

    const std::filesystem::path out_dir(cfg.out_dir);
    std::filesystem::create_directories(out_dir);

    RunReport report;
    report.config = to_json(cfg);
    report.dataset = dataset_stats(ds);
    Json variant_timings = Json::object();

    for (const auto& tc : cfg.train) {
        const auto t0 = Clock::now();
        VariantReport vr;
        vr.variant = to_string(tc.variant);
        vr.train = tc;
        vr.snapshot_dir = vr.variant + "/snapshots";
        try {
            const auto series = train(ds, tc);
            vr.loss_trace = series.loss_trace;
            save_series(series, out_dir / vr.snapshot_dir);
            vr.snapshots = analyze_series(series, cfg.analysis, cfg.seed, out_dir, vr.variant, cfg.threads);
        } catch (const Error& e) {
            vr.snapshots.clear();
            vr.error = VariantError{to_string(e.kind()), e.what()};
        } catch (const std::exception& e) {
            vr.snapshots.clear();
            vr.error = VariantError{"internal", e.what()};
        }
        variant_timings[vr.variant] = seconds_since(t0);
        report.variants.push_back(std::move(vr));
    }

    report.summary = summarize(report.variants);
    if (cfg.record_timings) {
        report.timings = Json{{"recorded", true},
                              {"ingest_seconds", t_ingest},
                              {"variant_seconds", variant_timings},
                              {"total_seconds", seconds_since(t_start)}};
    } else {
        report.timings = Json{{"recorded", false}};
    }
    write_json_file(out_dir / "report.json", to_json(report));
    return report;
}

RunReport run_analysis(const std::filesystem::path& snapshot_dir, const PipelineConfig& cfg) {
    if (!std::filesystem::exists(snapshot_dir / "manifest.json"))
        fail(ErrorKind::DatasetNotFound, "no snapshot manifest in " + snapshot_dir.string());
    const auto series = load_series(snapshot_dir);

    RunReport report;
    PipelineConfig echo = cfg;
    echo.train = {series.config};
    report.config = to_json(echo);
    if (!cfg.dataset_path.empty()) {
        ParseOptions opts;
        opts.delimiter = cfg.delimiter;
        opts.r_max = cfg.r_max;
        report.dataset = dataset_stats(load_any_dataset(cfg.dataset_path, opts));
    }

    const std::filesystem::path out_dir(cfg.out_dir);
    std::filesystem::create_directories(out_dir);
    VariantReport vr;
    vr.variant = to_string(series.config.variant);
    vr.train = series.config;
    vr.snapshot_dir = std::filesystem::absolute(snapshot_dir).lexically_normal().string();
    vr.loss_trace = series.loss_trace;
    try {
        vr.snapshots = analyze_series(series, cfg.analysis, cfg.seed, out_dir, vr.variant, cfg.threads);
    } catch (const Error& e) {
        vr.snapshots.clear();
        vr.error = VariantError{to_string(e.kind()), e.what()};
    }
    report.variants.push_back(std::move(vr));
    report.summary = summarize(report.variants);
    report.timings = Json{{"recorded", false}};
    write_json_file(out_dir / "report.json", to_json(report));
    return report;
}

std::size_t plot_report(const std::filesystem::path& report_path, const std::optional<std::filesystem::path>& out_dir) {
    const auto report = run_report_from_json(read_json_file(report_path));
    const auto src_dir = report_path.parent_path();
    const auto dst_dir = out_dir.value_or(src_dir);
    AnalysisConfig analysis;
    if (report.config.contains("analysis")) analysis_from_json(report.config.at("analysis"), analysis);

    std::size_t written = 0;
    for (const auto& v : report.variants) {
        for (const auto& snap : v.snapshots) {
            Matrix points;
            std::vector<PointSet> sets;
            read_embedding_csv(src_dir / snap.artifacts.embedding_csv, points, sets);
            std::filesystem::create_directories((dst_dir / snap.artifacts.scatter_svg).parent_path());
            written += render_figures(points, sets, analysis.hist_bins, v.variant + " step " + std::to_string(snap.step),
                                      dst_dir, snap.artifacts);
        }
    }
    return written;
}

}  // namespace lgeom
