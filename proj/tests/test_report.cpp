#include "latent_geom/error.hpp"
#include "latent_geom/pipeline.hpp"
#include "support/test_support.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>

using namespace lgeom;
namespace fs = std::filesystem;

namespace {

const fs::path& small_corpus() {
    static const fs::path path = [] {
        const auto dir = testing::fresh_temp_dir("report-corpus");
        testing::SyntheticCorpus c;
        c.n_users = 60;
        c.n_items = 50;
        c.n_ratings = 1'000;
        c.min_per_user = 5;
        testing::write_synthetic_movielens(dir / "ratings.dat", c);
        return dir / "ratings.dat";
    }();
    return path;
}

PipelineConfig small_config(const fs::path& out) {
    auto cfg = default_pipeline_config();
    cfg.dataset_path = small_corpus().string();
    cfg.out_dir = out.string();
    for (auto& tc : cfg.train) {
        tc.total_steps = 3'000;
        tc.snapshot_steps = {0, 3'000};
    }
    cfg.analysis.subsample_max = 40;
    cfg.analysis.tsne.perplexity = 8.0;
    cfg.analysis.tsne.n_iter = 300;
    cfg.analysis.hist_bins = 10;
    cfg.analysis.radial_bins = 6;
    return cfg;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(LGEOM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("scatter SVG element counts") {
    Matrix p(3, 2);
    p << 0, 0, 1, 1, 2, 0.5;
    const std::vector<PointSet> sets{PointSet::User, PointSet::Item, PointSet::User};
    const auto svg = render_svg_scatter(p, sets);
    CHECK(testing::count_occurrences(svg, "<circle") == 3);
    CHECK(testing::count_occurrences(svg, "class=\"legend-entry\"") == 2);
    CHECK(svg.find("#1f5fbf") != std::string::npos);
    CHECK(svg.find("#2ca02c") != std::string::npos);
    CHECK(svg.rfind("</svg>") != std::string::npos);

    const auto empty = render_svg_scatter(Matrix(0, 2), {});
    CHECK(testing::count_occurrences(empty, "<circle") == 0);
    CHECK(testing::count_occurrences(empty, "class=\"legend-entry\"") == 2);
    CHECK(empty.find("<svg") != std::string::npos);
}

TEST_CASE("histogram SVG element counts") {
    const auto h1 = histogram_1d(std::vector<double>{0, 1, 2, 3, 4, 4}, 5);
    CHECK(testing::count_occurrences(render_svg_histogram(h1), "class=\"bar\"") == 5);

    Matrix p(4, 2);
    p << 0, 0, 1, 1, 0.5, 0.2, 0.9, 0.1;
    const auto h2 = histogram_2d(p, 3);
    const auto svg2 = render_svg_histogram(h2);
    CHECK(testing::count_occurrences(svg2, "class=\"cell\"") == 9);
    CHECK(testing::count_occurrences(svg2, "scale-bar") >= 1);

    const auto zero = histogram_1d(std::vector<double>{}, 4);
    const auto svg0 = render_svg_histogram(zero);
    CHECK(testing::count_occurrences(svg0, "class=\"bar\"") == 4);
    CHECK(svg0.find("nan") == std::string::npos);
}

TEST_CASE("unwritable SVG path is an I/O error") {
    const auto h = histogram_1d(std::vector<double>{1, 2}, 2);
    try {
        emit_svg_histogram("/nonexistent-dir/x/h.svg", h);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Io);
    }
}

TEST_CASE("pipeline on a missing dataset leaves no outputs") {
    const auto out = testing::fresh_temp_dir("report-missing") / "out";
    auto cfg = small_config(out);
    cfg.dataset_path = "/nonexistent/ratings.dat";
    try {
        run_pipeline(cfg);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DatasetNotFound);
    }
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("small pipeline: determinism, artifacts, summary and round trip") {
    const auto root = testing::fresh_temp_dir("report-pipeline");
    const auto a = run_pipeline(small_config(root / "a"));
    const auto b = run_pipeline(small_config(root / "b"));

    const auto report_a = testing::read_file(root / "a" / "report.json");
    // Output directories are echoed in the config; everything else must match byte for byte.
    auto ja = Json::parse(report_a);
    auto jb = Json::parse(testing::read_file(root / "b" / "report.json"));
    ja["config"].erase("out_dir");
    jb["config"].erase("out_dir");
    CHECK(ja.dump() == jb.dump());
    const auto rerun = run_pipeline(small_config(root / "a"));
    CHECK(testing::read_file(root / "a" / "report.json") == report_a);

    REQUIRE(a.variants.size() == 2);
    for (const auto& v : a.variants) {
        CHECK_FALSE(v.error.has_value());
        REQUIRE(v.snapshots.size() == 2);
        for (const auto& s : v.snapshots) {
            for (const auto& rel : s.artifacts.all()) CHECK(fs::exists(root / "a" / rel));
            CHECK(testing::read_file(root / "a" / s.artifacts.embedding_csv) ==
                  testing::read_file(root / "b" / s.artifacts.embedding_csv));
            CHECK(s.n_user == 40);
            CHECK(s.n_item == 40);
        }
        CHECK(fs::exists(root / "a" / v.snapshot_dir / "manifest.json"));
    }

    CHECK(summarize(a.variants) == a.summary);
    std::size_t tests = 0, rejected = 0;
    for (const auto& v : a.variants)
        for (const auto& s : v.snapshots)
            for (const auto* h : {&s.hz_raw_user, &s.hz_raw_item, &s.hz_embedded_user, &s.hz_embedded_item}) {
                ++tests;
                rejected += h->reject ? 1 : 0;
            }
    CHECK(a.summary.hz_tests == tests);
    CHECK(a.summary.all_hz_rejected == (tests > 0 && rejected == tests));

    const auto parsed = run_report_from_json(Json::parse(report_a));
    CHECK(parsed == a);
    CHECK(to_json(parsed).dump(2) + "\n" == report_a);

    CHECK(plot_report(root / "a" / "report.json", root / "replot") > 0);
    CHECK(fs::exists(root / "replot" / a.variants[0].snapshots[1].artifacts.scatter_svg));
    fs::remove_all(root);
}

TEST_CASE("a failing variant does not void the others") {
    const auto root = testing::fresh_temp_dir("report-isolation");
    auto cfg = small_config(root);
    cfg.train[1].lr = 1e200;
    const auto r = run_pipeline(cfg);
    REQUIRE(r.variants.size() == 2);
    CHECK_FALSE(r.variants[0].error.has_value());
    CHECK(r.variants[0].snapshots.size() == 2);
    REQUIRE(r.variants[1].error.has_value());
    CHECK(r.variants[1].error->kind == to_string(ErrorKind::Numeric));
    CHECK(r.summary.failed_variants == 1);
    fs::remove_all(root);
}

TEST_CASE("config file round trip") {
    auto cfg = small_config("/tmp/x");
    cfg.r_max = 5.0;
    const auto back = pipeline_config_from_json(to_json(cfg));
    CHECK(back.train == cfg.train);
    CHECK(back.analysis == cfg.analysis);
    CHECK(back.dataset_path == cfg.dataset_path);
    CHECK(back.r_max == cfg.r_max);
    CHECK(back.seed == cfg.seed);
}

TEST_CASE("command line exit codes") {
    const auto root = testing::fresh_temp_dir("report-cli");
    const std::string corpus = small_corpus().string();

    CHECK(run_cli("") == 1);
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("pipeline --dataset /nonexistent/ratings.dat --out " + (root / "missing").string()) == 2);
    CHECK_FALSE(fs::exists(root / "missing"));

    {
        std::ofstream bad(root / "bad.dat");
        bad << "1::2::3\n1::x::4\n";
    }
    CHECK(run_cli("ingest --ratings " + (root / "bad.dat").string() + " --out " + (root / "bad.json").string()) == 2);
    CHECK(run_cli("ingest --ratings " + corpus + " --out " + (root / "ds.json").string()) == 0);
    CHECK(fs::exists(root / "ds.json"));

    const std::string train_base = "train --dataset " + (root / "ds.json").string() + " --steps 500 --snapshots 0,500";
    CHECK(run_cli(train_base + " --k 0 --out " + (root / "k0").string()) == 1);
    CHECK(run_cli(train_base + " --lr 1e200 --out " + (root / "blowup").string()) == 3);
    CHECK(run_cli(train_base + " --variant klmat --clip-eps 0.01 --out " + (root / "snaps").string()) == 0);
    const auto manifest = read_json_file(root / "snaps" / "manifest.json");
    CHECK(manifest.at("config").at("clip_eps").get<double>() == 0.01);

    CHECK(run_cli("analyze --snapshots " + (root / "snaps").string() + " --out " + (root / "an").string() +
                  " --subsample-max 30 --perplexity 5 --tsne-iter 300 --radial-bins 5 --hist-bins 8") == 0);
    CHECK(fs::exists(root / "an" / "report.json"));
    CHECK(run_cli("plot --report " + (root / "an" / "report.json").string()) == 0);

    CHECK(run_cli("pipeline --dataset " + corpus + " --out " + (root / "pipe").string() +
                  " --steps 1000 --snapshots 0,1000 --subsample-max 30 --perplexity 5 --tsne-iter 300"
                  " --radial-bins 5 --hist-bins 8") == 0);
    const auto report = read_json_file(root / "pipe" / "report.json");
    for (const char* key : {"config", "dataset", "variants", "summary", "timings", "version"}) CHECK(report.contains(key));
    CHECK(report.at("variants").size() == 2);
    fs::remove_all(root);
}
