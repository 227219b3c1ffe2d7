// latent-geom: train matrix-factorization variants and analyse the geometry of
// their latent factors.

#include "latent_geom/error.hpp"
#include "latent_geom/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <sstream>

namespace {

using namespace lgeom;

std::vector<std::uint64_t> parse_steps(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            const auto v = std::stoull(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            fail(ErrorKind::InvalidArgument, "bad snapshot step '" + item + "'");
        }
    }
    return out;
}

// Flags shared by `train` and `pipeline`, applied on top of a TrainConfig.
struct TrainFlags {
    std::optional<std::size_t> k;
    std::optional<double> lr;
    std::optional<double> l2;
    std::optional<double> kl_weight;
    bool kl_sqrt = false;
    std::optional<std::size_t> zipf_levels;
    std::optional<std::string> pred_mode;
    std::optional<std::uint64_t> steps;
    std::optional<std::string> snapshots;
    std::optional<double> clip_eps;

    void add(CLI::App* app) {
        app->add_option("--k", k, "Latent dimension");
        app->add_option("--lr", lr, "SGD learning rate");
        app->add_option("--l2", l2, "L2 regularization weight");
        app->add_option("--kl-weight", kl_weight, "KL regularizer weight (klmat)");
        app->add_flag("--kl-sqrt", kl_sqrt, "Square-root each KL term (klmat)");
        app->add_option("--zipf-levels", zipf_levels, "Zipf target levels (zeromat); 0 = round(r_max)");
        app->add_option("--pred-mode", pred_mode, "Prediction: dot or cosine");
        app->add_option("--steps", steps, "Total SGD steps");
        app->add_option("--snapshots", snapshots, "Comma-separated snapshot steps");
        app->add_option("--clip-eps", clip_eps, "Probability clipping epsilon");
    }

    void apply(TrainConfig& tc) const {
        if (k) tc.k = *k;
        if (lr) tc.lr = *lr;
        if (l2) tc.l2 = *l2;
        if (kl_weight) tc.kl_weight = *kl_weight;
        if (kl_sqrt) tc.kl_sqrt = true;
        if (zipf_levels) tc.zipf_levels = *zipf_levels;
        if (pred_mode) tc.pred_mode = parse_pred_mode(*pred_mode);
        if (steps) tc.total_steps = *steps;
        if (snapshots) tc.snapshot_steps = parse_steps(*snapshots);
        if (clip_eps) tc.clip_eps = *clip_eps;
    }
};

struct AnalysisFlags {
    std::optional<std::size_t> subsample_max;
    std::optional<double> hz_alpha;
    std::optional<std::size_t> radial_bins;
    std::optional<std::size_t> hist_bins;
    std::optional<double> perplexity;
    std::optional<std::size_t> tsne_iter;
    std::optional<std::size_t> threads;

    void add(CLI::App* app) {
        app->add_option("--subsample-max", subsample_max, "Rows kept per point set");
        app->add_option("--alpha", hz_alpha, "Henze-Zirkler significance level");
        app->add_option("--radial-bins", radial_bins, "Radial profile bins");
        app->add_option("--hist-bins", hist_bins, "Histogram bins per axis");
        app->add_option("--perplexity", perplexity, "t-SNE perplexity");
        app->add_option("--tsne-iter", tsne_iter, "t-SNE iterations");
        app->add_option("--threads", threads, "Snapshots analysed concurrently");
    }

    void apply(PipelineConfig& cfg) const {
        if (subsample_max) cfg.analysis.subsample_max = *subsample_max;
        if (hz_alpha) cfg.analysis.hz_alpha = *hz_alpha;
        if (radial_bins) cfg.analysis.radial_bins = *radial_bins;
        if (hist_bins) cfg.analysis.hist_bins = *hist_bins;
        if (perplexity) cfg.analysis.tsne.perplexity = *perplexity;
        if (tsne_iter) cfg.analysis.tsne.n_iter = *tsne_iter;
        if (threads) cfg.threads = *threads;
    }
};

void print_summary(const RunReport& report, const std::filesystem::path& out_dir) {
    const auto& s = report.summary;
    std::cout << "report: " << (out_dir / "report.json").string() << '\n'
              << "hz rejected: " << s.hz_rejected << '/' << s.hz_tests
              << (s.all_hz_rejected ? " (all)" : "") << '\n'
              << "triangular best: " << s.triangular_best_count << '/' << s.marginal_fit_count << '\n'
              << "cone-like profiles: " << s.cone_like_count << '/' << s.radial_count << '\n';
    for (const auto& v : report.variants)
        if (v.error) std::cout << "variant " << v.variant << " failed: " << v.error->kind << ": " << v.error->message << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train matrix-factorization variants and analyse their latent parameter space"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Parse a ratings file into a dataset manifest + triples CSV");
    std::string ratings_path;
    std::string delimiter = "::";
    std::optional<double> r_max;
    std::string ingest_out;
    ingest->add_option("--ratings", ratings_path, "Ratings file (UserID::MovieID::Rating::Timestamp)")->required();
    ingest->add_option("--delimiter", delimiter, "Field delimiter");
    ingest->add_option("--r-max", r_max, "Rating scale maximum (default: max observed)");
    ingest->add_option("--out", ingest_out, "Output dataset manifest (.json)")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train one variant and write snapshots");
    std::string train_dataset;
    std::string variant = "base";
    std::uint64_t train_seed = 42;
    std::string train_out;
    TrainFlags train_flags;
    train_cmd->add_option("--dataset", train_dataset, "Dataset manifest (.json) or ratings file")->required();
    train_cmd->add_option("--variant", variant, "base, klmat or zeromat");
    train_cmd->add_option("--seed", train_seed, "Random seed");
    train_cmd->add_option("--out", train_out, "Snapshot directory")->required();
    train_cmd->add_option("--delimiter", delimiter, "Field delimiter for raw ratings files");
    train_cmd->add_option("--r-max", r_max, "Rating scale maximum");
    train_flags.add(train_cmd);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Analyse a snapshot directory into a report");
    std::string snap_dir;
    std::string analyze_out;
    std::string config_path;
    std::optional<std::string> analyze_dataset;
    std::optional<std::uint64_t> analyze_seed;
    AnalysisFlags analyze_flags;
    analyze->add_option("--snapshots", snap_dir, "Snapshot directory written by `train`")->required();
    analyze->add_option("--out", analyze_out, "Output directory")->required();
    analyze->add_option("--config", config_path, "Pipeline config JSON (analysis section is used)");
    analyze->add_option("--dataset", analyze_dataset, "Dataset for the report's statistics");
    analyze->add_option("--seed", analyze_seed, "Seed for subsampling and t-SNE");
    analyze_flags.add(analyze);

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "Ingest, train, analyse and report end to end");
    std::optional<std::string> pipe_dataset;
    std::optional<std::string> pipe_out;
    std::optional<std::string> pipe_variants;
    std::optional<std::uint64_t> pipe_seed;
    bool timings = false;
    TrainFlags pipe_train_flags;
    AnalysisFlags pipe_analysis_flags;
    pipeline->add_option("--config", config_path, "Pipeline config JSON");
    pipeline->add_option("--dataset", pipe_dataset, "Dataset manifest (.json) or ratings file");
    pipeline->add_option("--out", pipe_out, "Output directory");
    pipeline->add_option("--variants", pipe_variants, "Comma-separated variants (default klmat,zeromat)");
    pipeline->add_option("--seed", pipe_seed, "Master seed");
    pipeline->add_option("--delimiter", delimiter, "Field delimiter for raw ratings files");
    pipeline->add_option("--r-max", r_max, "Rating scale maximum");
    pipeline->add_flag("--timings", timings, "Record wall-clock timings in the report");
    pipe_train_flags.add(pipeline);
    pipe_analysis_flags.add(pipeline);

    // plot
    auto* plot = app.add_subcommand("plot", "Re-render SVG figures from a report");
    std::string report_path;
    std::optional<std::string> plot_out;
    plot->add_option("--report", report_path, "report.json")->required();
    plot->add_option("--out", plot_out, "Output directory (default: the report's directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (ingest->parsed()) {
            ParseOptions opts{delimiter, r_max};
            const auto ds = parse_movielens_file(ratings_path, opts);
            save_dataset(ds, ingest_out);
            const auto s = dataset_stats(ds);
            std::cout << "users " << s.n_users << ", items " << s.n_items << ", ratings " << s.n_ratings
                      << ", duplicates " << s.duplicates << ", r_max " << s.r_max << ", density " << s.density << '\n';
        } else if (train_cmd->parsed()) {
            TrainConfig tc;
            tc.variant = parse_variant(variant);
            tc.seed = train_seed;
            train_flags.apply(tc);
            const auto ds = load_any_dataset(train_dataset, ParseOptions{delimiter, r_max});
            const auto series = train(ds, tc);
            save_series(series, train_out);
            for (const auto& lp : series.loss_trace)
                std::cout << "step " << lp.step << " loss " << lp.loss.total << " (squared " << lp.loss.squared
                          << ", l2 " << lp.loss.l2_penalty << ", kl " << lp.loss.kl_term << ")\n";
        } else if (analyze->parsed()) {
            PipelineConfig cfg = config_path.empty() ? default_pipeline_config({}) : pipeline_config_from_json(read_json_file(config_path));
            if (analyze_seed) {
                cfg.seed = *analyze_seed;
                cfg.analysis.tsne.seed = *analyze_seed;
            }
            analyze_flags.apply(cfg);
            cfg.out_dir = analyze_out;
            cfg.dataset_path = analyze_dataset.value_or("");
            const auto report = run_analysis(snap_dir, cfg);
            print_summary(report, cfg.out_dir);
        } else if (pipeline->parsed()) {
            PipelineConfig cfg = config_path.empty() ? default_pipeline_config() : pipeline_config_from_json(read_json_file(config_path));
            if (pipe_variants) {
                std::vector<Variant> vs;
                std::stringstream ss(*pipe_variants);
                std::string name;
                while (std::getline(ss, name, ',')) vs.push_back(parse_variant(name));
                std::vector<TrainConfig> runs;
                for (const auto v : vs) {
                    auto it = std::find_if(cfg.train.begin(), cfg.train.end(), [&](const TrainConfig& t) { return t.variant == v; });
                    TrainConfig tc = it != cfg.train.end() ? *it : (cfg.train.empty() ? TrainConfig{} : cfg.train.front());
                    tc.variant = v;
                    if (it == cfg.train.end() && cfg.train.empty()) tc.seed = cfg.seed;
                    runs.push_back(tc);
                }
                cfg.train = std::move(runs);
            }
            if (pipe_seed) {
                cfg.seed = *pipe_seed;
                cfg.analysis.tsne.seed = *pipe_seed;
                for (auto& tc : cfg.train) tc.seed = *pipe_seed;
            }
            for (auto& tc : cfg.train) pipe_train_flags.apply(tc);
            pipe_analysis_flags.apply(cfg);
            if (pipe_dataset) cfg.dataset_path = *pipe_dataset;
            if (pipe_out) cfg.out_dir = *pipe_out;
            if (r_max) cfg.r_max = r_max;
            if (delimiter != "::") cfg.delimiter = delimiter;
            if (timings) cfg.record_timings = true;
            const auto report = run_pipeline(cfg);
            print_summary(report, cfg.out_dir);
        } else if (plot->parsed()) {
            const auto n = plot_report(report_path, plot_out ? std::optional<std::filesystem::path>(*plot_out) : std::nullopt);
            std::cout << "wrote " << n << " files\n";
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error (io_error): " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
