#pragma once

#include "latent_geom/geometry.hpp"
#include "latent_geom/ingest.hpp"
#include "latent_geom/json_io.hpp"
#include "latent_geom/mf.hpp"
#include "latent_geom/stats.hpp"
#include "latent_geom/svg.hpp"
#include "latent_geom/tsne.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lgeom {

inline constexpr const char* kToolVersion = "0.1.0";

struct AnalysisConfig {
    TsneConfig tsne;
    /// Rows kept per point set before the O(n^2) analyses.
    std::size_t subsample_max = 2000;
    double hz_alpha = 0.05;
    std::size_t radial_bins = 20;
    std::size_t hist_bins = 50;

    friend bool operator==(const AnalysisConfig&, const AnalysisConfig&) = default;
};

struct PipelineConfig {
    std::string dataset_path;
    std::string delimiter = "::";
    std::optional<double> r_max;
    /// One entry per variant to run, in order.
    std::vector<TrainConfig> train;
    AnalysisConfig analysis;
    std::string out_dir = "latent-geom-out";
    std::uint64_t seed = 42;
    /// Snapshots analysed concurrently within a variant.
    std::size_t threads = 1;
    /// Wall-clock timings make the report non-reproducible, so they are opt-in.
    bool record_timings = false;
};

/// Default configuration running the given variants with the default training schedule.
PipelineConfig default_pipeline_config(const std::vector<Variant>& variants = {Variant::KlMat, Variant::ZeroMat});

/// Throws InvalidArgument on an unusable configuration.
void validate(const PipelineConfig& cfg);

/// Config file form. Keys: dataset, delimiter, r_max, variants, train (shared TrainConfig
/// fields), train_overrides (per-variant fields), analysis, out_dir, seed, threads,
/// record_timings. `seed` also seeds training, subsampling and t-SNE unless a nested
/// seed is given explicitly.
PipelineConfig pipeline_config_from_json(const Json& j);
Json to_json(const PipelineConfig& cfg);

struct SetFits {
    FitComparison x;
    FitComparison y;

    friend bool operator==(const SetFits&, const SetFits&) = default;
};

struct RadialResult {
    RadialProfile profile;
    ConeFit cone;

    friend bool operator==(const RadialResult&, const RadialResult&) = default;
};

/// Paths are relative to the run's output directory.
struct SnapshotArtifacts {
    std::string embedding_csv;
    std::string scatter_svg;
    std::string hist_x_user_svg;
    std::string hist_x_user_csv;
    std::string hist_y_user_svg;
    std::string hist_y_user_csv;
    std::string hist2d_user_svg;
    std::string hist2d_user_csv;
    std::string hist2d_item_svg;
    std::string hist2d_item_csv;

    std::vector<std::string> all() const;

    friend bool operator==(const SnapshotArtifacts&, const SnapshotArtifacts&) = default;
};

struct SnapshotReport {
    std::uint64_t step = 0;
    std::size_t n_user = 0;
    std::size_t n_item = 0;
    HzResult hz_raw_user;
    HzResult hz_raw_item;
    HzResult hz_embedded_user;
    HzResult hz_embedded_item;
    /// Balls of the joint embedding, per set.
    BallSummary ball_user;
    BallSummary ball_item;
    /// Balls of the raw k-dimensional factors, per set.
    BallSummary ball_raw_user;
    BallSummary ball_raw_item;
    SetFits marginal_fits_user;
    SetFits marginal_fits_item;
    RadialResult radial_user;
    RadialResult radial_item;
    std::vector<KlPoint> tsne_kl_trace;
    SnapshotArtifacts artifacts;

    friend bool operator==(const SnapshotReport&, const SnapshotReport&) = default;
};

struct VariantError {
    std::string kind;
    std::string message;

    friend bool operator==(const VariantError&, const VariantError&) = default;
};

struct VariantReport {
    std::string variant;
    TrainConfig train;
    std::string snapshot_dir;
    std::vector<LossPoint> loss_trace;
    std::vector<SnapshotReport> snapshots;
    std::optional<VariantError> error;

    friend bool operator==(const VariantReport&, const VariantReport&) = default;
};

struct ReportSummary {
    bool all_hz_rejected = false;
    std::size_t hz_tests = 0;
    std::size_t hz_rejected = 0;
    std::size_t triangular_best_count = 0;
    std::size_t marginal_fit_count = 0;
    std::size_t cone_like_count = 0;
    std::size_t radial_count = 0;
    std::size_t failed_variants = 0;

    friend bool operator==(const ReportSummary&, const ReportSummary&) = default;
};

struct RunReport {
    Json config;
    std::optional<DatasetStats> dataset;
    std::vector<VariantReport> variants;
    ReportSummary summary;
    Json timings;
    std::string version = kToolVersion;

    friend bool operator==(const RunReport& a, const RunReport& b) {
        const auto same_dataset = a.dataset.has_value() == b.dataset.has_value() &&
                                  (!a.dataset || (a.dataset->n_users == b.dataset->n_users &&
                                                  a.dataset->n_items == b.dataset->n_items &&
                                                  a.dataset->n_ratings == b.dataset->n_ratings &&
                                                  a.dataset->duplicates == b.dataset->duplicates &&
                                                  a.dataset->r_max == b.dataset->r_max &&
                                                  a.dataset->density == b.dataset->density &&
                                                  a.dataset->histogram == b.dataset->histogram));
        return a.config == b.config && same_dataset && a.variants == b.variants && a.summary == b.summary &&
               a.timings == b.timings && a.version == b.version;
    }
};

Json to_json(const RunReport& report);
RunReport run_report_from_json(const Json& j);

/// Recompute the summary flags from per-snapshot results.
ReportSummary summarize(const std::vector<VariantReport>& variants);

/// Analysis of one snapshot: subsampling, HZ on raw factors, joint t-SNE, HZ on the
/// embedded sets, balls, marginal fits, radial profiles and figures under `out_dir / rel_dir`.
SnapshotReport analyze_snapshot(const Snapshot& snap, const AnalysisConfig& cfg, std::uint64_t seed,
                                const std::filesystem::path& out_dir, const std::string& rel_dir);

/// Analyse every snapshot of a series; `rel_dir` is the variant's directory relative to out_dir.
std::vector<SnapshotReport> analyze_series(const SnapshotSeries& series, const AnalysisConfig& cfg, std::uint64_t seed,
                                           const std::filesystem::path& out_dir, const std::string& rel_dir,
                                           std::size_t threads = 1);

/// Ingest, train every variant, analyse all snapshots and write `report.json` into out_dir.
RunReport run_pipeline(const PipelineConfig& cfg);

/// Analyse a saved snapshot directory with cfg.analysis and write `report.json` into cfg.out_dir.
/// Dataset statistics are included when cfg.dataset_path names a readable dataset.
RunReport run_analysis(const std::filesystem::path& snapshot_dir, const PipelineConfig& cfg);

/// Re-render all figures referenced by a report; returns the number of files written.
std::size_t plot_report(const std::filesystem::path& report_path, const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Labelled embedding CSV with header `x,y,set`.
void write_embedding_csv(const std::filesystem::path& path, const Matrix& points, std::span<const PointSet> sets);
void read_embedding_csv(const std::filesystem::path& path, Matrix& points, std::vector<PointSet>& sets);

}  // namespace lgeom
