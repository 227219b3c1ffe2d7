#pragma once

#include "latent_geom/common.hpp"
#include "latent_geom/ingest.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lgeom {

enum class Variant { Base, KlMat, ZeroMat };
enum class PredMode { Dot, Cosine };

std::string to_string(Variant v);
std::string to_string(PredMode m);
Variant parse_variant(std::string_view text);
PredMode parse_pred_mode(std::string_view text);

/// User factors as rows of `u`, item factors as rows of `v`.
struct FactorModel {
    Matrix u;
    Matrix v;
    std::size_t k = 0;
    std::uint64_t step = 0;

    friend bool operator==(const FactorModel& a, const FactorModel& b) {
        return a.k == b.k && a.step == b.step && a.u == b.u && a.v == b.v;
    }
};

struct TrainConfig {
    Variant variant = Variant::Base;
    std::size_t k = 8;
    double lr = 0.01;
    double l2 = 0.01;
    double kl_weight = 0.1;
    bool kl_sqrt = false;
    /// Zipf levels for ZeroMat; 0 means round(r_max) of the dataset.
    std::size_t zipf_levels = 0;
    PredMode pred_mode = PredMode::Dot;
    std::uint64_t total_steps = 500'000;
    std::vector<std::uint64_t> snapshot_steps{0, 10'000, 50'000, 100'000, 500'000};
    std::uint64_t seed = 42;
    double clip_eps = 1e-6;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Throws InvalidArgument when the configuration breaks an invariant.
void validate(const TrainConfig& cfg);

struct LossBreakdown {
    double squared = 0.0;
    double l2_penalty = 0.0;
    double kl_term = 0.0;
    double total = 0.0;

    friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// One SGD sample: user, item and a target on the unit scale.
struct Sample {
    std::size_t user = 0;
    std::size_t item = 0;
    double target = 0.0;
};

struct Snapshot {
    std::uint64_t step = 0;
    FactorModel model;

    friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct LossPoint {
    std::uint64_t step = 0;
    LossBreakdown loss;

    friend bool operator==(const LossPoint&, const LossPoint&) = default;
};

struct SnapshotSeries {
    TrainConfig config;
    std::vector<Snapshot> snapshots;
    std::vector<LossPoint> loss_trace;
    std::size_t n_users = 0;
    std::size_t n_items = 0;

    friend bool operator==(const SnapshotSeries&, const SnapshotSeries&) = default;
};

/// Entries i.i.d. uniform on (0, 1/sqrt(k)); U is filled before V.
FactorModel init_factors(std::size_t n_users, std::size_t n_items, std::size_t k, std::uint64_t seed);

double predict(const FactorModel& model, std::size_t user, std::size_t item, PredMode mode);

/// Objective over all observed ratings, targets R/r_max.
LossBreakdown loss(const FactorModel& model, const RatingDataset& ds, const TrainConfig& cfg);

/// Objective over an explicit sample set. L2 covers the full factor matrices.
LossBreakdown loss_on(const FactorModel& model, std::span<const Sample> samples, const TrainConfig& cfg);

/// Bernoulli KL divergence between success probabilities p and q, with 0 ln 0 = 0.
double bernoulli_kl(double p, double q);

/// Per-sample objective that one SGD step descends:
///   (t - pred)^2 + l2 (|U_i|^2 + |V_j|^2) [+ kl_weight * KL(t || clip(pred))]
double sample_objective(const FactorModel& model, const Sample& s, const TrainConfig& cfg);

struct SampleGradient {
    RowVector user;
    RowVector item;
};

/// Analytic gradient of sample_objective with respect to U_i and V_j.
SampleGradient sample_gradient(const FactorModel& model, const Sample& s, const TrainConfig& cfg);

/// In-place SGD update using pre-update values of both rows; increments `step`.
void sgd_step(FactorModel& model, const Sample& s, const TrainConfig& cfg);

/// m / L with P(m) proportional to m, m in 1..L.
double zipf_target(std::size_t levels, Rng& rng);

/// Effective ZeroMat levels for a dataset (cfg value or round(r_max)).
std::size_t effective_zipf_levels(const TrainConfig& cfg, const RatingDataset& ds);

SnapshotSeries train(const RatingDataset& ds, const TrainConfig& cfg);

/// Writes `manifest.json` and `U_<step>.csv` / `V_<step>.csv` into `dir`.
void save_series(const SnapshotSeries& series, const std::filesystem::path& dir);
SnapshotSeries load_series(const std::filesystem::path& dir);

}  // namespace lgeom
