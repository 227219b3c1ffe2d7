#pragma once

#include "latent_geom/geometry.hpp"
#include "latent_geom/ingest.hpp"
#include "latent_geom/mf.hpp"
#include "latent_geom/stats.hpp"
#include "latent_geom/tsne.hpp"

#include <json.hpp>

#include <filesystem>

namespace lgeom {

using Json = nlohmann::json;

void to_json(Json& j, const TrainConfig& c);
/// Missing keys keep the values already in `c`.
void from_json(const Json& j, TrainConfig& c);

void to_json(Json& j, const TsneConfig& c);
void from_json(const Json& j, TsneConfig& c);

void to_json(Json& j, const DatasetStats& s);
void from_json(const Json& j, DatasetStats& s);

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LossBreakdown, squared, l2_penalty, kl_term, total)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LossPoint, step, loss)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(KlPoint, iter, kl)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(HzResult, n, d, beta, statistic, null_mean, null_var, log_mean, log_sd, p_value,
                                   reject, alpha, ridge_applied)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TriangularFit, a, c, b, loglik, ks_stat, aic)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(NormalFit, mean, sd, loglik, ks_stat, aic)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(UniformFit, a, b, loglik, ks_stat, aic)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FitComparison, triangular, normal, uniform, best_by_aic, aic_tie)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BallSummary, centroid, r_max, r_q95, n)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RadialProfile, bin_edges, density, counts, centroid)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ConeFit, slope, intercept, r2_linear, r2_constant, is_cone_like)

Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with two-space indent and a trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace lgeom
