#include "latent_geom/json_io.hpp"

#include "latent_geom/error.hpp"

#include <fstream>

namespace lgeom {

void to_json(Json& j, const TrainConfig& c) {
    j = Json{{"variant", to_string(c.variant)},
             {"k", c.k},
             {"lr", c.lr},
             {"l2", c.l2},
             {"kl_weight", c.kl_weight},
             {"kl_sqrt", c.kl_sqrt},
             {"zipf_levels", c.zipf_levels},
             {"pred_mode", to_string(c.pred_mode)},
             {"total_steps", c.total_steps},
             {"snapshot_steps", c.snapshot_steps},
             {"seed", c.seed},
             {"clip_eps", c.clip_eps}};
}

void from_json(const Json& j, TrainConfig& c) {
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("pred_mode")) c.pred_mode = parse_pred_mode(j.at("pred_mode").get<std::string>());
    c.k = j.value("k", c.k);
    c.lr = j.value("lr", c.lr);
    c.l2 = j.value("l2", c.l2);
    c.kl_weight = j.value("kl_weight", c.kl_weight);
    c.kl_sqrt = j.value("kl_sqrt", c.kl_sqrt);
    c.zipf_levels = j.value("zipf_levels", c.zipf_levels);
    c.total_steps = j.value("total_steps", c.total_steps);
    c.snapshot_steps = j.value("snapshot_steps", c.snapshot_steps);
    c.seed = j.value("seed", c.seed);
    c.clip_eps = j.value("clip_eps", c.clip_eps);
}

void to_json(Json& j, const TsneConfig& c) {
    j = Json{{"perplexity", c.perplexity},
             {"n_iter", c.n_iter},
             {"early_exaggeration", c.early_exaggeration},
             {"exaggeration_iters", c.exaggeration_iters},
             {"learning_rate", c.learning_rate},
             {"momentum_initial", c.momentum_initial},
             {"momentum_final", c.momentum_final},
             {"momentum_switch_iter", c.momentum_switch_iter},
             {"seed", c.seed},
             {"perplexity_tol", c.perplexity_tol},
             {"max_bisection_iters", c.max_bisection_iters}};
}

void from_json(const Json& j, TsneConfig& c) {
    c.perplexity = j.value("perplexity", c.perplexity);
    c.n_iter = j.value("n_iter", c.n_iter);
    c.early_exaggeration = j.value("early_exaggeration", c.early_exaggeration);
    c.exaggeration_iters = j.value("exaggeration_iters", c.exaggeration_iters);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum_initial = j.value("momentum_initial", c.momentum_initial);
    c.momentum_final = j.value("momentum_final", c.momentum_final);
    c.momentum_switch_iter = j.value("momentum_switch_iter", c.momentum_switch_iter);
    c.seed = j.value("seed", c.seed);
    c.perplexity_tol = j.value("perplexity_tol", c.perplexity_tol);
    c.max_bisection_iters = j.value("max_bisection_iters", c.max_bisection_iters);
}

void to_json(Json& j, const DatasetStats& s) {
    Json hist = Json::array();
    for (const auto& [value, count] : s.histogram) hist.push_back({{"rating", value}, {"count", count}});
    j = Json{{"n_users", s.n_users},   {"n_items", s.n_items}, {"n_ratings", s.n_ratings},
             {"duplicates", s.duplicates}, {"r_max", s.r_max},   {"density", s.density},
             {"rating_histogram", hist}};
}

void from_json(const Json& j, DatasetStats& s) {
    s.n_users = j.at("n_users").get<std::size_t>();
    s.n_items = j.at("n_items").get<std::size_t>();
    s.n_ratings = j.at("n_ratings").get<std::size_t>();
    s.duplicates = j.at("duplicates").get<std::size_t>();
    s.r_max = j.at("r_max").get<double>();
    s.density = j.at("density").get<double>();
    s.histogram.clear();
    for (const auto& e : j.at("rating_histogram")) s.histogram[e.at("rating").get<double>()] = e.at("count").get<std::size_t>();
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace lgeom
