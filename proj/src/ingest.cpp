#include "latent_geom/ingest.hpp"

#include "latent_geom/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace lgeom {

namespace {

std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, std::string_view delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + delim.size();
    }
}

template <typename T>
bool parse_number(std::string_view field, T& value) {
    if (field.empty()) return false;
    const char* first = field.data();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, field.data() + field.size(), value);
    return res.ec == std::errc{} && res.ptr == field.data() + field.size();
}

std::uint64_t pair_key(std::uint32_t u, std::uint32_t i) {
    return (static_cast<std::uint64_t>(u) << 32) | i;
}

std::uint32_t intern(std::int64_t raw, std::unordered_map<std::int64_t, std::uint32_t>& index,
                     std::vector<std::int64_t>& ids) {
    const auto [it, inserted] = index.try_emplace(raw, static_cast<std::uint32_t>(ids.size()));
    if (inserted) ids.push_back(raw);
    return it->second;
}

void apply_r_max(RatingDataset& ds, const std::optional<double>& override_value) {
    double observed = 0.0;
    for (const auto& t : ds.triples) observed = std::max(observed, t.rating);
    if (override_value) {
        if (!(*override_value > 0.0) || *override_value < observed) {
            fail(ErrorKind::InvalidArgument, "r_max override " + format_double(*override_value) +
                                                 " is below the maximum observed rating " +
                                                 format_double(observed));
        }
        ds.r_max = *override_value;
    } else {
        ds.r_max = observed;
    }
}

}  // namespace

RatingRecord parse_rating_line(std::string_view line, std::string_view delimiter, std::size_t line_no) {
    if (delimiter.empty()) fail(ErrorKind::InvalidArgument, "empty delimiter");
    const auto fields = split(trim(line), delimiter);
    const std::string text(trim(line));
    if (fields.size() < 3) throw ParseError(line_no, text, "expected at least 3 fields");
    if (fields.size() > 4) throw ParseError(line_no, text, "expected at most 4 fields");

    RatingRecord rec;
    if (!parse_number(fields[0], rec.user_raw) || rec.user_raw < 0)
        throw ParseError(line_no, text, "bad user id");
    if (!parse_number(fields[1], rec.item_raw) || rec.item_raw < 0)
        throw ParseError(line_no, text, "bad item id");
    if (!parse_number(fields[2], rec.rating) || !std::isfinite(rec.rating) || rec.rating <= 0.0)
        throw ParseError(line_no, text, "bad rating");
    if (fields.size() == 4 && !parse_number(fields[3], rec.timestamp))
        throw ParseError(line_no, text, "bad timestamp");
    return rec;
}

RatingDataset parse_movielens(std::istream& source, const ParseOptions& options) {
    RatingDataset ds;
    std::unordered_map<std::uint64_t, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto rec = parse_rating_line(line, options.delimiter, line_no);
        const auto u = intern(rec.user_raw, ds.user_index, ds.user_ids);
        const auto i = intern(rec.item_raw, ds.item_index, ds.item_ids);
        const auto [it, inserted] = seen.try_emplace(pair_key(u, i), ds.triples.size());
        if (inserted) {
            ds.triples.push_back({u, i, rec.rating});
        } else {
            ds.triples[it->second].rating = rec.rating;
            ++ds.duplicates;
        }
    }
    if (source.bad()) fail(ErrorKind::Io, "read failure after line " + std::to_string(line_no));
    if (ds.triples.empty()) fail(ErrorKind::EmptyDataset, "no ratings in source");
    ds.n_users = ds.user_ids.size();
    ds.n_items = ds.item_ids.size();
    apply_r_max(ds, options.r_max);
    return ds;
}

RatingDataset parse_movielens_file(const std::filesystem::path& path, const ParseOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::DatasetNotFound, "cannot open ratings file " + path.string());
    return parse_movielens(in, options);
}

void write_movielens(std::ostream& out, const RatingDataset& ds, std::string_view delimiter) {
    for (const auto& t : ds.triples) {
        out << ds.user_ids[t.user] << delimiter << ds.item_ids[t.item] << delimiter
            << format_double(t.rating) << '\n';
    }
}

DatasetStats dataset_stats(const RatingDataset& ds) {
    DatasetStats s;
    s.n_users = ds.n_users;
    s.n_items = ds.n_items;
    s.n_ratings = ds.triples.size();
    s.duplicates = ds.duplicates;
    s.r_max = ds.r_max;
    const double cells = static_cast<double>(ds.n_users) * static_cast<double>(ds.n_items);
    s.density = cells > 0 ? static_cast<double>(s.n_ratings) / cells : 0.0;
    for (const auto& t : ds.triples) ++s.histogram[t.rating];
    return s;
}

std::vector<std::size_t> subsample_indices(std::size_t n_rows, std::size_t max_n, std::uint64_t seed) {
    if (max_n == 0) fail(ErrorKind::InvalidArgument, "subsample size must be at least 1");
    std::vector<std::size_t> idx(n_rows);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (n_rows <= max_n) return idx;
    // Partial Fisher-Yates: the first max_n slots end up a uniform sample.
    Rng rng(seed);
    for (std::size_t i = 0; i < max_n; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.index(n_rows - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(max_n);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Matrix subsample_rows(const Matrix& points, std::size_t max_n, std::uint64_t seed) {
    const auto idx = subsample_indices(static_cast<std::size_t>(points.rows()), max_n, seed);
    if (idx.size() == static_cast<std::size_t>(points.rows())) return points;
    Matrix out(static_cast<Eigen::Index>(idx.size()), points.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(idx[r]));
    return out;
}

namespace {

std::filesystem::path triples_path_for(const std::filesystem::path& manifest_path) {
    return manifest_path.parent_path() / (manifest_path.stem().string() + ".triples.csv");
}

}  // namespace

void save_dataset(const RatingDataset& ds, const std::filesystem::path& manifest_path) {
    const auto csv_path = triples_path_for(manifest_path);
    if (manifest_path.has_parent_path()) std::filesystem::create_directories(manifest_path.parent_path());

    std::ofstream csv(csv_path);
    if (!csv) fail(ErrorKind::Io, "cannot write " + csv_path.string());
    csv << "user_idx,item_idx,rating\n";
    for (const auto& t : ds.triples) csv << t.user << ',' << t.item << ',' << format_double(t.rating) << '\n';
    if (!csv) fail(ErrorKind::Io, "write failed for " + csv_path.string());

    nlohmann::ordered_json j;
    j["format"] = "latent-geom-dataset";
    j["version"] = 1;
    j["n_users"] = ds.n_users;
    j["n_items"] = ds.n_items;
    j["n_ratings"] = ds.triples.size();
    j["r_max"] = ds.r_max;
    j["duplicates"] = ds.duplicates;
    j["triples_file"] = csv_path.filename().string();
    j["user_ids"] = ds.user_ids;
    j["item_ids"] = ds.item_ids;
    std::ofstream out(manifest_path);
    if (!out) fail(ErrorKind::Io, "cannot write " + manifest_path.string());
    out << j.dump(2) << '\n';
    if (!out) fail(ErrorKind::Io, "write failed for " + manifest_path.string());
}

RatingDataset load_dataset(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) fail(ErrorKind::DatasetNotFound, "cannot open dataset manifest " + manifest_path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, "dataset manifest " + manifest_path.string() + ": " + e.what());
    }

    RatingDataset ds;
    try {
        ds.n_users = j.at("n_users").get<std::size_t>();
        ds.n_items = j.at("n_items").get<std::size_t>();
        ds.r_max = j.at("r_max").get<double>();
        ds.duplicates = j.value("duplicates", std::size_t{0});
        ds.user_ids = j.at("user_ids").get<std::vector<std::int64_t>>();
        ds.item_ids = j.at("item_ids").get<std::vector<std::int64_t>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, "dataset manifest " + manifest_path.string() + ": " + e.what());
    }
    if (ds.user_ids.size() != ds.n_users || ds.item_ids.size() != ds.n_items)
        fail(ErrorKind::Parse, "dataset manifest id maps do not match counts");
    for (std::size_t u = 0; u < ds.user_ids.size(); ++u) ds.user_index.emplace(ds.user_ids[u], static_cast<std::uint32_t>(u));
    for (std::size_t i = 0; i < ds.item_ids.size(); ++i) ds.item_index.emplace(ds.item_ids[i], static_cast<std::uint32_t>(i));

    const auto csv_path = manifest_path.parent_path() / j.value("triples_file", triples_path_for(manifest_path).filename().string());
    std::ifstream csv(csv_path);
    if (!csv) fail(ErrorKind::DatasetNotFound, "cannot open triples file " + csv_path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(csv, line)) {
        ++line_no;
        if (line_no == 1 || trim(line).empty()) continue;
        const auto fields = split(line, ",");
        RatingTriple t;
        if (fields.size() != 3 || !parse_number(fields[0], t.user) || !parse_number(fields[1], t.item) ||
            !parse_number(fields[2], t.rating) || t.user >= ds.n_users || t.item >= ds.n_items || !(t.rating > 0.0) ||
            t.rating > ds.r_max) {
            throw ParseError(line_no, line, "bad triple");
        }
        ds.triples.push_back(t);
    }
    if (ds.triples.empty()) fail(ErrorKind::EmptyDataset, "no ratings in " + csv_path.string());
    return ds;
}

RatingDataset load_any_dataset(const std::filesystem::path& path, const ParseOptions& options) {
    if (!std::filesystem::exists(path)) fail(ErrorKind::DatasetNotFound, "dataset not found: " + path.string());
    if (path.extension() == ".json") return load_dataset(path);
    return parse_movielens_file(path, options);
}

}  // namespace lgeom
