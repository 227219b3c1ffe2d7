#pragma once

#include "latent_geom/common.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lgeom {

/// One line of a MovieLens-style ratings file.
struct RatingRecord {
    std::int64_t user_raw = 0;
    std::int64_t item_raw = 0;
    double rating = 0.0;
    std::int64_t timestamp = 0;
};

struct RatingTriple {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    double rating = 0.0;

    friend bool operator==(const RatingTriple&, const RatingTriple&) = default;
};

/// Observed ratings with dense user/item indices.
///
/// Dense indices follow first appearance in the source. `user_ids[u]` is the raw id
/// of dense user `u` (likewise for items), so the raw-to-dense maps are bijections.
struct RatingDataset {
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    std::vector<RatingTriple> triples;
    double r_max = 0.0;
    std::vector<std::int64_t> user_ids;
    std::vector<std::int64_t> item_ids;
    std::unordered_map<std::int64_t, std::uint32_t> user_index;
    std::unordered_map<std::int64_t, std::uint32_t> item_index;
    /// Repeated (user, item) pairs seen while parsing; the last rating was kept.
    std::size_t duplicates = 0;

    bool empty() const noexcept { return triples.empty(); }

    friend bool operator==(const RatingDataset& a, const RatingDataset& b) {
        return a.n_users == b.n_users && a.n_items == b.n_items && a.triples == b.triples &&
               a.r_max == b.r_max && a.user_ids == b.user_ids && a.item_ids == b.item_ids;
    }
};

struct ParseOptions {
    std::string delimiter = "::";
    /// Rating scale override; must be >= every observed rating.
    std::optional<double> r_max;
};

RatingDataset parse_movielens(std::istream& source, const ParseOptions& options = {});
RatingDataset parse_movielens_file(const std::filesystem::path& path, const ParseOptions& options = {});

/// Parse a single line into a record. Throws ParseError tagged with `line_no`.
RatingRecord parse_rating_line(std::string_view line, std::string_view delimiter, std::size_t line_no);

/// Write the dataset back out in the delimited format, raw ids, one triple per line.
void write_movielens(std::ostream& out, const RatingDataset& ds, std::string_view delimiter = "::");

struct DatasetStats {
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    std::size_t n_ratings = 0;
    std::size_t duplicates = 0;
    double r_max = 0.0;
    double density = 0.0;
    /// Distinct rating value -> count.
    std::map<double, std::size_t> histogram;
};

DatasetStats dataset_stats(const RatingDataset& ds);

/// Up to `max_n` rows drawn without replacement, original order preserved.
/// Rows are returned unchanged when there are at most `max_n`.
Matrix subsample_rows(const Matrix& points, std::size_t max_n, std::uint64_t seed);

/// Indices chosen by subsample_rows, ascending.
std::vector<std::size_t> subsample_indices(std::size_t n_rows, std::size_t max_n, std::uint64_t seed);

/// Dataset manifest (JSON) plus a sibling `<stem>.triples.csv` holding `user_idx,item_idx,rating`.
void save_dataset(const RatingDataset& ds, const std::filesystem::path& manifest_path);
RatingDataset load_dataset(const std::filesystem::path& manifest_path);

/// Load either a saved manifest (`.json`) or a raw delimited ratings file.
RatingDataset load_any_dataset(const std::filesystem::path& path, const ParseOptions& options = {});

}  // namespace lgeom
