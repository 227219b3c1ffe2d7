#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <unistd.h>

namespace lgeom::testing {

void write_synthetic_movielens(const std::filesystem::path& path, const SyntheticCorpus& c) {
    if (c.n_ratings < c.n_users * c.min_per_user) throw std::invalid_argument("too few ratings for the per-user minimum");
    Rng rng(c.seed);
    constexpr std::size_t kRank = 5;

    // Raw item ids are a sparse subset of 1..(n_items * 16 / 15), as in MovieLens.
    const std::size_t id_space = c.n_items * 16 / 15 + 1;
    std::vector<std::int64_t> id_pool(id_space);
    std::iota(id_pool.begin(), id_pool.end(), 1);
    for (std::size_t i = 0; i < c.n_items; ++i) std::swap(id_pool[i], id_pool[i + rng.index(id_space - i)]);
    std::vector<std::int64_t> item_ids(id_pool.begin(), id_pool.begin() + static_cast<std::ptrdiff_t>(c.n_items));
    std::sort(item_ids.begin(), item_ids.end());

    // Popularity: Zipf-like over a random permutation of items.
    std::vector<std::size_t> order(c.n_items);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = c.n_items; i-- > 1;) std::swap(order[i], order[rng.index(i + 1)]);
    std::vector<double> pop(c.n_items);
    for (std::size_t r = 0; r < c.n_items; ++r) pop[order[r]] = 1.0 / std::pow(static_cast<double>(r) + 20.0, 1.1);
    std::vector<double> cum(c.n_items);
    std::partial_sum(pop.begin(), pop.end(), cum.begin());

    // User activity: minimum plus a lognormal share of the remainder.
    std::vector<double> w(c.n_users);
    double w_sum = 0.0;
    for (auto& x : w) w_sum += (x = std::exp(1.1 * rng.normal()));
    const std::size_t cap = std::min<std::size_t>(c.n_items * 2 / 5, 1500);
    if (cap * c.n_users < c.n_ratings) throw std::invalid_argument("too many ratings for the per-user cap");
    std::vector<std::size_t> per_user(c.n_users);
    std::size_t assigned = 0;
    const double extra = static_cast<double>(c.n_ratings - c.n_users * c.min_per_user);
    for (std::size_t u = 0; u < c.n_users; ++u) {
        per_user[u] = std::min(cap, c.min_per_user + static_cast<std::size_t>(extra * w[u] / w_sum));
        assigned += per_user[u];
    }
    while (assigned < c.n_ratings) {
        const auto u = rng.index(c.n_users);
        if (per_user[u] < cap) {
            ++per_user[u];
            ++assigned;
        }
    }

    // Latent rating model.
    std::vector<double> ua(c.n_users * kRank), ib(c.n_items * kRank), ubias(c.n_users), ibias(c.n_items);
    for (auto& x : ua) x = 0.45 * rng.normal();
    for (auto& x : ib) x = 0.45 * rng.normal();
    for (auto& x : ubias) x = 0.35 * rng.normal();
    for (std::size_t i = 0; i < c.n_items; ++i) ibias[i] = 0.45 * rng.normal() + 0.08 * std::log(pop[i] / pop[order[0]] + 1e-9) / 4.0;

    // Every item is rated at least once by a random user.
    std::vector<std::unordered_set<std::size_t>> rated(c.n_users);
    for (std::size_t i = 0; i < c.n_items; ++i) rated[rng.index(c.n_users)].insert(i);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    std::int64_t ts = 978'300'760;
    for (std::size_t u = 0; u < c.n_users; ++u) {
        auto& items = rated[u];
        while (items.size() < per_user[u]) {
            const double x = rng.uniform() * cum.back();
            const auto i = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), x) - cum.begin());
            items.insert(std::min(i, c.n_items - 1));
        }
        std::vector<std::size_t> sorted(items.begin(), items.end());
        std::sort(sorted.begin(), sorted.end());
        for (const auto i : sorted) {
            double score = 3.58 + ubias[u] + ibias[i] + 0.7 * rng.normal();
            for (std::size_t f = 0; f < kRank; ++f) score += ua[u * kRank + f] * ib[i * kRank + f];
            const int rating = static_cast<int>(std::clamp(std::lround(score), 1L, 5L));
            out << (u + 1) << "::" << item_ids[i] << "::" << rating << "::" << ts++ << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::filesystem::path movielens_1m_path() {
    const char* env = std::getenv("LATENT_GEOM_ML1M");
    if (env == nullptr || *env == '\0') return {};
    std::filesystem::path p(env);
    return std::filesystem::is_regular_file(p) ? p : std::filesystem::path{};
}

std::filesystem::path fresh_temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("lgeom-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + needle.size())) ++n;
    return n;
}

}  // namespace lgeom::testing
