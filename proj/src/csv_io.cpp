#include "latent_geom/csv_io.hpp"

#include "latent_geom/error.hpp"

#include <charconv>
#include <fstream>
#include <string>
#include <vector>

namespace lgeom {

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    std::string line;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        line.clear();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c > 0) line += ',';
            line += format_double(m(r, c));
        }
        line += '\n';
        out << line;
    }
    if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::vector<double> values;
    Eigen::Index cols = -1;
    Eigen::Index rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Eigen::Index count = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end) {
            double v = 0.0;
            const auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc{}) throw ParseError(static_cast<std::size_t>(rows + 1), line, "bad number in " + path.string());
            values.push_back(v);
            ++count;
            p = res.ptr;
            if (p < end) {
                if (*p != ',') throw ParseError(static_cast<std::size_t>(rows + 1), line, "expected ',' in " + path.string());
                ++p;
            }
        }
        if (cols < 0) cols = count;
        if (count != cols) throw ParseError(static_cast<std::size_t>(rows + 1), line, "ragged row in " + path.string());
        ++rows;
    }
    Matrix m(rows, std::max<Eigen::Index>(cols, 0));
    std::copy(values.begin(), values.end(), m.data());
    return m;
}

}  // namespace lgeom
