#include "latent_geom/svg.hpp"

#include "latent_geom/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lgeom {

std::string_view to_string(PointSet s) { return s == PointSet::User ? "user" : "item"; }

PointSet parse_point_set(std::string_view text) {
    if (text == "user") return PointSet::User;
    if (text == "item") return PointSet::Item;
    fail(ErrorKind::Parse, "unknown point set '" + std::string(text) + "'");
}

namespace {

constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 24.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 48.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Maps data coordinates into the plotting frame.
struct Frame {
    double width;
    double height;
    double x0, x1, y0, y1;

    double left() const { return kMarginLeft; }
    double right() const { return width - kMarginRight; }
    double top() const { return kMarginTop; }
    double bottom() const { return height - kMarginBottom; }
    double px(double x) const { return left() + (x - x0) / (x1 - x0) * (right() - left()); }
    double py(double y) const { return bottom() - (y - y0) / (y1 - y0) * (bottom() - top()); }
};

void pad_range(double& lo, double& hi) {
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
        return;
    }
    const double pad = 0.04 * (hi - lo);
    lo -= pad;
    hi += pad;
}

void open_document(std::ostringstream& out, const Frame& f, std::string_view title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.width) << "\" height=\"" << num(f.height)
        << "\" viewBox=\"0 0 " << num(f.width) << ' ' << num(f.height) << "\" font-family=\"sans-serif\">\n";
    out << "<title>" << escape(title) << "</title>\n";
    out << "<text class=\"title\" x=\"" << num(f.width / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << escape(title) << "</text>\n";
}

void draw_axes(std::ostringstream& out, const Frame& f, std::string_view x_label, std::string_view y_label) {
    out << "<g class=\"axes\" stroke=\"#333\" stroke-width=\"1\">\n";
    out << "<line x1=\"" << num(f.left()) << "\" y1=\"" << num(f.bottom()) << "\" x2=\"" << num(f.right()) << "\" y2=\""
        << num(f.bottom()) << "\"/>\n";
    out << "<line x1=\"" << num(f.left()) << "\" y1=\"" << num(f.top()) << "\" x2=\"" << num(f.left()) << "\" y2=\""
        << num(f.bottom()) << "\"/>\n";
    constexpr int kTicks = 5;
    for (int t = 0; t < kTicks; ++t) {
        const double fx = f.x0 + (f.x1 - f.x0) * t / (kTicks - 1);
        const double fy = f.y0 + (f.y1 - f.y0) * t / (kTicks - 1);
        out << "<line x1=\"" << num(f.px(fx)) << "\" y1=\"" << num(f.bottom()) << "\" x2=\"" << num(f.px(fx))
            << "\" y2=\"" << num(f.bottom() + 4) << "\"/>\n";
        out << "<line x1=\"" << num(f.left() - 4) << "\" y1=\"" << num(f.py(fy)) << "\" x2=\"" << num(f.left())
            << "\" y2=\"" << num(f.py(fy)) << "\"/>\n";
    }
    out << "</g>\n<g class=\"tick-labels\" font-size=\"10\" fill=\"#333\">\n";
    for (int t = 0; t < kTicks; ++t) {
        const double fx = f.x0 + (f.x1 - f.x0) * t / (kTicks - 1);
        const double fy = f.y0 + (f.y1 - f.y0) * t / (kTicks - 1);
        out << "<text x=\"" << num(f.px(fx)) << "\" y=\"" << num(f.bottom() + 16) << "\" text-anchor=\"middle\">"
            << tick_label(fx) << "</text>\n";
        out << "<text x=\"" << num(f.left() - 6) << "\" y=\"" << num(f.py(fy) + 3) << "\" text-anchor=\"end\">"
            << tick_label(fy) << "</text>\n";
    }
    out << "</g>\n";
    out << "<text class=\"x-label\" x=\"" << num((f.left() + f.right()) / 2) << "\" y=\"" << num(f.height - 10)
        << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(x_label) << "</text>\n";
    out << "<text class=\"y-label\" x=\"14\" y=\"" << num((f.top() + f.bottom()) / 2)
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 " << num((f.top() + f.bottom()) / 2)
        << ")\">" << escape(y_label) << "</text>\n";
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << text;
    if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

// Linear blend between two #rrggbb colours.
std::string blend(const std::string& lo, const std::string& hi, double t) {
    const auto channel = [](const std::string& c, int i) { return std::stoi(c.substr(1 + 2 * i, 2), nullptr, 16); };
    char buf[8];
    int rgb[3];
    for (int i = 0; i < 3; ++i) rgb[i] = static_cast<int>(std::lround(channel(lo, i) + t * (channel(hi, i) - channel(lo, i))));
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

}  // namespace

std::string render_svg_scatter(const Matrix& points, std::span<const PointSet> sets, const ScatterStyle& style) {
    if (points.rows() > 0 && points.cols() != 2) fail(ErrorKind::InvalidArgument, "scatter plot needs n x 2 points");
    if (static_cast<std::size_t>(points.rows()) != sets.size())
        fail(ErrorKind::InvalidArgument, "scatter plot needs one set label per point");

    double x0 = -1.0, x1 = 1.0, y0 = -1.0, y1 = 1.0;
    if (points.rows() > 0) {
        x0 = points.col(0).minCoeff();
        x1 = points.col(0).maxCoeff();
        y0 = points.col(1).minCoeff();
        y1 = points.col(1).maxCoeff();
    }
    pad_range(x0, x1);
    pad_range(y0, y1);
    const Frame f{style.width, style.height, x0, x1, y0, y1};

    std::ostringstream out;
    open_document(out, f, style.title);
    draw_axes(out, f, "t-SNE 1", "t-SNE 2");
    for (std::size_t s = 0; s < 2; ++s) {
        out << "<g class=\"series\" data-set=\"" << escape(style.labels[s]) << "\" fill=\"" << style.colors[s]
            << "\" fill-opacity=\"" << num(style.opacity) << "\">\n";
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            if (static_cast<std::size_t>(sets[static_cast<std::size_t>(i)]) != s) continue;
            out << "<circle class=\"point\" cx=\"" << num(f.px(points(i, 0))) << "\" cy=\"" << num(f.py(points(i, 1)))
                << "\" r=\"" << num(style.radius) << "\"/>\n";
        }
        out << "</g>\n";
    }
    out << "<g class=\"legend\" font-size=\"11\">\n";
    for (std::size_t s = 0; s < 2; ++s) {
        const double y = f.top() + 8 + 16.0 * static_cast<double>(s);
        out << "<g class=\"legend-entry\"><rect class=\"swatch\" x=\"" << num(f.right() - 70) << "\" y=\"" << num(y - 8)
            << "\" width=\"10\" height=\"10\" fill=\"" << style.colors[s] << "\"/><text x=\"" << num(f.right() - 55)
            << "\" y=\"" << num(y + 1) << "\">" << escape(style.labels[s]) << "</text></g>\n";
    }
    out << "</g>\n</svg>\n";
    return out.str();
}

std::string render_svg_histogram(const Histogram& hist, const HistogramStyle& style) {
    if (hist.dims != 1 && hist.dims != 2) fail(ErrorKind::InvalidArgument, "histogram must be 1D or 2D");
    if (hist.edges.size() != hist.dims) fail(ErrorKind::InvalidArgument, "histogram edges do not match dims");
    std::ostringstream out;
    const std::size_t max_count = hist.counts.empty() ? 0 : *std::max_element(hist.counts.begin(), hist.counts.end());

    if (hist.dims == 1) {
        const auto& e = hist.edges[0];
        double x0 = e.front(), x1 = e.back();
        if (!(x1 > x0)) pad_range(x0, x1);
        const Frame f{style.width, style.height, x0, x1, 0.0, std::max<double>(1.0, static_cast<double>(max_count))};
        open_document(out, f, style.title);
        out << "<g class=\"bars\" fill=\"" << style.bar_color << "\" stroke=\"#fff\" stroke-width=\"0.5\">\n";
        for (std::size_t b = 0; b < hist.counts.size(); ++b) {
            const double left = f.px(e[b]);
            const double right = f.px(e[b + 1]);
            const double top = f.py(static_cast<double>(hist.counts[b]));
            out << "<rect class=\"bar\" x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\""
                << num(std::max(right - left, 0.0)) << "\" height=\"" << num(f.bottom() - top) << "\"/>\n";
        }
        out << "</g>\n";
        draw_axes(out, f, style.x_label, style.y_label);
    } else {
        const auto& ex = hist.edges[0];
        const auto& ey = hist.edges[1];
        double x0 = ex.front(), x1 = ex.back(), y0 = ey.front(), y1 = ey.back();
        if (!(x1 > x0)) pad_range(x0, x1);
        if (!(y1 > y0)) pad_range(y0, y1);
        Frame f{style.width, style.height, x0, x1, y0, y1};
        open_document(out, f, style.title);
        const std::size_t nx = ex.size() - 1;
        const std::size_t ny = ey.size() - 1;
        // Leave room on the right for the colour scale.
        f.width -= 60.0;
        out << "<g class=\"heatmap\">\n";
        for (std::size_t bx = 0; bx < nx; ++bx) {
            for (std::size_t by = 0; by < ny; ++by) {
                const double t = max_count > 0 ? static_cast<double>(hist.counts[bx * ny + by]) / static_cast<double>(max_count) : 0.0;
                const double left = f.px(ex[bx]);
                const double right = f.px(ex[bx + 1]);
                const double top = f.py(ey[by + 1]);
                const double bottom = f.py(ey[by]);
                out << "<rect class=\"cell\" x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\""
                    << num(std::max(right - left, 0.0)) << "\" height=\"" << num(std::max(bottom - top, 0.0))
                    << "\" fill=\"" << blend(style.low_color, style.high_color, t) << "\"/>\n";
            }
        }
        out << "</g>\n";
        draw_axes(out, f, style.x_label, style.y_label);
        const double sx = f.width + 16.0;
        out << "<defs><linearGradient id=\"scale\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\"><stop offset=\"0\" stop-color=\""
            << style.low_color << "\"/><stop offset=\"1\" stop-color=\"" << style.high_color
            << "\"/></linearGradient></defs>\n";
        out << "<g class=\"color-scale\" font-size=\"10\"><rect class=\"scale-bar\" x=\"" << num(sx) << "\" y=\""
            << num(f.top()) << "\" width=\"12\" height=\"" << num(f.bottom() - f.top())
            << "\" fill=\"url(#scale)\" stroke=\"#333\"/><text x=\"" << num(sx + 16) << "\" y=\"" << num(f.top() + 8)
            << "\">" << max_count << "</text><text x=\"" << num(sx + 16) << "\" y=\"" << num(f.bottom())
            << "\">0</text></g>\n";
    }
    out << "</svg>\n";
    return out.str();
}

void emit_svg_scatter(const std::filesystem::path& path, const Matrix& points, std::span<const PointSet> sets,
                      const ScatterStyle& style) {
    write_text_file(path, render_svg_scatter(points, sets, style));
}

void emit_svg_histogram(const std::filesystem::path& path, const Histogram& hist, const HistogramStyle& style) {
    write_text_file(path, render_svg_histogram(hist, style));
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& hist) {
    std::ostringstream out;
    if (hist.dims == 1) {
        out << "bin_start,bin_end,count\n";
        const auto& e = hist.edges.at(0);
        for (std::size_t b = 0; b < hist.counts.size(); ++b)
            out << format_double(e[b]) << ',' << format_double(e[b + 1]) << ',' << hist.counts[b] << '\n';
    } else {
        out << "x_start,x_end,y_start,y_end,count\n";
        const auto& ex = hist.edges.at(0);
        const auto& ey = hist.edges.at(1);
        const std::size_t ny = ey.size() - 1;
        for (std::size_t bx = 0; bx + 1 < ex.size(); ++bx)
            for (std::size_t by = 0; by < ny; ++by)
                out << format_double(ex[bx]) << ',' << format_double(ex[bx + 1]) << ',' << format_double(ey[by]) << ','
                    << format_double(ey[by + 1]) << ',' << hist.counts[bx * ny + by] << '\n';
    }
    write_text_file(path, out.str());
}

}  // namespace lgeom
