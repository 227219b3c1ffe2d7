#pragma once

#include "latent_geom/common.hpp"
#include "latent_geom/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace lgeom {

enum class PointSet : std::uint8_t { User = 0, Item = 1 };

std::string_view to_string(PointSet s);
PointSet parse_point_set(std::string_view text);

struct ScatterStyle {
    std::string title = "t-SNE embedding";
    double width = 640.0;
    double height = 640.0;
    double radius = 1.6;
    double opacity = 0.6;
    /// Indexed by PointSet.
    std::array<std::string, 2> colors{"#1f5fbf", "#2ca02c"};
    std::array<std::string, 2> labels{"user", "item"};
};

struct HistogramStyle {
    std::string title = "histogram";
    std::string x_label = "x";
    std::string y_label = "count";
    double width = 640.0;
    double height = 480.0;
    std::string bar_color = "#1f5fbf";
    /// Heatmap colour ramp endpoints for 2D histograms.
    std::string low_color = "#f7fbff";
    std::string high_color = "#08306b";
};

/// Standalone SVG document. Points are `<circle class="point">`, legend rows carry
/// `class="legend-entry"`; every label in the style gets a legend row.
std::string render_svg_scatter(const Matrix& points, std::span<const PointSet> sets, const ScatterStyle& style = {});

/// 1D: one `<rect class="bar">` per bin. 2D: one `<rect class="cell">` per bin pair plus a colour scale.
std::string render_svg_histogram(const Histogram& hist, const HistogramStyle& style = {});

void emit_svg_scatter(const std::filesystem::path& path, const Matrix& points, std::span<const PointSet> sets,
                      const ScatterStyle& style = {});
void emit_svg_histogram(const std::filesystem::path& path, const Histogram& hist, const HistogramStyle& style = {});

/// `bin_start,bin_end,count` for 1D; `x_start,x_end,y_start,y_end,count` for 2D.
void write_histogram_csv(const std::filesystem::path& path, const Histogram& hist);

}  // namespace lgeom
