#pragma once

#include <string>
#include <vector>

#include "dudospect/tensors.hpp"

namespace dudospect {

struct PlotSeries {
    std::string label;
    std::vector<double> x, y;
};

// Minimal SVG line plot (log-free, linear axes, one polyline per series).
void write_svg_line_plot(const std::string& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series);

// 8-bit PGM image grid: each panel is a 2D field, panels are laid out in
// a row with shared normalization.
struct GridPanel {
    std::string label;  // informational only (PGM has no text)
    std::vector<double> pixels;
    int width = 0, height = 0;
};

void write_pgm_grid(const std::string& path, const std::vector<GridPanel>& panels);

// Convenience extractors for report grids.
GridPanel projection_panel(const ProjectionTensor& p, int angle, const std::string& label);
GridPanel volume_mid_slice_panel(const VolumeTensor& v, const std::string& label);

}  // namespace dudospect
