#include "dudospect/viz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dudospect/errors.hpp"

namespace dudospect {

namespace {
const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
}

void write_svg_line_plot(const std::string& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series) {
    if (series.empty()) throw ValidationError("plot needs at least one series");
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw ShapeError("plot series x/y length mismatch");
        for (size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= ymin) ymax = ymin + 1.0;
    const double w = 640, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << w / 2 << "' y='22' text-anchor='middle' font-size='15'>" << title
        << "</text>\n";
    svg << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
        << "' stroke='black'/>\n";
    svg << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
        << "' stroke='black'/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        svg << "<text x='" << px(xv) << "' y='" << h - mb + 18
            << "' text-anchor='middle' font-size='11'>" << xv << "</text>\n";
        svg << "<text x='" << ml - 8 << "' y='" << py(yv) + 4
            << "' text-anchor='end' font-size='11'>" << yv << "</text>\n";
    }
    svg << "<text x='" << (ml + w - mr) / 2 << "' y='" << h - 12
        << "' text-anchor='middle' font-size='12'>" << x_label << "</text>\n";
    svg << "<text x='16' y='" << (mt + h - mb) / 2
        << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 " << (mt + h - mb) / 2
        << ")'>" << y_label << "</text>\n";
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kSeriesColors[si % 6];
        svg << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
        for (size_t i = 0; i < s.x.size(); ++i) svg << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        svg << "'/>\n";
        for (size_t i = 0; i < s.x.size(); ++i)
            svg << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i]) << "' r='3' fill='"
                << color << "'/>\n";
        svg << "<text x='" << w - mr - 10 << "' y='" << mt + 16 * static_cast<double>(si)
            << "' text-anchor='end' font-size='11' fill='" << color << "'>" << s.label
            << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write plot '" + path + "'");
    out << svg.str();
}

void write_pgm_grid(const std::string& path, const std::vector<GridPanel>& panels) {
    if (panels.empty()) throw ValidationError("image grid needs at least one panel");
    const int ph = panels[0].height, pw = panels[0].width;
    for (const auto& p : panels)
        if (p.width != pw || p.height != ph ||
            static_cast<int>(p.pixels.size()) != pw * ph)
            throw ShapeError("image grid panels must share dimensions");
    double lo = 1e300, hi = -1e300;
    for (const auto& p : panels)
        for (double v : p.pixels) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi <= lo) hi = lo + 1.0;
    const int gap = 2;
    const int width = static_cast<int>(panels.size()) * (pw + gap) - gap;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image '" + path + "'");
    out << "P5\n" << width << " " << ph << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(width));
    for (int y = 0; y < ph; ++y) {
        size_t xo = 0;
        for (size_t pi = 0; pi < panels.size(); ++pi) {
            const auto& p = panels[pi];
            for (int x = 0; x < pw; ++x)
                row[xo + static_cast<size_t>(x)] = static_cast<unsigned char>(
                    255.0 * (p.pixels[static_cast<size_t>(y) * pw + x] - lo) / (hi - lo));
            xo += static_cast<size_t>(pw);
            if (pi + 1 < panels.size()) {
                for (int gpx = 0; gpx < gap; ++gpx) row[xo + static_cast<size_t>(gpx)] = 255;
                xo += gap;
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), width);
    }
}

GridPanel projection_panel(const ProjectionTensor& p, int angle, const std::string& label) {
    GridPanel panel;
    panel.label = label;
    panel.width = p.bins_u;
    panel.height = p.bins_v;
    panel.pixels.resize(static_cast<size_t>(p.bins_u) * p.bins_v);
    for (int iv = 0; iv < p.bins_v; ++iv)
        for (int iu = 0; iu < p.bins_u; ++iu)
            panel.pixels[static_cast<size_t>(iv) * p.bins_u + iu] = p.at(iu, iv, angle);
    return panel;
}

GridPanel volume_mid_slice_panel(const VolumeTensor& v, const std::string& label) {
    GridPanel panel;
    panel.label = label;
    panel.width = v.grid.nx;
    panel.height = v.grid.ny;
    panel.pixels.resize(static_cast<size_t>(v.grid.nx) * v.grid.ny);
    const int iz = v.grid.nz / 2;
    for (int iy = 0; iy < v.grid.ny; ++iy)
        for (int ix = 0; ix < v.grid.nx; ++ix)
            panel.pixels[static_cast<size_t>(iy) * v.grid.nx + ix] = v.at(ix, iy, iz);
    return panel;
}

}  // namespace dudospect
