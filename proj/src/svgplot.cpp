#include "vortexlab/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vortexlab/error.hpp"

namespace vortexlab::svg {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct Series {
    std::string name;
    std::string color;
    std::vector<std::pair<double, double>> pts;
};

// Shared frame: axes, tick labels, legend, one polyline per series.
std::string draw_chart(const std::vector<Series>& series, const std::string& xlabel,
                       const std::string& ylabel) {
    const double W = 640, H = 420, ml = 70, mr = 20, mt = 30, mb = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (const auto& [x, y] : s.pts) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;
    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto sy = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
        << H - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        out << "<text x=\"" << fmt(sx(xv)) << "\" y=\"" << H - mb + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << fmt(sy(yv) + 4)
            << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
    }
    out << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
        << "\" font-size=\"13\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    out << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
        << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << (mt + H - mb) / 2 << ")\">" << ylabel << "</text>\n";
    double ly = mt + 6;
    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.8\" points=\"";
        for (const auto& [x, y] : s.pts) out << fmt(sx(x)) << "," << fmt(sy(y)) << " ";
        out << "\"/>\n";
        out << "<line x1=\"" << W - mr - 150 << "\" y1=\"" << ly << "\" x2=\"" << W - mr - 120
            << "\" y2=\"" << ly << "\" stroke=\"" << s.color << "\" stroke-width=\"1.8\"/>\n";
        out << "<text x=\"" << W - mr - 114 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">"
            << s.name << "</text>\n";
        ly += 18;
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace

std::string plot_metrics(const std::vector<data::MetricRecord>& records,
                         const std::string& kind) {
    if (records.empty()) throw runtime_error_("plot_metrics: empty metric log");
    std::vector<Series> series;
    if (kind == "align-uniform") {
        Series a{"alignment", "#2ca02c", {}};
        Series u{"uniformity", "#ff7f0e", {}};
        for (const auto& r : records) {
            if (r.split != "val") continue;
            a.pts.push_back({r.epoch, r.alignment});
            u.pts.push_back({r.epoch, r.uniformity});
        }
        if (a.pts.empty()) // fall back to train rows when no validation split
            for (const auto& r : records) {
                if (r.split != "train") continue;
                a.pts.push_back({r.epoch, r.alignment});
                u.pts.push_back({r.epoch, r.uniformity});
            }
        if (a.pts.empty()) throw runtime_error_("plot_metrics: no usable rows");
        series = {a, u};
        return draw_chart(series, "epoch", "metric value");
    }
    if (kind == "loss") {
        Series t{"train", "#1f77b4", {}};
        Series v{"val", "#d62728", {}};
        for (const auto& r : records) {
            if (r.split == "train") t.pts.push_back({r.epoch, r.loss});
            if (r.split == "val") v.pts.push_back({r.epoch, r.loss});
        }
        if (t.pts.empty() && v.pts.empty()) throw runtime_error_("plot_metrics: no usable rows");
        if (!t.pts.empty()) series.push_back(t);
        if (!v.pts.empty()) series.push_back(v);
        return draw_chart(series, "epoch", "InfoNCE loss");
    }
    throw config_error("plot_metrics: unknown kind " + kind);
}

std::string render_frame(const data::PointCloudFrame& frame, const data::VortexCenters& truth,
                         const data::VortexCenters& prediction) {
    if (frame.points.empty()) throw runtime_error_("render_frame: empty frame");
    double ymin = 1e300, ymax = -1e300, zmin = 1e300, zmax = -1e300, vmax = 1e-9;
    for (const auto& p : frame.points) {
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
        zmin = std::min(zmin, p.z);
        zmax = std::max(zmax, p.z);
        vmax = std::max(vmax, std::abs(p.vr));
    }
    const double W = 720, H = 480, m = 40;
    auto sx = [&](double y) { return m + (y - ymin) / (ymax - ymin) * (W - 2 * m); };
    auto sy = [&](double z) { return H - m - (z - zmin) / (zmax - zmin) * (H - 2 * m); };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"#10141c\"/>\n";
    for (const auto& p : frame.points) {
        // warm = toward the sensor, cool = away
        const double t = std::clamp(p.vr / vmax, -1.0, 1.0);
        const int r = static_cast<int>(128 + 127 * t);
        const int b = static_cast<int>(128 - 127 * t);
        out << "<circle class=\"pt\" cx=\"" << fmt(sx(p.y)) << "\" cy=\"" << fmt(sy(p.z))
            << "\" r=\"1.6\" fill=\"rgb(" << r << ",96," << b << ")\"/>\n";
    }
    auto gt_circle = [&](const data::Vec2& c, const char* color) {
        out << "<circle class=\"gt\" cx=\"" << fmt(sx(c.y)) << "\" cy=\"" << fmt(sy(c.z))
            << "\" r=\"9\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    };
    auto pred_cross = [&](const data::Vec2& c, const char* color) {
        const double x = sx(c.y), y = sy(c.z), s = 7;
        out << "<g class=\"pred\" stroke=\"" << color << "\" stroke-width=\"2\">";
        out << "<line x1=\"" << fmt(x - s) << "\" y1=\"" << fmt(y - s) << "\" x2=\"" << fmt(x + s)
            << "\" y2=\"" << fmt(y + s) << "\"/>";
        out << "<line x1=\"" << fmt(x - s) << "\" y1=\"" << fmt(y + s) << "\" x2=\"" << fmt(x + s)
            << "\" y2=\"" << fmt(y - s) << "\"/>";
        out << "</g>\n";
    };
    gt_circle(truth.port, "#2ca02c");   // port: green
    gt_circle(truth.star, "#ff7f0e");   // starboard: orange
    pred_cross(prediction.port, "#2ca02c");
    pred_cross(prediction.star, "#ff7f0e");
    out << "</svg>\n";
    return out.str();
}

} // namespace vortexlab::svg
