#include "fedfault/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace fedfault {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string fmt2(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
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

}  // namespace

std::vector<curve_series> build_series(const std::vector<history_row>& rows,
                                       const std::string& metric) {
    if (metric != "accuracy" && metric != "auroc" && metric != "train_loss")
        throw std::invalid_argument("unknown plot metric '" + metric + "'");

    // cell -> round -> values over seeds; maps keep the output canonical
    std::map<std::string, std::map<int, std::vector<double>>> grouped;
    for (const history_row& r : rows) {
        double v = 0.0;
        if (metric == "accuracy") {
            v = r.accuracy;
        } else if (metric == "train_loss") {
            v = r.train_loss;
        } else {
            if (!r.auroc) continue;
            v = *r.auroc;
        }
        if (!std::isfinite(v)) continue;
        grouped[r.cell][r.round].push_back(v);
    }

    std::vector<curve_series> out;
    for (const auto& [cell, by_round] : grouped) {
        curve_series s;
        s.label = cell;
        for (const auto& [round, vals] : by_round) {
            double sum = 0.0, mn = vals[0], mx = vals[0];
            for (double v : vals) {
                sum += v;
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
            s.xs.push_back(round);
            s.mean.push_back(sum / static_cast<double>(vals.size()));
            s.lo.push_back(mn);
            s.hi.push_back(mx);
        }
        if (!s.xs.empty()) out.push_back(std::move(s));
    }
    return out;
}

std::string render_curves_svg(const std::vector<curve_series>& series,
                              const std::string& x_label, const std::string& y_label) {
    if (series.empty()) throw std::invalid_argument("nothing to plot");
    for (const curve_series& s : series)
        if (s.xs.empty()) throw std::invalid_argument("series '" + s.label + "' has no points");

    constexpr double width = 960, height = 600;
    constexpr double ml = 70, mr = 24, mt = 24, mb = 56;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double x_min = series[0].xs[0], x_max = x_min;
    double y_min = series[0].lo[0], y_max = series[0].hi[0];
    for (const curve_series& s : series) {
        for (double x : s.xs) {
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
        }
        for (size_t i = 0; i < s.xs.size(); ++i) {
            y_min = std::min(y_min, s.lo[i]);
            y_max = std::max(y_max, s.hi[i]);
        }
    }
    if (x_max == x_min) {
        x_min -= 0.5;
        x_max += 0.5;
    }
    double y_pad = (y_max - y_min) * 0.05;
    if (y_pad == 0.0) y_pad = std::abs(y_max) * 0.05 + 0.05;
    y_min -= y_pad;
    y_max += y_pad;

    auto sx = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * pw; };
    auto sy = [&](double y) { return mt + (1.0 - (y - y_min) / (y_max - y_min)) * ph; };

    std::string o;
    o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt_tick(width) +
         "\" height=\"" + fmt_tick(height) + "\" viewBox=\"0 0 " + fmt_tick(width) + " " +
         fmt_tick(height) + "\">\n";
    o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // axes
    o += "<line x1=\"" + fmt2(ml) + "\" y1=\"" + fmt2(mt + ph) + "\" x2=\"" + fmt2(ml + pw) +
         "\" y2=\"" + fmt2(mt + ph) + "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    o += "<line x1=\"" + fmt2(ml) + "\" y1=\"" + fmt2(mt) + "\" x2=\"" + fmt2(ml) + "\" y2=\"" +
         fmt2(mt + ph) + "\" stroke=\"black\" stroke-width=\"1\"/>\n";

    constexpr int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        double fx = x_min + (x_max - x_min) * i / ticks;
        double px = sx(fx);
        o += "<line x1=\"" + fmt2(px) + "\" y1=\"" + fmt2(mt + ph) + "\" x2=\"" + fmt2(px) +
             "\" y2=\"" + fmt2(mt + ph + 5) + "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        o += "<text x=\"" + fmt2(px) + "\" y=\"" + fmt2(mt + ph + 20) +
             "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" +
             fmt_tick(fx) + "</text>\n";

        double fy = y_min + (y_max - y_min) * i / ticks;
        double py = sy(fy);
        o += "<line x1=\"" + fmt2(ml - 5) + "\" y1=\"" + fmt2(py) + "\" x2=\"" + fmt2(ml) +
             "\" y2=\"" + fmt2(py) + "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        o += "<text x=\"" + fmt2(ml - 8) + "\" y=\"" + fmt2(py + 4) +
             "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">" + fmt_tick(fy) +
             "</text>\n";
    }
    o += "<text x=\"" + fmt2(ml + pw / 2) + "\" y=\"" + fmt2(height - 12) +
         "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">" +
         escape_xml(x_label) + "</text>\n";
    o += "<text x=\"18\" y=\"" + fmt2(mt + ph / 2) +
         "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         fmt2(mt + ph / 2) + ")\">" + escape_xml(y_label) + "</text>\n";

    // bands first so every line draws on top
    for (size_t si = 0; si < series.size(); ++si) {
        const curve_series& s = series[si];
        bool has_width = false;
        for (size_t i = 0; i < s.xs.size(); ++i)
            if (s.hi[i] > s.lo[i]) has_width = true;
        if (!has_width) continue;
        std::string pts;
        for (size_t i = 0; i < s.xs.size(); ++i)
            pts += fmt2(sx(s.xs[i])) + "," + fmt2(sy(s.hi[i])) + " ";
        for (size_t i = s.xs.size(); i-- > 0;)
            pts += fmt2(sx(s.xs[i])) + "," + fmt2(sy(s.lo[i])) + " ";
        pts.pop_back();
        o += "<polygon points=\"" + pts + "\" fill=\"" + kPalette[si % kPaletteSize] +
             "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }

    for (size_t si = 0; si < series.size(); ++si) {
        const curve_series& s = series[si];
        std::string pts;
        for (size_t i = 0; i < s.xs.size(); ++i) {
            if (i) pts += " ";
            pts += fmt2(sx(s.xs[i])) + "," + fmt2(sy(s.mean[i]));
        }
        o += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" +
             kPalette[si % kPaletteSize] + "\" stroke-width=\"1.8\"/>\n";
    }

    // legend, top-left inside the plot area
    for (size_t si = 0; si < series.size(); ++si) {
        double ly = mt + 16 + 18 * static_cast<double>(si);
        o += "<line x1=\"" + fmt2(ml + 10) + "\" y1=\"" + fmt2(ly - 4) + "\" x2=\"" +
             fmt2(ml + 34) + "\" y2=\"" + fmt2(ly - 4) + "\" stroke=\"" +
             kPalette[si % kPaletteSize] + "\" stroke-width=\"2\"/>\n";
        o += "<text x=\"" + fmt2(ml + 40) + "\" y=\"" + fmt2(ly) +
             "\" font-family=\"sans-serif\" font-size=\"12\">" + escape_xml(series[si].label) +
             "</text>\n";
    }

    o += "</svg>\n";
    return o;
}

}  // namespace fedfault
