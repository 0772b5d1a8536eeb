#include "basinlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace basinlab {

namespace {

constexpr int kWidth = 760;
constexpr int kHeight = 480;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 150;  // legend space
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPlot::add_line(std::vector<double> xs, std::vector<double> ys, std::string label) {
    series_.push_back({std::move(xs), std::move(ys), std::move(label), false});
}

void SvgPlot::add_scatter(std::vector<double> xs, std::vector<double> ys, std::string label) {
    series_.push_back({std::move(xs), std::move(ys), std::move(label), true});
}

std::string SvgPlot::render() const {
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const auto& s : series_) {
        for (double v : s.xs) {
            x_lo = std::min(x_lo, v);
            x_hi = std::max(x_hi, v);
        }
        for (double v : s.ys) {
            y_lo = std::min(y_lo, v);
            y_hi = std::max(y_hi, v);
        }
    }
    if (!(x_hi > x_lo)) {
        x_lo -= 1.0;
        x_hi += 1.0;
    }
    if (!(y_hi > y_lo)) {
        y_lo -= 1.0;
        y_hi += 1.0;
    }
    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    auto px = [&](double x) { return kMarginLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
    auto py = [&](double y) { return kMarginTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" "
           "font-family=\"sans-serif\">"
        << title_ << "</text>\n";

    // axes and ticks
    out << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = x_lo + (x_hi - x_lo) * i / 5.0;
        const double fy = y_lo + (y_hi - y_lo) * i / 5.0;
        out << "<text x=\"" << fmt(px(fx)) << "\" y=\"" << (kHeight - kMarginBottom + 18)
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
            << fmt_tick(fx) << "</text>\n";
        out << "<text x=\"" << (kMarginLeft - 8) << "\" y=\"" << fmt(py(fy) + 4)
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
            << fmt_tick(fy) << "</text>\n";
        out << "<line x1=\"" << fmt(px(fx)) << "\" y1=\"" << kMarginTop << "\" x2=\"" << fmt(px(fx))
            << "\" y2=\"" << (kHeight - kMarginBottom)
            << "\" stroke=\"#eee\" stroke-width=\"1\"/>\n";
        out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << fmt(py(fy)) << "\" x2=\""
            << (kWidth - kMarginRight) << "\" y2=\"" << fmt(py(fy))
            << "\" stroke=\"#eee\" stroke-width=\"1\"/>\n";
    }
    out << "<text x=\"" << (kMarginLeft + plot_w / 2) << "\" y=\"" << (kHeight - 12)
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label_
        << "</text>\n";
    out << "<text x=\"18\" y=\"" << (kMarginTop + plot_h / 2)
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 18 "
        << (kMarginTop + plot_h / 2) << ")\">" << y_label_ << "</text>\n";

    for (std::size_t si = 0; si < series_.size(); ++si) {
        const auto& s = series_[si];
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        if (s.scatter) {
            for (std::size_t i = 0; i < s.xs.size(); ++i)
                out << "<circle cx=\"" << fmt(px(s.xs[i])) << "\" cy=\"" << fmt(py(s.ys[i]))
                    << "\" r=\"3.5\" fill=\"" << color << "\" fill-opacity=\"0.75\"/>\n";
        } else {
            out << "<polyline fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"1.6\" points=\"";
            for (std::size_t i = 0; i < s.xs.size(); ++i) {
                if (i) out << ' ';
                out << fmt(px(s.xs[i])) << ',' << fmt(py(s.ys[i]));
            }
            out << "\"/>\n";
        }
        const double ly = kMarginTop + 16.0 * (static_cast<double>(si) + 1.0);
        out << "<rect x=\"" << (kWidth - kMarginRight + 10) << "\" y=\"" << fmt(ly - 9)
            << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
        out << "<text x=\"" << (kWidth - kMarginRight + 27) << "\" y=\"" << fmt(ly + 2)
            << "\" font-size=\"11\" font-family=\"sans-serif\">" << s.label << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace basinlab
