#pragma once

#include <string>
#include <vector>

namespace basinlab {

/// Minimal self-contained SVG emitter for trace overlays and scatter plots;
/// no plotting toolchain required to look at results. Output bytes are
/// deterministic for identical inputs.
class SvgPlot {
public:
    SvgPlot(std::string title, std::string x_label, std::string y_label);

    void add_line(std::vector<double> xs, std::vector<double> ys, std::string label);
    void add_scatter(std::vector<double> xs, std::vector<double> ys, std::string label);

    std::string render() const;

private:
    struct Series {
        std::vector<double> xs, ys;
        std::string label;
        bool scatter = false;
    };

    std::string title_, x_label_, y_label_;
    std::vector<Series> series_;
};

}  // namespace basinlab
