#pragma once

#include <string>
#include <vector>

#include "fedfault/experiment.hpp"

namespace fedfault {

// One plotted scenario: the per-round mean over seeds plus the min-max
// envelope. xs, mean, lo, hi are aligned.
struct curve_series {
    std::string label;
    std::vector<double> xs;
    std::vector<double> mean;
    std::vector<double> lo;
    std::vector<double> hi;
};

// Groups rows by cell and collapses seeds. metric is one of accuracy, auroc,
// train_loss; rows without the metric (undefined AUROC) are skipped.
std::vector<curve_series> build_series(const std::vector<history_row>& rows,
                                       const std::string& metric);

// Deterministic bytes: same series in, same SVG out. One polyline per series,
// a translucent band where the envelope has width, axes with ticks, legend.
// Throws std::invalid_argument on empty input.
std::string render_curves_svg(const std::vector<curve_series>& series,
                              const std::string& x_label, const std::string& y_label);

}  // namespace fedfault
