#pragma once

#include <cstddef>
#include <vector>

namespace fedfault {

// Dense row-major matrix of doubles. Just enough structure for the models in
// this project; nothing clever.
struct matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    matrix() = default;
    matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(size_t i, size_t j) { return data[i * cols + j]; }
    double at(size_t i, size_t j) const { return data[i * cols + j]; }
    double* row(size_t i) { return data.data() + i * cols; }
    const double* row(size_t i) const { return data.data() + i * cols; }
};

}  // namespace fedfault
