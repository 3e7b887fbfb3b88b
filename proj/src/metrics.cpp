#include "fedfault/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedfault {

std::vector<int> predict_labels(const matrix& probs) {
    std::vector<int> out(probs.rows);
    for (size_t i = 0; i < probs.rows; ++i) {
        const double* r = probs.row(i);
        size_t best = 0;
        for (size_t j = 1; j < probs.cols; ++j)
            if (r[j] > r[best]) best = j;
        out[i] = static_cast<int>(best);
    }
    return out;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& actual) {
    if (predicted.size() != actual.size())
        throw std::invalid_argument("accuracy: size mismatch");
    if (predicted.empty()) throw std::invalid_argument("accuracy: empty input");
    size_t hits = 0;
    for (size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == actual[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::optional<double> auroc_binary(const std::vector<double>& scores,
                                   const std::vector<int>& labels) {
    size_t n = scores.size();
    if (labels.size() != n) throw std::invalid_argument("auroc_binary: size mismatch");
    if (n == 0) throw std::invalid_argument("auroc_binary: empty input");
    size_t npos = 0;
    for (size_t i = 0; i < n; ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw std::invalid_argument("auroc_binary: labels must be 0 or 1");
        if (!std::isfinite(scores[i]))
            throw std::invalid_argument("auroc_binary: non-finite score");
        npos += static_cast<size_t>(labels[i]);
    }
    size_t nneg = n - npos;
    if (npos == 0 || nneg == 0) return std::nullopt;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // rank sum of positives, averaging ranks across tied scores
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        i = j;
    }
    double u = rank_sum_pos -
               static_cast<double>(npos) * (static_cast<double>(npos) + 1.0) / 2.0;
    return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

double auroc_macro_ovr(const matrix& probs, const std::vector<int>& labels) {
    if (labels.size() != probs.rows) throw std::invalid_argument("auroc_macro_ovr: size mismatch");
    if (probs.rows == 0) throw std::invalid_argument("auroc_macro_ovr: empty input");
    size_t c = probs.cols;
    std::vector<size_t> counts(c, 0);
    for (int y : labels) {
        if (y < 0 || static_cast<size_t>(y) >= c)
            throw std::invalid_argument("auroc_macro_ovr: label outside class range");
        counts[static_cast<size_t>(y)]++;
    }
    size_t present = 0;
    for (size_t cls = 0; cls < c; ++cls)
        if (counts[cls] > 0) ++present;
    if (present < 2)
        throw std::invalid_argument("auroc_macro_ovr: fewer than 2 classes present");

    double sum = 0.0;
    std::vector<double> col(probs.rows);
    std::vector<int> bin(probs.rows);
    for (size_t cls = 0; cls < c; ++cls) {
        if (counts[cls] == 0) continue;  // absent classes are skipped
        for (size_t i = 0; i < probs.rows; ++i) {
            col[i] = probs.at(i, cls);
            bin[i] = labels[i] == static_cast<int>(cls) ? 1 : 0;
        }
        sum += *auroc_binary(col, bin);  // present class and >= 2 present => both sides non-empty
    }
    return sum / static_cast<double>(present);
}

bool sanitize_probabilities(matrix& probs) {
    bool replaced = false;
    for (size_t i = 0; i < probs.rows; ++i) {
        double* r = probs.row(i);
        bool bad = false;
        for (size_t j = 0; j < probs.cols; ++j)
            if (!std::isfinite(r[j])) {
                bad = true;
                break;
            }
        if (bad) {
            double u = 1.0 / static_cast<double>(probs.cols);
            for (size_t j = 0; j < probs.cols; ++j) r[j] = u;
            replaced = true;
        }
    }
    return replaced;
}

const round_record& run_history::final_record() const {
    if (records.empty()) throw std::logic_error("run_history: no records");
    return records.back();
}

}  // namespace fedfault
