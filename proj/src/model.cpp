#include "fedfault/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fedfault/rng.hpp"

namespace fedfault {

namespace {

// Offsets of the parameter blocks inside the flat vector.
struct layout {
    size_t w1, b1, w2, b2;  // w2/b2 unused when hidden_dim == 0
};

layout layout_of(const model_arch& a) {
    size_t d = static_cast<size_t>(a.input_dim);
    size_t h = static_cast<size_t>(a.hidden_dim);
    size_t c = static_cast<size_t>(a.num_classes);
    if (h == 0) return {0, d * c, 0, 0};
    return {0, d * h, d * h + h, d * h + h + h * c};
}

double clamped_log(double p) { return std::log(std::max(p, 1e-300)); }

}  // namespace

void validate_arch(const model_arch& arch) {
    if (arch.input_dim < 1) throw std::invalid_argument("model_arch: input_dim must be >= 1");
    if (arch.num_classes < 2) throw std::invalid_argument("model_arch: num_classes must be >= 2");
    if (arch.hidden_dim < 0) throw std::invalid_argument("model_arch: hidden_dim must be >= 0");
}

size_t param_count(const model_arch& arch) {
    validate_arch(arch);
    size_t d = static_cast<size_t>(arch.input_dim);
    size_t h = static_cast<size_t>(arch.hidden_dim);
    size_t c = static_cast<size_t>(arch.num_classes);
    if (h == 0) return d * c + c;
    return d * h + h + h * c + c;
}

void validate_hyperparams(const hyperparams& hp) {
    if (!(hp.eta > 0.0) || !std::isfinite(hp.eta))
        throw std::invalid_argument("hyperparams: eta must be positive and finite");
    if (hp.local_epochs < 1) throw std::invalid_argument("hyperparams: local_epochs must be >= 1");
    if (hp.batch_size < 1) throw std::invalid_argument("hyperparams: batch_size must be >= 1");
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

param_vector init_params(const model_arch& arch, uint64_t seed) {
    validate_arch(arch);
    param_vector p{arch, std::vector<double>(param_count(arch), 0.0)};
    rng_stream rs(seed);
    auto fill_xavier = [&](size_t offset, size_t count, int fan_in, int fan_out) {
        double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (size_t i = 0; i < count; ++i)
            p.values[offset + i] = (2.0 * rs.next_uniform() - 1.0) * limit;
    };
    size_t d = static_cast<size_t>(arch.input_dim);
    size_t h = static_cast<size_t>(arch.hidden_dim);
    size_t c = static_cast<size_t>(arch.num_classes);
    layout L = layout_of(arch);
    if (h == 0) {
        fill_xavier(L.w1, d * c, arch.input_dim, arch.num_classes);
    } else {
        fill_xavier(L.w1, d * h, arch.input_dim, arch.hidden_dim);
        fill_xavier(L.w2, h * c, arch.hidden_dim, arch.num_classes);
    }
    // biases stay zero
    return p;
}

namespace {

// Logits for every row; when the arch has a hidden layer, also stores the
// tanh activations needed by the backward pass.
void compute_logits(const param_vector& p, const matrix& x, matrix& hidden, matrix& logits) {
    const model_arch& a = p.arch;
    size_t n = x.rows;
    size_t d = static_cast<size_t>(a.input_dim);
    size_t h = static_cast<size_t>(a.hidden_dim);
    size_t c = static_cast<size_t>(a.num_classes);
    layout L = layout_of(a);
    const double* v = p.values.data();
    logits = matrix(n, c);
    if (h == 0) {
        for (size_t i = 0; i < n; ++i) {
            const double* xi = x.row(i);
            double* li = logits.row(i);
            for (size_t k = 0; k < c; ++k) li[k] = v[L.b1 + k];
            for (size_t j = 0; j < d; ++j) {
                double xij = xi[j];
                const double* wrow = v + L.w1 + j * c;
                for (size_t k = 0; k < c; ++k) li[k] += xij * wrow[k];
            }
        }
        return;
    }
    hidden = matrix(n, h);
    for (size_t i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        double* hi = hidden.row(i);
        for (size_t j = 0; j < h; ++j) hi[j] = v[L.b1 + j];
        for (size_t j = 0; j < d; ++j) {
            double xij = xi[j];
            const double* wrow = v + L.w1 + j * h;
            for (size_t k = 0; k < h; ++k) hi[k] += xij * wrow[k];
        }
        for (size_t j = 0; j < h; ++j) hi[j] = std::tanh(hi[j]);
        double* li = logits.row(i);
        for (size_t k = 0; k < c; ++k) li[k] = v[L.b2 + k];
        for (size_t j = 0; j < h; ++j) {
            double hij = hi[j];
            const double* wrow = v + L.w2 + j * c;
            for (size_t k = 0; k < c; ++k) li[k] += hij * wrow[k];
        }
    }
}

void softmax_rows(matrix& m) {
    for (size_t i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        double mx = r[0];
        for (size_t j = 1; j < m.cols; ++j) mx = std::max(mx, r[j]);
        double sum = 0.0;
        for (size_t j = 0; j < m.cols; ++j) {
            r[j] = std::exp(r[j] - mx);
            sum += r[j];
        }
        for (size_t j = 0; j < m.cols; ++j) r[j] /= sum;
    }
}

void check_features(const param_vector& p, const matrix& x) {
    if (x.cols != static_cast<size_t>(p.arch.input_dim))
        throw std::invalid_argument("forward: feature width " + std::to_string(x.cols) +
                                    " does not match input_dim " +
                                    std::to_string(p.arch.input_dim));
    if (p.values.size() != param_count(p.arch))
        throw std::invalid_argument("forward: parameter vector size does not match arch");
}

}  // namespace

matrix forward(const param_vector& params, const matrix& features) {
    check_features(params, features);
    matrix hidden, logits;
    compute_logits(params, features, hidden, logits);
    softmax_rows(logits);
    return logits;
}

loss_grad loss_and_grad(const param_vector& params, const batch& b,
                        const std::vector<double>& class_weights) {
    check_features(params, b.features);
    const model_arch& a = params.arch;
    size_t n = b.features.rows;
    size_t d = static_cast<size_t>(a.input_dim);
    size_t h = static_cast<size_t>(a.hidden_dim);
    size_t c = static_cast<size_t>(a.num_classes);
    if (b.labels.size() != n)
        throw std::invalid_argument("loss_and_grad: label count does not match feature rows");
    if (n == 0) throw std::invalid_argument("loss_and_grad: empty batch");
    if (!class_weights.empty() && class_weights.size() != c)
        throw std::invalid_argument("loss_and_grad: class_weights size must equal num_classes");
    for (int y : b.labels)
        if (y < 0 || static_cast<size_t>(y) >= c)
            throw std::out_of_range("loss_and_grad: label " + std::to_string(y) +
                                    " outside [0, " + std::to_string(c) + ")");

    matrix hidden, probs;
    compute_logits(params, b.features, hidden, probs);
    softmax_rows(probs);

    loss_grad out;
    out.grad.assign(params.values.size(), 0.0);
    layout L = layout_of(a);
    const double* v = params.values.data();
    double* g = out.grad.data();

    // dlogits[i][k] = weight_y/n * (p[i][k] - [k == y_i]); reused in place
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        int y = b.labels[i];
        double w = class_weights.empty() ? 1.0 : class_weights[static_cast<size_t>(y)];
        double* pi = probs.row(i);
        loss -= w * clamped_log(pi[static_cast<size_t>(y)]);
        double scale = w / static_cast<double>(n);
        for (size_t k = 0; k < c; ++k) pi[k] *= scale;
        pi[static_cast<size_t>(y)] -= scale;
    }
    out.loss = loss / static_cast<double>(n);

    if (h == 0) {
        for (size_t i = 0; i < n; ++i) {
            const double* xi = b.features.row(i);
            const double* dl = probs.row(i);
            for (size_t j = 0; j < d; ++j) {
                double xij = xi[j];
                double* grow = g + L.w1 + j * c;
                for (size_t k = 0; k < c; ++k) grow[k] += xij * dl[k];
            }
            double* gb = g + L.b1;
            for (size_t k = 0; k < c; ++k) gb[k] += dl[k];
        }
        return out;
    }

    std::vector<double> dz(h);
    for (size_t i = 0; i < n; ++i) {
        const double* xi = b.features.row(i);
        const double* hi = hidden.row(i);
        const double* dl = probs.row(i);
        // output layer
        for (size_t j = 0; j < h; ++j) {
            double hij = hi[j];
            double* grow = g + L.w2 + j * c;
            double acc = 0.0;
            const double* wrow = v + L.w2 + j * c;
            for (size_t k = 0; k < c; ++k) {
                grow[k] += hij * dl[k];
                acc += dl[k] * wrow[k];
            }
            dz[j] = acc * (1.0 - hij * hij);  // tanh'
        }
        double* gb2 = g + L.b2;
        for (size_t k = 0; k < c; ++k) gb2[k] += dl[k];
        // hidden layer
        for (size_t j = 0; j < d; ++j) {
            double xij = xi[j];
            double* grow = g + L.w1 + j * h;
            for (size_t k = 0; k < h; ++k) grow[k] += xij * dz[k];
        }
        double* gb1 = g + L.b1;
        for (size_t k = 0; k < h; ++k) gb1[k] += dz[k];
    }
    return out;
}

double mean_loss(const param_vector& params, const matrix& features,
                 const std::vector<int>& labels, const std::vector<double>& class_weights) {
    check_features(params, features);
    size_t n = features.rows;
    size_t c = static_cast<size_t>(params.arch.num_classes);
    if (labels.size() != n) throw std::invalid_argument("mean_loss: label count mismatch");
    if (n == 0) throw std::invalid_argument("mean_loss: empty dataset");
    if (!class_weights.empty() && class_weights.size() != c)
        throw std::invalid_argument("mean_loss: class_weights size must equal num_classes");
    matrix probs = forward(params, features);
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        int y = labels[i];
        if (y < 0 || static_cast<size_t>(y) >= c)
            throw std::out_of_range("mean_loss: label outside class range");
        double w = class_weights.empty() ? 1.0 : class_weights[static_cast<size_t>(y)];
        loss -= w * clamped_log(probs.at(i, static_cast<size_t>(y)));
    }
    return loss / static_cast<double>(n);
}

param_vector sgd_step(const param_vector& params, const std::vector<double>& grad, double eta) {
    if (grad.size() != params.values.size())
        throw std::invalid_argument("sgd_step: gradient size does not match parameters");
    param_vector out{params.arch, std::vector<double>(params.values.size())};
    for (size_t i = 0; i < params.values.size(); ++i)
        out.values[i] = params.values[i] - eta * grad[i];
    return out;
}

}  // namespace fedfault
