#pragma once

#include <cstdint>
#include <vector>

#include "fedfault/matrix.hpp"

namespace fedfault {

// Classifier shape: softmax regression when hidden_dim == 0, otherwise one
// tanh hidden layer followed by a softmax output.
struct model_arch {
    int input_dim = 2;
    int num_classes = 2;
    int hidden_dim = 0;

    bool operator==(const model_arch&) const = default;
};

void validate_arch(const model_arch& arch);
size_t param_count(const model_arch& arch);

// Flat parameter vector. Layout is [W1 | b1 | W2 | b2] for the hidden-layer
// model and [W | b] for softmax regression, each block row-major.
struct param_vector {
    model_arch arch;
    std::vector<double> values;
};

struct hyperparams {
    double eta = 0.05;
    int local_epochs = 1;
    int batch_size = 50;
};

void validate_hyperparams(const hyperparams& hp);

struct batch {
    matrix features;          // n x input_dim
    std::vector<int> labels;  // n entries in [0, num_classes)
};

struct loss_grad {
    double loss = 0.0;
    std::vector<double> grad;  // same layout as param_vector::values
};

bool all_finite(const std::vector<double>& v);

// Xavier-uniform weights, zero biases. Deterministic in the seed; weight
// blocks consume the stream in layer order.
param_vector init_params(const model_arch& arch, uint64_t seed);

// Class probabilities, one row per example. Rows sum to 1.
matrix forward(const param_vector& params, const matrix& features);

// Mean class-weighted cross-entropy and its exact gradient. An empty weight
// vector means weight 1 for every class.
loss_grad loss_and_grad(const param_vector& params, const batch& b,
                        const std::vector<double>& class_weights = {});

// Loss only, over a full dataset.
double mean_loss(const param_vector& params, const matrix& features,
                 const std::vector<int>& labels,
                 const std::vector<double>& class_weights = {});

// w - eta * g. Value semantics; inputs are untouched. May produce non-finite
// values under extreme eta; callers that must survive that check the result
// with all_finite.
param_vector sgd_step(const param_vector& params, const std::vector<double>& grad,
                      double eta);

}  // namespace fedfault
