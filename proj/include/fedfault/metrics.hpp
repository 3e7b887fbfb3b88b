#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedfault/matrix.hpp"

namespace fedfault {

// Argmax per row; ties go to the lowest class index.
std::vector<int> predict_labels(const matrix& probs);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& actual);

// Mann-Whitney AUROC with average ranks for tied scores. Labels are 0/1.
// Returns nothing when only one class is present.
std::optional<double> auroc_binary(const std::vector<double>& scores,
                                   const std::vector<int>& labels);

// Unweighted one-vs-rest mean over classes present in the labels, each scored
// by its probability column. Throws when fewer than 2 classes are present.
double auroc_macro_ovr(const matrix& probs, const std::vector<int>& labels);

// Replaces any row holding a non-finite value with the uniform distribution,
// so a blown-up model scores as chance. Returns true if anything was replaced.
bool sanitize_probabilities(matrix& probs);

struct round_record {
    int round = 0;
    double test_accuracy = 0.0;
    std::optional<double> test_auroc;
    double train_loss = 0.0;
    std::vector<uint8_t> participated, uploaded, downloaded;  // one flag per client
    bool non_finite = false;
};

// A non-finite parameter vector produced during local training. epoch and
// batch_index locate the first offending step within the client's round.
struct nonfinite_event {
    int round = 0;
    int client_id = 0;
    int epoch = 0;
    int batch_index = 0;
};

struct run_history {
    std::vector<round_record> records;
    std::vector<nonfinite_event> events;
    std::vector<int> zero_upload_rounds;
    std::string fingerprint;

    const round_record& final_record() const;
};

}  // namespace fedfault
