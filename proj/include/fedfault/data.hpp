#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedfault/matrix.hpp"

namespace fedfault {

struct dataset {
    matrix features;
    std::vector<int> labels;
    int num_classes = 0;

    size_t size() const { return labels.size(); }
};

// One client's slice of the data universe. class_presence lists the classes
// the site holds; class_proportions, when given, is aligned with it and sums
// to 1. Without proportions the site draws from whatever remains of its
// present classes, proportional to availability.
struct site_spec {
    double volume_fraction = 0.0;
    std::vector<int> class_presence;
    std::optional<std::vector<double>> class_proportions;

    bool operator==(const site_spec&) const = default;
};

struct shard {
    dataset samples;
    int client_id = 0;

    size_t n() const { return samples.size(); }
};

struct synth_spec {
    int input_dim = 2;
    int num_classes = 4;
    size_t total_samples = 12000;
    double class_separation = 6.0;
    double noise_sigma = 1.0;
};

// Gaussian blobs. Class means sit on the circle of radius class_separation in
// the first two feature dimensions (on the line for input_dim == 1); labels
// are drawn uniformly per sample. Per sample the stream yields one label draw
// followed by input_dim gaussians.
dataset generate_synthetic(const synth_spec& spec, uint64_t seed);

// Splits a dataset into per-site shards. Shards are disjoint; shard k gets
// round(volume_fraction_k * n) samples drawn only from its present classes.
// Throws when a site's demand cannot be met from the per-class pools.
std::vector<shard> partition(const dataset& data, const std::vector<site_spec>& sites,
                             uint64_t seed);

struct split_result {
    dataset train;
    dataset test;
};

// Stratified (per class) or plain random split. test_fraction in (0, 1).
split_result train_test_split(const dataset& full, double test_fraction, bool stratified,
                              uint64_t seed);

enum class flip_mode { cyclic, uniform_random };

// Corrupts round(fraction * n) labels, chosen uniformly without replacement.
// Features are untouched. cyclic maps y to (y+1) mod C; uniform_random picks
// uniformly among the other classes.
shard flip_labels(const shard& in, double fraction, flip_mode mode, uint64_t seed);

// CSV with header f0,...,f{d-1},label. Errors carry 1-based line numbers.
// declared_classes, when given, bounds the label range; otherwise the class
// count is inferred as max label + 1.
dataset load_csv(const std::string& path, std::optional<int> declared_classes = std::nullopt);

// Concatenates shard data in shard order.
dataset pool_shards(const std::vector<shard>& shards);

// Inverse-frequency class weights n/(C * n_c) over a training split. Classes
// absent from the split get weight 1.
std::vector<double> inverse_frequency_weights(const dataset& train);

}  // namespace fedfault
