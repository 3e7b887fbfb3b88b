#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedfault/data.hpp"
#include "fedfault/faults.hpp"
#include "fedfault/model.hpp"

namespace fedfault {

// Configuration or schema violation; the CLI maps this to exit code 2.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A fully-resolved experiment. Every field has a default except data_kind and
// rounds, which the config file must provide.
struct experiment_config {
    model_arch arch{2, 4, 0};

    std::string data_kind;  // "synthetic" or "csv"
    size_t total_samples = 12000;
    double class_separation = 2.5;
    double noise_sigma = 1.0;
    std::string csv_path;
    double test_fraction = 0.2;
    bool stratified = true;
    std::vector<site_spec> sites;  // resolved; defaults to the three-site profile

    int rounds = 0;
    double eta = 0.05;
    int local_epochs = 1;
    int batch_size = 50;
    double client_fraction = 1.0;
    bool class_weighting = false;
    bool strict_total_weighting = false;
    int eval_every = 10;

    scenario_spec scenario;

    uint64_t seed = 1;
    int replicates = 1;
    bool baseline_centralized = false;
    bool baseline_all_locals = false;
    std::vector<int> baseline_locals;  // explicit client ids

    std::string out_dir = "out";
    bool plot = false;
    size_t grid_cap = 1000;

    bool operator==(const experiment_config&) const = default;
};

// One grid axis: every value of the named scalar key, in file order.
struct grid_axis {
    std::string key;
    std::vector<std::string> values;
};

struct parsed_config {
    experiment_config cfg;
    std::vector<grid_axis> axes;
};

// Line-oriented key = value format; '#' starts a comment line. Unknown keys,
// malformed values, and out-of-range values raise config_error with the
// 1-based line number. Keys under meta. are accepted and ignored so emitted
// meta files re-parse as configs.
parsed_config parse_config_text(const std::string& text, const std::string& origin);
parsed_config parse_config_file(const std::string& path);

// Applies a single key = value assignment; used for grid cells.
void apply_assignment(experiment_config& cfg, const std::string& key, const std::string& value);

// Canonical flat-key rendering of a resolved config. Parsing it back yields
// an equal experiment_config.
std::string resolved_config_text(const experiment_config& cfg);

// A cell is a named bundle of assignments layered over the base config.
struct grid_cell {
    std::string name;
    std::vector<std::pair<std::string, std::string>> assignments;
};

// Cartesian product of the axes, capped. Cell names join key=value pairs.
std::vector<grid_cell> expand_grid(const std::vector<grid_axis>& axes, size_t cap);

}  // namespace fedfault
