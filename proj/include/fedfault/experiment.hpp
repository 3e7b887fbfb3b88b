#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedfault/config.hpp"
#include "fedfault/data.hpp"
#include "fedfault/metrics.hpp"

namespace fedfault {

inline constexpr std::string_view tool_version = "0.1.0";

// One line of history.csv / summary.csv / grid_summary.csv.
struct history_row {
    std::string cell;
    uint64_t seed = 0;
    int round = 0;
    double accuracy = 0.0;
    std::optional<double> auroc;
    double train_loss = 0.0;
    std::string participated;  // bitstring, one char per client
    std::string uploaded;
    std::string downloaded;
    bool non_finite = false;
};

std::string history_header();
std::string format_row(const history_row& r);
std::vector<history_row> parse_history_csv(const std::string& path);

struct run_options {
    std::string out_dir_override;  // empty keeps the config's out.dir
    bool force = false;
    int jobs = 1;
};

// Everything produced by one (cell, seed, approach) execution.
struct unit_result {
    std::string cell;
    uint64_t seed = 0;
    std::vector<history_row> rows;
    std::string error;  // empty on success
};

// Shards, splits, and weights for one replicate root, built identically
// regardless of which approach consumes them.
struct data_context {
    dataset train;
    dataset test;
    std::vector<shard> clean_shards;    // as partitioned
    std::vector<shard> client_shards;   // after scenario label flips
    std::vector<double> class_weights;  // empty when weighting is off
};

data_context build_data_context(const experiment_config& cfg, uint64_t root);

// Runs every (approach, seed) unit of a single cell. cell_prefix is
// prepended to the approach tag in the emitted cell column.
std::vector<unit_result> run_cell_units(const experiment_config& cfg,
                                        const std::string& cell_prefix, int jobs);

// fedfault run: artifacts under the output dir. Returns false when any
// unit failed (errors are recorded in meta).
bool run_single(const experiment_config& cfg, const run_options& opt);

// fedfault grid: per-cell sub-directories plus grid_summary.csv and the
// best-per-approach pivot.
bool run_grid(const experiment_config& base, const std::vector<grid_axis>& axes,
              const std::vector<grid_cell>& explicit_cells, const run_options& opt);

struct preset_def {
    experiment_config cfg;
    std::vector<grid_cell> cells;
};

preset_def make_preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace fedfault
