#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "fedfault/data.hpp"

namespace fedfault {

// Per-client fault knobs. Rates are success probabilities: participation_rate
// is the chance the client joins a round, upload_rate / download_rate the
// chance the respective transfer works. Defaults model a reliable client.
struct client_scenario {
    double participation_rate = 1.0;
    double upload_rate = 1.0;
    double download_rate = 1.0;
    std::optional<double> eta_override;
    std::optional<int> epochs_override;
    std::optional<int> batch_override;
    double flip_fraction = 0.0;
    flip_mode flip = flip_mode::cyclic;

    bool operator==(const client_scenario&) const = default;
};

// iid draws one Bernoulli per (round, client); exact_count instead schedules
// round(rate * T) participating rounds per client, chosen uniformly.
enum class schedule_mode { iid, exact_count };

struct scenario_spec {
    std::map<int, client_scenario> clients;  // sparse; absent clients are reliable
    schedule_mode schedule = schedule_mode::iid;

    bool operator==(const scenario_spec&) const = default;
};

struct hp_override {
    std::optional<double> eta;
    std::optional<int> local_epochs;
    std::optional<int> batch_size;
};

struct round_plan {
    std::vector<uint8_t> participates;
    std::vector<uint8_t> download_ok;
    std::vector<uint8_t> upload_ok;
    std::vector<hp_override> overrides;
};

struct fault_plan {
    int num_clients = 0;
    std::vector<round_plan> rounds;
};

// mask[t][k]: client k's participation flag in round t. Each client draws
// from its own substream, so one client's rate never shifts another's flags.
std::vector<std::vector<uint8_t>> sample_participation(double rate, int num_clients,
                                                       int num_rounds, uint64_t root);

struct link_masks {
    std::vector<std::vector<uint8_t>> upload;    // [t][k]
    std::vector<std::vector<uint8_t>> download;  // [t][k]
};

// Upload and download flags from direction-separate per-client substreams.
link_masks sample_link_faults(const scenario_spec& spec, int num_clients, int num_rounds,
                              uint64_t root);

// Full immutable plan: participation, link flags, and persistent per-client
// hyperparameter overrides attached to every round. Label corruption is not
// part of the plan; it is applied to shards once, before training.
fault_plan build_fault_plan(const scenario_spec& spec, int num_clients, int num_rounds,
                            uint64_t root);

// All flags true, no overrides.
fault_plan fault_free_plan(int num_clients, int num_rounds);

}  // namespace fedfault
