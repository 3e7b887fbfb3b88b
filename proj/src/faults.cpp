#include "fedfault/faults.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fedfault/rng.hpp"

namespace fedfault {

namespace {

void check_rate(double rate, const char* what, int client) {
    if (!(rate >= 0.0) || rate > 1.0)
        throw std::invalid_argument(std::string(what) + " for client " + std::to_string(client) +
                                    " must be in [0, 1]");
}

void check_shape(int num_clients, int num_rounds) {
    if (num_clients < 1) throw std::invalid_argument("fault sampling: need at least 1 client");
    if (num_rounds < 0) throw std::invalid_argument("fault sampling: negative round count");
}

// One client's iid flag sequence; always consumes one draw per round so the
// sequence depends only on the stream, not on the rate.
std::vector<uint8_t> iid_flags(double rate, int num_rounds, rng_stream rs) {
    std::vector<uint8_t> flags(static_cast<size_t>(num_rounds));
    for (int t = 0; t < num_rounds; ++t) flags[static_cast<size_t>(t)] = rs.next_bernoulli(rate);
    return flags;
}

// exact_count schedule: round(rate * T) participating rounds, uniformly chosen.
std::vector<uint8_t> exact_count_flags(double rate, int num_rounds, rng_stream rs) {
    std::vector<uint8_t> flags(static_cast<size_t>(num_rounds), 0);
    size_t m = static_cast<size_t>(std::llround(rate * static_cast<double>(num_rounds)));
    std::vector<size_t> idx(static_cast<size_t>(num_rounds));
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (size_t i = 0; i < m; ++i) {
        size_t j = i + static_cast<size_t>(rs.next_index(idx.size() - i));
        std::swap(idx[i], idx[j]);
        flags[idx[i]] = 1;
    }
    return flags;
}

double client_rate(const scenario_spec& spec, int k, double client_scenario::*field) {
    auto it = spec.clients.find(k);
    return it == spec.clients.end() ? 1.0 : it->second.*field;
}

}  // namespace

std::vector<std::vector<uint8_t>> sample_participation(double rate, int num_clients,
                                                       int num_rounds, uint64_t root) {
    check_shape(num_clients, num_rounds);
    check_rate(rate, "participation_rate", -1);
    std::vector<std::vector<uint8_t>> mask(static_cast<size_t>(num_rounds),
                                           std::vector<uint8_t>(static_cast<size_t>(num_clients)));
    for (int k = 0; k < num_clients; ++k) {
        auto flags = iid_flags(rate, num_rounds,
                               substream(root, "participation", static_cast<uint64_t>(k)));
        for (int t = 0; t < num_rounds; ++t)
            mask[static_cast<size_t>(t)][static_cast<size_t>(k)] = flags[static_cast<size_t>(t)];
    }
    return mask;
}

link_masks sample_link_faults(const scenario_spec& spec, int num_clients, int num_rounds,
                              uint64_t root) {
    check_shape(num_clients, num_rounds);
    link_masks out;
    out.upload.assign(static_cast<size_t>(num_rounds),
                      std::vector<uint8_t>(static_cast<size_t>(num_clients)));
    out.download = out.upload;
    for (int k = 0; k < num_clients; ++k) {
        double up = client_rate(spec, k, &client_scenario::upload_rate);
        double down = client_rate(spec, k, &client_scenario::download_rate);
        check_rate(up, "upload_rate", k);
        check_rate(down, "download_rate", k);
        auto uf = iid_flags(up, num_rounds, substream(root, "upload", static_cast<uint64_t>(k)));
        auto df = iid_flags(down, num_rounds, substream(root, "download", static_cast<uint64_t>(k)));
        for (int t = 0; t < num_rounds; ++t) {
            out.upload[static_cast<size_t>(t)][static_cast<size_t>(k)] = uf[static_cast<size_t>(t)];
            out.download[static_cast<size_t>(t)][static_cast<size_t>(k)] = df[static_cast<size_t>(t)];
        }
    }
    return out;
}

fault_plan build_fault_plan(const scenario_spec& spec, int num_clients, int num_rounds,
                            uint64_t root) {
    check_shape(num_clients, num_rounds);
    for (const auto& [k, cs] : spec.clients) {
        if (k < 0 || k >= num_clients)
            throw std::invalid_argument("build_fault_plan: scenario references unknown client " +
                                        std::to_string(k));
        check_rate(cs.participation_rate, "participation_rate", k);
        check_rate(cs.upload_rate, "upload_rate", k);
        check_rate(cs.download_rate, "download_rate", k);
        if (cs.eta_override && (!(*cs.eta_override > 0.0) || !std::isfinite(*cs.eta_override)))
            throw std::invalid_argument("build_fault_plan: eta override for client " +
                                        std::to_string(k) + " must be positive and finite");
        if (cs.epochs_override && *cs.epochs_override < 1)
            throw std::invalid_argument("build_fault_plan: epochs override for client " +
                                        std::to_string(k) + " must be >= 1");
        if (cs.batch_override && *cs.batch_override < 1)
            throw std::invalid_argument("build_fault_plan: batch override for client " +
                                        std::to_string(k) + " must be >= 1");
        if (!(cs.flip_fraction >= 0.0) || cs.flip_fraction > 1.0)
            throw std::invalid_argument("build_fault_plan: flip_fraction for client " +
                                        std::to_string(k) + " must be in [0, 1]");
    }

    fault_plan plan;
    plan.num_clients = num_clients;
    plan.rounds.assign(static_cast<size_t>(num_rounds), round_plan{});
    for (auto& rp : plan.rounds) {
        rp.participates.assign(static_cast<size_t>(num_clients), 1);
        rp.download_ok.assign(static_cast<size_t>(num_clients), 1);
        rp.upload_ok.assign(static_cast<size_t>(num_clients), 1);
        rp.overrides.assign(static_cast<size_t>(num_clients), hp_override{});
    }

    for (int k = 0; k < num_clients; ++k) {
        double pr = client_rate(spec, k, &client_scenario::participation_rate);
        rng_stream ps = substream(root, "participation", static_cast<uint64_t>(k));
        std::vector<uint8_t> part = spec.schedule == schedule_mode::iid
                                        ? iid_flags(pr, num_rounds, std::move(ps))
                                        : exact_count_flags(pr, num_rounds, std::move(ps));
        for (int t = 0; t < num_rounds; ++t)
            plan.rounds[static_cast<size_t>(t)].participates[static_cast<size_t>(k)] =
                part[static_cast<size_t>(t)];
    }
    link_masks links = sample_link_faults(spec, num_clients, num_rounds, root);
    for (int t = 0; t < num_rounds; ++t) {
        plan.rounds[static_cast<size_t>(t)].upload_ok = links.upload[static_cast<size_t>(t)];
        plan.rounds[static_cast<size_t>(t)].download_ok = links.download[static_cast<size_t>(t)];
    }
    for (const auto& [k, cs] : spec.clients) {
        if (!cs.eta_override && !cs.epochs_override && !cs.batch_override) continue;
        hp_override ov{cs.eta_override, cs.epochs_override, cs.batch_override};
        // misconfiguration is persistent: the override rides along every round
        for (auto& rp : plan.rounds) rp.overrides[static_cast<size_t>(k)] = ov;
    }
    return plan;
}

fault_plan fault_free_plan(int num_clients, int num_rounds) {
    return build_fault_plan(scenario_spec{}, num_clients, num_rounds, 0);
}

}  // namespace fedfault
