#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "fedfault/data.hpp"
#include "fedfault/faults.hpp"
#include "fedfault/metrics.hpp"
#include "fedfault/model.hpp"
#include "fedfault/rng.hpp"

namespace fedfault {

struct client_state {
    int client_id = 0;
    param_vector local_params;
    shard data;
    hyperparams hp;
    rng_stream stream;  // pre-split; the only randomness the client consumes
};

struct federation_state {
    model_arch arch;
    param_vector global_params;
    std::vector<client_state> clients;
    int round = 0;
};

struct client_update_result {
    param_vector params;
    // first step whose parameters went non-finite, as (epoch, batch index);
    // local training stops there and the blown-up vector is returned
    std::optional<std::pair<int, int>> nonfinite_at;
};

// E epochs of minibatch SGD from start_params. The shard is reshuffled from
// the client's own stream at every epoch; the final batch of an epoch may be
// smaller than batch_size. A non-finite result is recorded, not thrown.
client_update_result client_update(client_state& c, const param_vector& start_params,
                                   const hyperparams& hp,
                                   const std::vector<double>& class_weights = {});

struct weighted_update {
    param_vector params;
    double weight;  // n_k
};

// Weighted mean of the received updates. Weights are normalized over the
// received set unless strict_total is given, in which case they are divided
// by that fixed total (missing mass then shrinks the result). Summation is
// carried in extended precision over a canonical ordering, which makes the
// result independent of update order and bit-exact on identical inputs.
param_vector aggregate(const std::vector<weighted_update>& updates,
                       std::optional<double> strict_total = std::nullopt);

struct round_outcome {
    int round = 0;
    std::vector<uint8_t> participated, uploaded, downloaded;
    bool zero_uploads = false;
    std::vector<nonfinite_event> events;
};

struct session_options {
    int rounds = 0;
    int eval_every = 10;
    bool strict_total_weighting = false;
    std::vector<double> class_weights;
    double client_fraction = 1.0;  // server-side sampling on top of the plan
    uint64_t seed_root = 0;        // used only for client_fraction sampling
};

// One synchronous round: participating clients download (or train stale on
// download failure), train, and upload unless their upload fails. A round
// with zero uploads leaves the global model untouched.
round_outcome run_round(federation_state& fs, const round_plan& plan,
                        const session_options& opts);

using eval_hook = std::function<round_record(int round, const param_vector& params)>;

// T rounds under the plan, evaluating at round 0, every eval_every rounds,
// and at the final round.
run_history run_session(federation_state fs, const fault_plan& plan,
                        const session_options& opts, const eval_hook& hook);

// Shared setup for the single-trainer baselines.
struct solo_spec {
    param_vector start;
    hyperparams hp;
    int rounds = 0;
    int eval_every = 10;
    std::vector<double> class_weights;
    uint64_t seed_root = 0;
};

// Plain minibatch SGD over the pooled shards with the same epoch budget as a
// federated session (E epochs per round, T rounds).
run_history centralized_train(const std::vector<shard>& shards, const solo_spec& spec,
                              const eval_hook& hook);

// Same, on a single shard; evaluation (via the hook) is against whatever the
// hook closes over, normally the global test set.
run_history local_train(const shard& s, const solo_spec& spec, const eval_hook& hook);

// Convenience hook: accuracy and macro AUROC on test, mean loss on train.
eval_hook make_eval_hook(const dataset& test, const dataset& train,
                         const std::vector<double>& class_weights = {});

}  // namespace fedfault
