#include "fedfault/federation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedfault {

namespace {

void gather_batch(const dataset& src, const std::vector<size_t>& order, size_t begin, size_t end,
                  batch& out) {
    size_t n = end - begin;
    out.features.rows = n;
    out.features.cols = src.features.cols;
    out.features.data.resize(n * src.features.cols);
    out.labels.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const double* from = src.features.row(order[begin + i]);
        std::copy(from, from + src.features.cols, out.features.row(i));
        out.labels[i] = src.labels[order[begin + i]];
    }
}

}  // namespace

client_update_result client_update(client_state& c, const param_vector& start_params,
                                   const hyperparams& hp,
                                   const std::vector<double>& class_weights) {
    validate_hyperparams(hp);
    if (start_params.arch != c.local_params.arch)
        throw std::invalid_argument("client_update: arch mismatch");
    client_update_result res{start_params, std::nullopt};
    size_t n = c.data.n();
    if (n == 0) return res;

    std::vector<size_t> order(n);
    size_t bsz = static_cast<size_t>(hp.batch_size);
    batch b;
    for (int epoch = 0; epoch < hp.local_epochs; ++epoch) {
        // each epoch shuffles the identity order, not the previous epoch's
        // arrangement, so E epochs compose exactly from single-epoch calls
        std::iota(order.begin(), order.end(), size_t{0});
        c.stream.shuffle(order);
        int batch_index = 0;
        for (size_t begin = 0; begin < n; begin += bsz, ++batch_index) {
            size_t end = std::min(begin + bsz, n);
            gather_batch(c.data.samples, order, begin, end, b);
            loss_grad lg = loss_and_grad(res.params, b, class_weights);
            res.params = sgd_step(res.params, lg.grad, hp.eta);
            if (!all_finite(res.params.values)) {
                // legal under extreme eta; the caller records it and moves on
                res.nonfinite_at = {epoch, batch_index};
                return res;
            }
        }
    }
    return res;
}

param_vector aggregate(const std::vector<weighted_update>& updates,
                       std::optional<double> strict_total) {
    if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
    size_t p = updates[0].params.values.size();
    for (const weighted_update& u : updates) {
        if (u.params.arch != updates[0].params.arch || u.params.values.size() != p)
            throw std::invalid_argument("aggregate: updates disagree on arch");
        if (!(u.weight >= 0.0) || !std::isfinite(u.weight))
            throw std::invalid_argument("aggregate: weights must be non-negative and finite");
    }

    // Canonical order: sort by weight, then by raw parameter bytes. Makes the
    // result a function of the update multiset, not of arrival order.
    std::vector<size_t> order(updates.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (updates[a].weight != updates[b].weight) return updates[a].weight < updates[b].weight;
        return std::memcmp(updates[a].params.values.data(), updates[b].params.values.data(),
                           p * sizeof(double)) < 0;
    });

    // the weight total is summed in the same canonical order; an arrival-order
    // sum would leak permutation effects back in through the denominator
    double received = 0.0;
    for (size_t k : order) received += updates[k].weight;
    double denom = strict_total.value_or(received);
    if (!(denom > 0.0)) throw std::invalid_argument("aggregate: total weight must be positive");
    if (strict_total && received > denom * (1.0 + 1e-12))
        throw std::invalid_argument("aggregate: received weight exceeds strict total");

    param_vector out{updates[0].params.arch, std::vector<double>(p)};
    long double d = static_cast<long double>(denom);
    for (size_t i = 0; i < p; ++i) {
        long double acc = 0.0L;
        for (size_t k : order)
            acc += static_cast<long double>(updates[k].weight) *
                   static_cast<long double>(updates[k].params.values[i]);
        out.values[i] = static_cast<double>(acc / d);
    }
    return out;
}

round_outcome run_round(federation_state& fs, const round_plan& plan,
                        const session_options& opts) {
    size_t k = fs.clients.size();
    if (k == 0) throw std::invalid_argument("run_round: no clients");
    if (plan.participates.size() != k || plan.download_ok.size() != k ||
        plan.upload_ok.size() != k || plan.overrides.size() != k)
        throw std::invalid_argument("run_round: plan width does not match client count");

    round_outcome o;
    o.round = fs.round + 1;
    o.participated.assign(k, 0);
    o.uploaded.assign(k, 0);
    o.downloaded.assign(k, 0);

    std::vector<weighted_update> received;
    double total_n = 0.0;
    for (const client_state& c : fs.clients) total_n += static_cast<double>(c.data.n());

    for (size_t i = 0; i < k; ++i) {
        if (!plan.participates[i]) continue;  // link flags of absentees are moot
        client_state& c = fs.clients[i];
        bool dl = plan.download_ok[i] != 0;
        if (dl) c.local_params = fs.global_params;
        // on download failure the client trains from its stale parameters

        hyperparams hp = c.hp;
        const hp_override& ov = plan.overrides[i];
        if (ov.eta) hp.eta = *ov.eta;
        if (ov.local_epochs) hp.local_epochs = *ov.local_epochs;
        if (ov.batch_size) hp.batch_size = *ov.batch_size;

        client_update_result res = client_update(c, c.local_params, hp, opts.class_weights);
        c.local_params = res.params;
        if (res.nonfinite_at)
            o.events.push_back(
                {o.round, c.client_id, res.nonfinite_at->first, res.nonfinite_at->second});

        bool ul = plan.upload_ok[i] != 0;
        if (ul) received.push_back({res.params, static_cast<double>(c.data.n())});
        o.participated[i] = 1;
        o.downloaded[i] = dl;
        o.uploaded[i] = ul;
    }

    if (received.empty()) {
        o.zero_uploads = true;  // global model stays exactly as it was
    } else {
        fs.global_params = aggregate(
            received, opts.strict_total_weighting ? std::optional<double>(total_n) : std::nullopt);
    }
    fs.round += 1;
    return o;
}

namespace {

std::vector<uint8_t> sample_selection(double fraction, size_t k, rng_stream& rs) {
    std::vector<uint8_t> sel(k, 1);
    if (fraction >= 1.0) return sel;
    size_t m = static_cast<size_t>(fraction * static_cast<double>(k));
    if (m < 1) m = 1;
    std::fill(sel.begin(), sel.end(), 0);
    std::vector<size_t> idx(k);
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (size_t i = 0; i < m; ++i) {
        size_t j = i + static_cast<size_t>(rs.next_index(k - i));
        std::swap(idx[i], idx[j]);
        sel[idx[i]] = 1;
    }
    return sel;
}

}  // namespace

run_history run_session(federation_state fs, const fault_plan& plan,
                        const session_options& opts, const eval_hook& hook) {
    size_t k = fs.clients.size();
    if (opts.rounds < 1) throw std::invalid_argument("run_session: rounds must be >= 1");
    if (plan.rounds.size() != static_cast<size_t>(opts.rounds))
        throw std::invalid_argument("run_session: plan length " +
                                    std::to_string(plan.rounds.size()) + " does not match rounds " +
                                    std::to_string(opts.rounds));
    if (opts.eval_every < 1) throw std::invalid_argument("run_session: eval_every must be >= 1");
    if (!(opts.client_fraction > 0.0) || opts.client_fraction > 1.0)
        throw std::invalid_argument("run_session: client_fraction must be in (0, 1]");

    run_history hist;
    round_record first = hook(0, fs.global_params);
    first.round = 0;
    first.participated.assign(k, 1);
    first.uploaded.assign(k, 1);
    first.downloaded.assign(k, 1);
    hist.records.push_back(std::move(first));

    rng_stream selection = substream(opts.seed_root, "selection");
    for (int t = 1; t <= opts.rounds; ++t) {
        round_plan rp = plan.rounds[static_cast<size_t>(t - 1)];
        if (opts.client_fraction < 1.0) {
            std::vector<uint8_t> sel = sample_selection(opts.client_fraction, k, selection);
            for (size_t i = 0; i < k; ++i)
                rp.participates[i] = rp.participates[i] && sel[i];
        }
        round_outcome o = run_round(fs, rp, opts);
        for (const nonfinite_event& e : o.events) hist.events.push_back(e);
        if (o.zero_uploads) hist.zero_upload_rounds.push_back(o.round);
        if (t % opts.eval_every == 0 || t == opts.rounds) {
            round_record rec = hook(t, fs.global_params);
            rec.round = t;
            rec.participated = o.participated;
            rec.uploaded = o.uploaded;
            rec.downloaded = o.downloaded;
            hist.records.push_back(std::move(rec));
        }
    }
    return hist;
}

namespace {

run_history solo_train(dataset d, const solo_spec& spec, const eval_hook& hook) {
    if (spec.rounds < 1) throw std::invalid_argument("solo_train: rounds must be >= 1");
    if (spec.eval_every < 1) throw std::invalid_argument("solo_train: eval_every must be >= 1");
    client_state c{0, spec.start, shard{std::move(d), 0}, spec.hp,
                   substream(spec.seed_root, "solo-shuffle")};
    run_history hist;
    round_record first = hook(0, c.local_params);
    first.round = 0;
    first.participated = {1};
    first.uploaded = {1};
    first.downloaded = {1};
    hist.records.push_back(std::move(first));
    for (int t = 1; t <= spec.rounds; ++t) {
        client_update_result res = client_update(c, c.local_params, spec.hp, spec.class_weights);
        c.local_params = res.params;
        if (res.nonfinite_at)
            hist.events.push_back({t, 0, res.nonfinite_at->first, res.nonfinite_at->second});
        if (t % spec.eval_every == 0 || t == spec.rounds) {
            round_record rec = hook(t, c.local_params);
            rec.round = t;
            rec.participated = {1};
            rec.uploaded = {1};
            rec.downloaded = {1};
            hist.records.push_back(std::move(rec));
        }
    }
    return hist;
}

}  // namespace

run_history centralized_train(const std::vector<shard>& shards, const solo_spec& spec,
                              const eval_hook& hook) {
    return solo_train(pool_shards(shards), spec, hook);
}

run_history local_train(const shard& s, const solo_spec& spec, const eval_hook& hook) {
    return solo_train(s.samples, spec, hook);
}

eval_hook make_eval_hook(const dataset& test, const dataset& train,
                         const std::vector<double>& class_weights) {
    if (test.size() == 0) throw std::invalid_argument("make_eval_hook: empty test set");
    return [&test, &train, class_weights](int round, const param_vector& params) {
        round_record rec;
        rec.round = round;
        matrix probs = forward(params, test.features);
        rec.non_finite = sanitize_probabilities(probs);
        rec.test_accuracy = accuracy(predict_labels(probs), test.labels);
        std::vector<size_t> counts(static_cast<size_t>(test.num_classes), 0);
        for (int y : test.labels) counts[static_cast<size_t>(y)]++;
        size_t present = 0;
        for (size_t c = 0; c < counts.size(); ++c)
            if (counts[c] > 0) ++present;
        if (present >= 2) rec.test_auroc = auroc_macro_ovr(probs, test.labels);
        rec.train_loss = train.size() > 0
                             ? mean_loss(params, train.features, train.labels, class_weights)
                             : 0.0;
        return rec;
    };
}

}  // namespace fedfault
