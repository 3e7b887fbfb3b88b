#include "fedfault/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fedfault/rng.hpp"

namespace fedfault {

namespace {

constexpr double two_pi = 6.283185307179586;

double class_mean_coord(int cls, int num_classes, int dim_index, double radius) {
    double theta = two_pi * cls / num_classes;
    if (dim_index == 0) return radius * std::cos(theta);
    if (dim_index == 1) return radius * std::sin(theta);
    return 0.0;
}

dataset gather_rows(const dataset& src, const std::vector<size_t>& rows) {
    dataset out;
    out.num_classes = src.num_classes;
    out.features = matrix(rows.size(), src.features.cols);
    out.labels.resize(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        const double* from = src.features.row(rows[i]);
        std::copy(from, from + src.features.cols, out.features.row(i));
        out.labels[i] = src.labels[rows[i]];
    }
    return out;
}

// Largest-remainder apportionment of total into parts proportional to props.
std::vector<size_t> apportion(size_t total, const std::vector<double>& props) {
    size_t k = props.size();
    std::vector<size_t> counts(k);
    std::vector<std::pair<double, size_t>> remainders(k);
    size_t assigned = 0;
    for (size_t i = 0; i < k; ++i) {
        double exact = props[i] * static_cast<double>(total);
        counts[i] = static_cast<size_t>(exact);
        assigned += counts[i];
        remainders[i] = {exact - static_cast<double>(counts[i]), i};
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t i = 0; assigned < total; ++i, ++assigned) counts[remainders[i % k].second]++;
    return counts;
}

}  // namespace

dataset generate_synthetic(const synth_spec& spec, uint64_t seed) {
    if (spec.input_dim < 1) throw std::invalid_argument("generate_synthetic: input_dim must be >= 1");
    if (spec.num_classes < 2) throw std::invalid_argument("generate_synthetic: num_classes must be >= 2");
    if (spec.total_samples == 0) throw std::invalid_argument("generate_synthetic: total_samples must be > 0");
    if (!(spec.noise_sigma >= 0.0)) throw std::invalid_argument("generate_synthetic: noise_sigma must be >= 0");
    if (!(spec.class_separation >= 0.0))
        throw std::invalid_argument("generate_synthetic: class_separation must be >= 0");

    rng_stream rs(seed);
    dataset out;
    out.num_classes = spec.num_classes;
    out.features = matrix(spec.total_samples, static_cast<size_t>(spec.input_dim));
    out.labels.resize(spec.total_samples);
    for (size_t i = 0; i < spec.total_samples; ++i) {
        int y = static_cast<int>(rs.next_index(static_cast<uint64_t>(spec.num_classes)));
        out.labels[i] = y;
        double* row = out.features.row(i);
        for (int j = 0; j < spec.input_dim; ++j)
            row[j] = class_mean_coord(y, spec.num_classes, j, spec.class_separation) +
                     spec.noise_sigma * rs.next_gaussian();
    }
    return out;
}

std::vector<shard> partition(const dataset& data, const std::vector<site_spec>& sites,
                             uint64_t seed) {
    if (sites.empty()) throw std::invalid_argument("partition: no sites");
    if (data.size() == 0) throw std::invalid_argument("partition: empty dataset");
    double fraction_sum = 0.0;
    for (size_t k = 0; k < sites.size(); ++k) {
        const site_spec& s = sites[k];
        if (!(s.volume_fraction > 0.0) || s.volume_fraction > 1.0)
            throw std::invalid_argument("partition: site " + std::to_string(k) +
                                        " volume_fraction must be in (0, 1]");
        fraction_sum += s.volume_fraction;
        if (s.class_presence.empty())
            throw std::invalid_argument("partition: site " + std::to_string(k) +
                                        " has empty class_presence");
        for (size_t i = 0; i < s.class_presence.size(); ++i) {
            int c = s.class_presence[i];
            if (c < 0 || c >= data.num_classes)
                throw std::invalid_argument("partition: site " + std::to_string(k) +
                                            " lists class " + std::to_string(c) +
                                            " outside [0, " + std::to_string(data.num_classes) + ")");
            if (i > 0 && s.class_presence[i] <= s.class_presence[i - 1])
                throw std::invalid_argument("partition: site " + std::to_string(k) +
                                            " class_presence must be sorted and unique");
        }
        if (s.class_proportions) {
            if (s.class_proportions->size() != s.class_presence.size())
                throw std::invalid_argument("partition: site " + std::to_string(k) +
                                            " class_proportions length mismatch");
            double psum = 0.0;
            for (double p : *s.class_proportions) {
                if (!(p >= 0.0))
                    throw std::invalid_argument("partition: site " + std::to_string(k) +
                                                " class_proportions must be non-negative");
                psum += p;
            }
            if (std::abs(psum - 1.0) > 1e-9)
                throw std::invalid_argument("partition: site " + std::to_string(k) +
                                            " class_proportions must sum to 1");
        }
    }
    // Fractions may sum below 1 (data not held by any site stays unassigned),
    // never above.
    if (fraction_sum > 1.0 + 1e-9)
        throw std::invalid_argument("partition: volume fractions sum above 1");

    rng_stream rs(seed);
    std::vector<std::vector<size_t>> pools(static_cast<size_t>(data.num_classes));
    for (size_t i = 0; i < data.size(); ++i)
        pools[static_cast<size_t>(data.labels[i])].push_back(i);
    for (auto& pool : pools) rs.shuffle(pool);
    std::vector<size_t> cursor(pools.size(), 0);
    auto remaining = [&](size_t c) { return pools[c].size() - cursor[c]; };

    std::vector<shard> out;
    out.reserve(sites.size());
    for (size_t k = 0; k < sites.size(); ++k) {
        const site_spec& s = sites[k];
        size_t target = static_cast<size_t>(
            std::llround(s.volume_fraction * static_cast<double>(data.size())));
        std::vector<size_t> rows;
        rows.reserve(target);
        if (s.class_proportions) {
            std::vector<size_t> want = apportion(target, *s.class_proportions);
            for (size_t i = 0; i < s.class_presence.size(); ++i) {
                size_t c = static_cast<size_t>(s.class_presence[i]);
                if (want[i] > remaining(c))
                    throw std::runtime_error(
                        "partition: infeasible spec, site " + std::to_string(k) + " needs " +
                        std::to_string(want[i]) + " of class " + std::to_string(c) + " but only " +
                        std::to_string(remaining(c)) + " remain");
                for (size_t t = 0; t < want[i]; ++t) rows.push_back(pools[c][cursor[c]++]);
            }
        } else {
            for (size_t t = 0; t < target; ++t) {
                size_t avail = 0;
                for (int c : s.class_presence) avail += remaining(static_cast<size_t>(c));
                if (avail == 0)
                    throw std::runtime_error("partition: infeasible spec, site " +
                                             std::to_string(k) +
                                             " exhausted its present classes");
                uint64_t pick = rs.next_index(avail);
                for (int c : s.class_presence) {
                    size_t r = remaining(static_cast<size_t>(c));
                    if (pick < r) {
                        rows.push_back(pools[static_cast<size_t>(c)][cursor[static_cast<size_t>(c)]++]);
                        break;
                    }
                    pick -= r;
                }
            }
        }
        shard sh;
        sh.client_id = static_cast<int>(k);
        sh.samples = gather_rows(data, rows);
        out.push_back(std::move(sh));
    }
    return out;
}

split_result train_test_split(const dataset& full, double test_fraction, bool stratified,
                              uint64_t seed) {
    if (!(test_fraction > 0.0) || !(test_fraction < 1.0))
        throw std::invalid_argument("train_test_split: test_fraction must be in (0, 1)");
    if (full.size() == 0) throw std::invalid_argument("train_test_split: empty dataset");

    rng_stream rs(seed);
    std::vector<size_t> test_rows, train_rows;
    if (stratified) {
        std::vector<std::vector<size_t>> pools(static_cast<size_t>(full.num_classes));
        for (size_t i = 0; i < full.size(); ++i)
            pools[static_cast<size_t>(full.labels[i])].push_back(i);
        for (size_t c = 0; c < pools.size(); ++c) {
            if (!pools[c].empty() && pools[c].size() < 2)
                throw std::invalid_argument("train_test_split: class " + std::to_string(c) +
                                            " has fewer than 2 examples under stratification");
            rs.shuffle(pools[c]);
            size_t t = static_cast<size_t>(
                std::llround(test_fraction * static_cast<double>(pools[c].size())));
            for (size_t i = 0; i < pools[c].size(); ++i)
                (i < t ? test_rows : train_rows).push_back(pools[c][i]);
        }
    } else {
        std::vector<size_t> idx(full.size());
        std::iota(idx.begin(), idx.end(), size_t{0});
        rs.shuffle(idx);
        size_t t = static_cast<size_t>(
            std::llround(test_fraction * static_cast<double>(full.size())));
        for (size_t i = 0; i < idx.size(); ++i) (i < t ? test_rows : train_rows).push_back(idx[i]);
    }
    return {gather_rows(full, train_rows), gather_rows(full, test_rows)};
}

shard flip_labels(const shard& in, double fraction, flip_mode mode, uint64_t seed) {
    if (!(fraction >= 0.0) || fraction > 1.0)
        throw std::invalid_argument("flip_labels: fraction must be in [0, 1]");
    int c = in.samples.num_classes;
    if (c < 2) throw std::invalid_argument("flip_labels: need at least 2 classes");
    shard out = in;
    size_t n = in.n();
    size_t m = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
    if (m == 0) return out;

    rng_stream rs(seed);
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    // partial Fisher-Yates: first m entries are the flip targets
    for (size_t i = 0; i < m; ++i) {
        size_t j = i + static_cast<size_t>(rs.next_index(n - i));
        std::swap(idx[i], idx[j]);
    }
    for (size_t i = 0; i < m; ++i) {
        int y = out.samples.labels[idx[i]];
        if (mode == flip_mode::cyclic) {
            out.samples.labels[idx[i]] = (y + 1) % c;
        } else {
            int offset = 1 + static_cast<int>(rs.next_index(static_cast<uint64_t>(c - 1)));
            out.samples.labels[idx[i]] = (y + offset) % c;
        }
    }
    return out;
}

dataset load_csv(const std::string& path, std::optional<int> declared_classes) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_csv: cannot open " + path);

    auto split_fields = [](const std::string& line) {
        std::vector<std::string> fields;
        size_t start = 0;
        while (true) {
            size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        return fields;
    };

    std::string line;
    size_t line_no = 0;
    if (!std::getline(f, line)) throw std::runtime_error("load_csv: " + path + ": empty file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF)
        line.erase(0, 3);

    std::vector<std::string> header = split_fields(line);
    if (header.size() < 2 || header.back() != "label")
        throw std::runtime_error("load_csv: " + path +
                                 ": line 1: header must be f0,...,f{d-1},label");
    size_t dim = header.size() - 1;
    for (size_t j = 0; j < dim; ++j)
        if (header[j] != "f" + std::to_string(j))
            throw std::runtime_error("load_csv: " + path + ": line 1: expected column f" +
                                     std::to_string(j) + ", got " + header[j]);

    std::vector<double> values;
    std::vector<int> labels;
    int max_label = -1;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = split_fields(line);
        if (fields.size() != dim + 1)
            throw std::runtime_error("load_csv: " + path + ": line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(dim + 1) + " fields, got " +
                                     std::to_string(fields.size()));
        for (size_t j = 0; j < dim; ++j) {
            const std::string& s = fields[j];
            double v = 0.0;
            auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc() || res.ptr != s.data() + s.size())
                throw std::runtime_error("load_csv: " + path + ": line " +
                                         std::to_string(line_no) + ": field f" +
                                         std::to_string(j) + " is not numeric: '" + s + "'");
            values.push_back(v);
        }
        const std::string& ls = fields[dim];
        int y = 0;
        auto res = std::from_chars(ls.data(), ls.data() + ls.size(), y);
        if (res.ec != std::errc() || res.ptr != ls.data() + ls.size() || y < 0)
            throw std::runtime_error("load_csv: " + path + ": line " + std::to_string(line_no) +
                                     ": label is not a non-negative integer: '" + ls + "'");
        if (declared_classes && y >= *declared_classes)
            throw std::runtime_error("load_csv: " + path + ": line " + std::to_string(line_no) +
                                     ": label " + std::to_string(y) + " outside [0, " +
                                     std::to_string(*declared_classes) + ")");
        labels.push_back(y);
        max_label = std::max(max_label, y);
    }
    if (labels.empty()) throw std::runtime_error("load_csv: " + path + ": no examples");

    dataset out;
    out.num_classes = declared_classes ? *declared_classes : max_label + 1;
    out.features = matrix(labels.size(), dim);
    out.features.data = std::move(values);
    out.labels = std::move(labels);
    return out;
}

dataset pool_shards(const std::vector<shard>& shards) {
    if (shards.empty()) throw std::invalid_argument("pool_shards: no shards");
    dataset out;
    out.num_classes = shards[0].samples.num_classes;
    size_t total = 0;
    for (const shard& s : shards) {
        if (s.samples.num_classes != out.num_classes)
            throw std::invalid_argument("pool_shards: shards disagree on num_classes");
        if (s.n() > 0 && s.samples.features.cols != shards[0].samples.features.cols)
            throw std::invalid_argument("pool_shards: shards disagree on feature width");
        total += s.n();
    }
    out.features = matrix(total, shards[0].samples.features.cols);
    out.labels.reserve(total);
    size_t row = 0;
    for (const shard& s : shards) {
        for (size_t i = 0; i < s.n(); ++i, ++row) {
            const double* from = s.samples.features.row(i);
            std::copy(from, from + s.samples.features.cols, out.features.row(row));
            out.labels.push_back(s.samples.labels[i]);
        }
    }
    return out;
}

std::vector<double> inverse_frequency_weights(const dataset& train) {
    if (train.size() == 0) throw std::invalid_argument("inverse_frequency_weights: empty dataset");
    std::vector<size_t> counts(static_cast<size_t>(train.num_classes), 0);
    for (int y : train.labels) counts[static_cast<size_t>(y)]++;
    std::vector<double> w(counts.size(), 1.0);
    double n = static_cast<double>(train.size());
    double c = static_cast<double>(train.num_classes);
    for (size_t i = 0; i < counts.size(); ++i)
        if (counts[i] > 0) w[i] = n / (c * static_cast<double>(counts[i]));
    return w;
}

}  // namespace fedfault
