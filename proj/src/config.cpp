#include "fedfault/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace fedfault {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t comma = s.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(trim(s.substr(start)));
            break;
        }
        out.push_back(trim(s.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
    throw config_error(where.empty() ? msg : where + ": " + msg);
}

double parse_real(const std::string& v, const std::string& key, const std::string& where) {
    double out = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
        fail(where, key + ": expected a real number, got '" + v + "'");
    return out;
}

long long parse_int(const std::string& v, const std::string& key, const std::string& where) {
    long long out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        fail(where, key + ": expected an integer, got '" + v + "'");
    return out;
}

uint64_t parse_u64(const std::string& v, const std::string& key, const std::string& where) {
    uint64_t out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        fail(where, key + ": expected an unsigned integer, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& v, const std::string& key, const std::string& where) {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(where, key + ": expected true or false, got '" + v + "'");
}

int parse_bounded_int(const std::string& v, const std::string& key, const std::string& where,
                      long long lo, long long hi) {
    long long x = parse_int(v, key, where);
    if (x < lo || x > hi)
        fail(where, key + ": value " + v + " outside [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
    return static_cast<int>(x);
}

double parse_rate(const std::string& v, const std::string& key, const std::string& where) {
    double x = parse_real(v, key, where);
    if (x < 0.0 || x > 1.0) fail(where, key + ": value " + v + " outside [0, 1]");
    return x;
}

double parse_positive(const std::string& v, const std::string& key, const std::string& where) {
    double x = parse_real(v, key, where);
    if (!(x > 0.0)) fail(where, key + ": value " + v + " must be > 0");
    return x;
}

// site.<k>.<field> and scenario.client.<k>.<field>
bool match_indexed(const std::string& key, const std::string& prefix, int& index,
                   std::string& field) {
    if (key.rfind(prefix, 0) != 0) return false;
    size_t dot = key.find('.', prefix.size());
    if (dot == std::string::npos) return false;
    std::string num = key.substr(prefix.size(), dot - prefix.size());
    int out = 0;
    auto res = std::from_chars(num.data(), num.data() + num.size(), out);
    if (res.ec != std::errc() || res.ptr != num.data() + num.size() || out < 0) return false;
    index = out;
    field = key.substr(dot + 1);
    return true;
}

struct site_builder {
    std::optional<double> fraction;
    std::optional<std::vector<int>> classes;
    std::optional<std::vector<double>> proportions;
};

// Parser state threaded through assignments so sites can be assembled from
// scattered keys and finalized once.
struct build_state {
    experiment_config* cfg;
    std::map<int, site_builder>* sites;
};

void set_key(build_state& st, const std::string& key, const std::string& value,
             const std::string& where) {
    experiment_config& c = *st.cfg;
    int idx = 0;
    std::string field;

    if (key == "arch.input_dim") {
        c.arch.input_dim = parse_bounded_int(value, key, where, 1, 1 << 20);
    } else if (key == "arch.num_classes") {
        c.arch.num_classes = parse_bounded_int(value, key, where, 2, 1 << 20);
    } else if (key == "arch.hidden_dim") {
        c.arch.hidden_dim = parse_bounded_int(value, key, where, 0, 1 << 20);
    } else if (key == "data.kind") {
        if (value != "synthetic" && value != "csv")
            fail(where, "data.kind must be 'synthetic' or 'csv', got '" + value + "'");
        c.data_kind = value;
    } else if (key == "data.total_samples") {
        c.total_samples = static_cast<size_t>(parse_bounded_int(value, key, where, 1, 100000000));
    } else if (key == "data.class_separation") {
        double x = parse_real(value, key, where);
        if (x < 0.0) fail(where, key + ": must be >= 0");
        c.class_separation = x;
    } else if (key == "data.noise_sigma") {
        double x = parse_real(value, key, where);
        if (x < 0.0) fail(where, key + ": must be >= 0");
        c.noise_sigma = x;
    } else if (key == "data.csv_path") {
        c.csv_path = value;
    } else if (key == "data.test_fraction") {
        double x = parse_real(value, key, where);
        if (!(x > 0.0) || !(x < 1.0)) fail(where, key + ": value " + value + " outside (0, 1)");
        c.test_fraction = x;
    } else if (key == "data.stratified") {
        c.stratified = parse_bool(value, key, where);
    } else if (match_indexed(key, "site.", idx, field)) {
        site_builder& sb = (*st.sites)[idx];
        if (field == "fraction") {
            double x = parse_real(value, key, where);
            if (!(x > 0.0) || x > 1.0) fail(where, key + ": value " + value + " outside (0, 1]");
            sb.fraction = x;
        } else if (field == "classes") {
            std::vector<int> cls;
            for (const std::string& tok : split_list(value))
                cls.push_back(parse_bounded_int(tok, key, where, 0, 1 << 20));
            sb.classes = std::move(cls);
        } else if (field == "proportions") {
            std::vector<double> props;
            for (const std::string& tok : split_list(value)) {
                double p = parse_real(tok, key, where);
                if (p < 0.0) fail(where, key + ": proportions must be >= 0");
                props.push_back(p);
            }
            sb.proportions = std::move(props);
        } else {
            fail(where, "unknown key '" + key + "'");
        }
    } else if (key == "fed.rounds") {
        c.rounds = parse_bounded_int(value, key, where, 1, 100000000);
    } else if (key == "fed.eta") {
        c.eta = parse_positive(value, key, where);
    } else if (key == "fed.epochs") {
        c.local_epochs = parse_bounded_int(value, key, where, 1, 1000000);
    } else if (key == "fed.batch") {
        c.batch_size = parse_bounded_int(value, key, where, 1, 100000000);
    } else if (key == "fed.client_fraction") {
        double x = parse_real(value, key, where);
        if (!(x > 0.0) || x > 1.0) fail(where, key + ": value " + value + " outside (0, 1]");
        c.client_fraction = x;
    } else if (key == "fed.class_weighting") {
        c.class_weighting = parse_bool(value, key, where);
    } else if (key == "fed.strict_total_weighting") {
        c.strict_total_weighting = parse_bool(value, key, where);
    } else if (key == "fed.eval_every") {
        c.eval_every = parse_bounded_int(value, key, where, 1, 100000000);
    } else if (key == "scenario.schedule") {
        if (value == "iid")
            c.scenario.schedule = schedule_mode::iid;
        else if (value == "exact_count")
            c.scenario.schedule = schedule_mode::exact_count;
        else
            fail(where, "scenario.schedule must be 'iid' or 'exact_count', got '" + value + "'");
    } else if (match_indexed(key, "scenario.client.", idx, field)) {
        client_scenario& cs = c.scenario.clients[idx];
        if (field == "participation") {
            cs.participation_rate = parse_rate(value, key, where);
        } else if (field == "upload") {
            cs.upload_rate = parse_rate(value, key, where);
        } else if (field == "download") {
            cs.download_rate = parse_rate(value, key, where);
        } else if (field == "eta") {
            cs.eta_override = parse_positive(value, key, where);
        } else if (field == "epochs") {
            cs.epochs_override = parse_bounded_int(value, key, where, 1, 1000000);
        } else if (field == "batch") {
            cs.batch_override = parse_bounded_int(value, key, where, 1, 100000000);
        } else if (field == "flip_fraction") {
            cs.flip_fraction = parse_rate(value, key, where);
        } else if (field == "flip_mode") {
            if (value == "cyclic")
                cs.flip = flip_mode::cyclic;
            else if (value == "uniform_random")
                cs.flip = flip_mode::uniform_random;
            else
                fail(where, key + ": must be 'cyclic' or 'uniform_random', got '" + value + "'");
        } else {
            fail(where, "unknown key '" + key + "'");
        }
    } else if (key == "run.seed") {
        c.seed = parse_u64(value, key, where);
    } else if (key == "run.replicates") {
        c.replicates = parse_bounded_int(value, key, where, 1, 100000);
    } else if (key == "run.baselines") {
        c.baseline_centralized = false;
        c.baseline_all_locals = false;
        c.baseline_locals.clear();
        if (!value.empty()) {
            for (const std::string& tok : split_list(value)) {
                if (tok == "centralized") {
                    c.baseline_centralized = true;
                } else if (tok == "locals") {
                    c.baseline_all_locals = true;
                } else if (tok.rfind("local:", 0) == 0) {
                    c.baseline_locals.push_back(
                        parse_bounded_int(tok.substr(6), key, where, 0, 1 << 20));
                } else {
                    fail(where, key + ": unknown baseline '" + tok +
                                    "' (expected centralized, locals, or local:<k>)");
                }
            }
        }
        if (c.baseline_all_locals && !c.baseline_locals.empty())
            fail(where, key + ": 'locals' cannot be combined with explicit local:<k> entries");
    } else if (key == "out.dir") {
        if (value.empty()) fail(where, "out.dir: must not be empty");
        c.out_dir = value;
    } else if (key == "out.plot") {
        c.plot = parse_bool(value, key, where);
    } else if (key == "grid.cap") {
        c.grid_cap = static_cast<size_t>(parse_bounded_int(value, key, where, 1, 100000000));
    } else if (key.rfind("meta.", 0) == 0) {
        // provenance keys from emitted meta files; accepted so meta re-parses
    } else {
        fail(where, "unknown key '" + key + "'");
    }
}

void finalize_sites(build_state& st, const std::string& origin) {
    experiment_config& c = *st.cfg;
    const std::map<int, site_builder>& sb = *st.sites;
    if (sb.empty()) {
        // default three-site profile: disparate volumes, and no site holds
        // every class (the big sites each miss one end of the class range,
        // the small site holds only the two ends)
        int n = c.arch.num_classes;
        std::vector<int> head, tail;
        for (int i = 0; i < n - 1; ++i) head.push_back(i);
        for (int i = n > 1 ? 1 : 0; i < n; ++i) tail.push_back(i);
        c.sites = {{0.5746, head, std::nullopt},
                   {0.2893, tail, std::nullopt},
                   {0.0596, n > 1 ? std::vector<int>{0, n - 1} : std::vector<int>{0},
                    std::nullopt}};
        return;
    }
    int expect = 0;
    c.sites.clear();
    for (const auto& [idx, b] : sb) {
        if (idx != expect)
            fail(origin, "site indices must be contiguous from 0; missing site." +
                             std::to_string(expect));
        if (!b.fraction) fail(origin, "site." + std::to_string(idx) + ".fraction is required");
        if (!b.classes) fail(origin, "site." + std::to_string(idx) + ".classes is required");
        site_spec s;
        s.volume_fraction = *b.fraction;
        s.class_presence = *b.classes;
        for (size_t i = 0; i < s.class_presence.size(); ++i) {
            if (s.class_presence[i] >= c.arch.num_classes)
                fail(origin, "site." + std::to_string(idx) + ".classes references class " +
                                 std::to_string(s.class_presence[i]) + " but num_classes is " +
                                 std::to_string(c.arch.num_classes));
            if (i > 0 && s.class_presence[i] <= s.class_presence[i - 1])
                fail(origin,
                     "site." + std::to_string(idx) + ".classes must be sorted and unique");
        }
        if (b.proportions) {
            if (b.proportions->size() != s.class_presence.size())
                fail(origin, "site." + std::to_string(idx) +
                                 ".proportions must match the class list length");
            double sum = 0.0;
            for (double p : *b.proportions) sum += p;
            if (std::abs(sum - 1.0) > 1e-9)
                fail(origin, "site." + std::to_string(idx) + ".proportions must sum to 1");
            s.class_proportions = *b.proportions;
        }
        c.sites.push_back(std::move(s));
        ++expect;
    }
}

void finalize(build_state& st, const std::string& origin) {
    experiment_config& c = *st.cfg;
    if (c.data_kind.empty()) fail(origin, "data.kind is required");
    if (c.data_kind == "csv" && c.csv_path.empty())
        fail(origin, "data.csv_path is required when data.kind = csv");
    if (c.rounds < 1) fail(origin, "fed.rounds is required");
    finalize_sites(st, origin);
    double fraction_sum = 0.0;
    for (const site_spec& s : c.sites) fraction_sum += s.volume_fraction;
    if (fraction_sum > 1.0 + 1e-9) fail(origin, "site fractions sum above 1");
    int k = static_cast<int>(c.sites.size());
    for (const auto& [id, cs] : c.scenario.clients)
        if (id >= k)
            fail(origin, "scenario.client." + std::to_string(id) + " references a client, but only " +
                             std::to_string(k) + " sites are configured");
    for (int id : c.baseline_locals)
        if (id >= k)
            fail(origin, "run.baselines: local:" + std::to_string(id) + " exceeds site count " +
                             std::to_string(k));
}

}  // namespace

void apply_assignment(experiment_config& cfg, const std::string& key, const std::string& value) {
    // Route through the same machinery as file parsing. Site keys need the
    // current sites re-opened for editing.
    std::map<int, site_builder> sites;
    for (size_t i = 0; i < cfg.sites.size(); ++i) {
        site_builder b;
        b.fraction = cfg.sites[i].volume_fraction;
        b.classes = cfg.sites[i].class_presence;
        b.proportions = cfg.sites[i].class_proportions;
        sites[static_cast<int>(i)] = std::move(b);
    }
    build_state st{&cfg, &sites};
    set_key(st, key, value, "");
    finalize(st, "");
}

parsed_config parse_config_text(const std::string& text, const std::string& origin) {
    parsed_config out;
    std::map<int, site_builder> sites;
    build_state st{&out.cfg, &sites};
    std::set<std::string> seen;

    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::string where = origin + ": line " + std::to_string(line_no);
        size_t eq = t.find('=');
        if (eq == std::string::npos) fail(where, "expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) fail(where, "empty key");
        if (!seen.insert(key).second && key.rfind("meta.", 0) != 0)
            fail(where, "duplicate key '" + key + "'");

        if (key.rfind("grid.", 0) == 0 && key != "grid.cap") {
            std::string axis_key = key.substr(5);
            std::vector<std::string> values = split_list(value);
            if (values.empty() || (values.size() == 1 && values[0].empty()))
                fail(where, "grid axis '" + axis_key + "' has no values");
            // vet the axis key and every value against a scratch config now,
            // so bad axes fail with this line number
            for (const std::string& v : values) {
                experiment_config scratch = out.cfg;
                std::map<int, site_builder> scratch_sites = sites;
                build_state scratch_st{&scratch, &scratch_sites};
                set_key(scratch_st, axis_key, v, where);
            }
            out.axes.push_back({axis_key, values});
            continue;
        }
        set_key(st, key, value, where);
    }
    finalize(st, origin);
    return out;
}

parsed_config parse_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

namespace {

std::string fmt_real(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string join_reals(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt_real(v[i]);
    }
    return out;
}

}  // namespace

std::string resolved_config_text(const experiment_config& c) {
    std::ostringstream o;
    o << "arch.input_dim = " << c.arch.input_dim << "\n";
    o << "arch.num_classes = " << c.arch.num_classes << "\n";
    o << "arch.hidden_dim = " << c.arch.hidden_dim << "\n";
    o << "data.kind = " << c.data_kind << "\n";
    if (!c.csv_path.empty()) o << "data.csv_path = " << c.csv_path << "\n";
    o << "data.total_samples = " << c.total_samples << "\n";
    o << "data.class_separation = " << fmt_real(c.class_separation) << "\n";
    o << "data.noise_sigma = " << fmt_real(c.noise_sigma) << "\n";
    o << "data.test_fraction = " << fmt_real(c.test_fraction) << "\n";
    o << "data.stratified = " << (c.stratified ? "true" : "false") << "\n";
    for (size_t k = 0; k < c.sites.size(); ++k) {
        o << "site." << k << ".fraction = " << fmt_real(c.sites[k].volume_fraction) << "\n";
        o << "site." << k << ".classes = " << join_ints(c.sites[k].class_presence) << "\n";
        if (c.sites[k].class_proportions)
            o << "site." << k << ".proportions = " << join_reals(*c.sites[k].class_proportions)
              << "\n";
    }
    o << "fed.rounds = " << c.rounds << "\n";
    o << "fed.eta = " << fmt_real(c.eta) << "\n";
    o << "fed.epochs = " << c.local_epochs << "\n";
    o << "fed.batch = " << c.batch_size << "\n";
    o << "fed.client_fraction = " << fmt_real(c.client_fraction) << "\n";
    o << "fed.class_weighting = " << (c.class_weighting ? "true" : "false") << "\n";
    o << "fed.strict_total_weighting = " << (c.strict_total_weighting ? "true" : "false") << "\n";
    o << "fed.eval_every = " << c.eval_every << "\n";
    o << "scenario.schedule = "
      << (c.scenario.schedule == schedule_mode::iid ? "iid" : "exact_count") << "\n";
    for (const auto& [id, cs] : c.scenario.clients) {
        std::string p = "scenario.client." + std::to_string(id) + ".";
        o << p << "participation = " << fmt_real(cs.participation_rate) << "\n";
        o << p << "upload = " << fmt_real(cs.upload_rate) << "\n";
        o << p << "download = " << fmt_real(cs.download_rate) << "\n";
        if (cs.eta_override) o << p << "eta = " << fmt_real(*cs.eta_override) << "\n";
        if (cs.epochs_override) o << p << "epochs = " << *cs.epochs_override << "\n";
        if (cs.batch_override) o << p << "batch = " << *cs.batch_override << "\n";
        o << p << "flip_fraction = " << fmt_real(cs.flip_fraction) << "\n";
        o << p << "flip_mode = " << (cs.flip == flip_mode::cyclic ? "cyclic" : "uniform_random")
          << "\n";
    }
    o << "run.seed = " << c.seed << "\n";
    o << "run.replicates = " << c.replicates << "\n";
    {
        std::vector<std::string> tokens;
        if (c.baseline_centralized) tokens.push_back("centralized");
        if (c.baseline_all_locals) tokens.push_back("locals");
        for (int id : c.baseline_locals) tokens.push_back("local:" + std::to_string(id));
        if (!tokens.empty()) {
            std::string joined;
            for (size_t i = 0; i < tokens.size(); ++i) {
                if (i) joined += ",";
                joined += tokens[i];
            }
            o << "run.baselines = " << joined << "\n";
        }
    }
    o << "out.dir = " << c.out_dir << "\n";
    o << "out.plot = " << (c.plot ? "true" : "false") << "\n";
    o << "grid.cap = " << c.grid_cap << "\n";
    return o.str();
}

std::vector<grid_cell> expand_grid(const std::vector<grid_axis>& axes, size_t cap) {
    for (const grid_axis& a : axes)
        if (a.values.empty()) throw config_error("grid axis '" + a.key + "' has no values");
    size_t total = 1;
    for (const grid_axis& a : axes) {
        if (a.values.size() > cap / total)
            throw config_error("grid exceeds cell cap of " + std::to_string(cap));
        total *= a.values.size();
    }
    std::vector<grid_cell> cells;
    cells.reserve(total);
    std::vector<size_t> pick(axes.size(), 0);
    for (size_t n = 0; n < total; ++n) {
        grid_cell cell;
        for (size_t i = 0; i < axes.size(); ++i) {
            if (!cell.name.empty()) cell.name += ";";
            cell.name += axes[i].key + "=" + axes[i].values[pick[i]];
            cell.assignments.push_back({axes[i].key, axes[i].values[pick[i]]});
        }
        if (cell.name.empty()) cell.name = "base";
        cells.push_back(std::move(cell));
        for (size_t i = axes.size(); i-- > 0;) {
            if (++pick[i] < axes[i].values.size()) break;
            pick[i] = 0;
        }
    }
    if (cells.empty()) cells.push_back({"base", {}});
    return cells;
}

}  // namespace fedfault
