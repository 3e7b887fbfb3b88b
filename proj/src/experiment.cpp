#include "fedfault/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fedfault/federation.hpp"
#include "fedfault/rng.hpp"
#include "fedfault/svg.hpp"

namespace fedfault {

namespace stdfs = std::filesystem;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string bitstring(const std::vector<uint8_t>& flags) {
    std::string s(flags.size(), '0');
    for (size_t i = 0; i < flags.size(); ++i)
        if (flags[i]) s[i] = '1';
    return s;
}

struct approach_ref {
    std::string tag;  // federated | centralized | local:<k>
    int kind;         // 0 federated, 1 centralized, 2 local
    int local_id;
};

std::vector<approach_ref> approaches_of(const experiment_config& cfg) {
    std::vector<approach_ref> out;
    out.push_back({"federated", 0, -1});
    if (cfg.baseline_centralized) out.push_back({"centralized", 1, -1});
    if (cfg.baseline_all_locals) {
        for (size_t k = 0; k < cfg.sites.size(); ++k)
            out.push_back({"local:" + std::to_string(k), 2, static_cast<int>(k)});
    } else {
        for (int k : cfg.baseline_locals) out.push_back({"local:" + std::to_string(k), 2, k});
    }
    return out;
}

unit_result run_one_unit(const experiment_config& cfg, const std::string& cell_prefix,
                         const approach_ref& ap, int replicate) {
    unit_result res;
    uint64_t root = cfg.seed + static_cast<uint64_t>(replicate);
    res.cell = cell_prefix + "approach=" + ap.tag;
    res.seed = root;
    try {
        data_context dc = build_data_context(cfg, root);
        param_vector init = init_params(cfg.arch, derive_seed(root, "init"));
        dataset pooled = pool_shards(dc.clean_shards);
        eval_hook hook = make_eval_hook(dc.test, pooled, dc.class_weights);

        run_history hist;
        hyperparams hp{cfg.eta, cfg.local_epochs, cfg.batch_size};
        if (ap.kind == 0) {
            int k = static_cast<int>(dc.client_shards.size());
            std::vector<client_state> clients;
            clients.reserve(static_cast<size_t>(k));
            for (int i = 0; i < k; ++i)
                clients.push_back({i, init, dc.client_shards[static_cast<size_t>(i)], hp,
                                   substream(root, "shuffle", static_cast<uint64_t>(i))});
            federation_state fst{cfg.arch, init, std::move(clients), 0};
            fault_plan plan = build_fault_plan(cfg.scenario, k, cfg.rounds, root);
            session_options opts;
            opts.rounds = cfg.rounds;
            opts.eval_every = cfg.eval_every;
            opts.strict_total_weighting = cfg.strict_total_weighting;
            opts.class_weights = dc.class_weights;
            opts.client_fraction = cfg.client_fraction;
            opts.seed_root = root;
            hist = run_session(std::move(fst), plan, opts, hook);
        } else {
            solo_spec sp{init, hp, cfg.rounds, cfg.eval_every, dc.class_weights, root};
            hist = ap.kind == 1
                       ? centralized_train(dc.clean_shards, sp, hook)
                       : local_train(dc.clean_shards[static_cast<size_t>(ap.local_id)], sp, hook);
        }

        res.rows.reserve(hist.records.size());
        for (const round_record& rec : hist.records) {
            history_row row;
            row.cell = res.cell;
            row.seed = root;
            row.round = rec.round;
            row.accuracy = rec.test_accuracy;
            row.auroc = rec.test_auroc;
            row.train_loss = rec.train_loss;
            row.participated = bitstring(rec.participated);
            row.uploaded = bitstring(rec.uploaded);
            row.downloaded = bitstring(rec.downloaded);
            row.non_finite = rec.non_finite;
            res.rows.push_back(std::move(row));
        }
    } catch (const std::exception& e) {
        res.rows.clear();
        res.error = e.what();
    }
    return res;
}

std::vector<unit_result> run_tasks(const std::vector<std::function<unit_result()>>& tasks,
                                   int jobs) {
    std::vector<unit_result> results(tasks.size());
    size_t workers = static_cast<size_t>(std::max(1, jobs));
    workers = std::min(workers, tasks.size());
    if (workers <= 1) {
        for (size_t i = 0; i < tasks.size(); ++i) results[i] = tasks[i]();
        return results;
    }
    std::atomic<size_t> next{0};
    auto drain = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            results[i] = tasks[i]();
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t t = 0; t < workers; ++t) pool.emplace_back(drain);
    for (std::thread& t : pool) t.join();
    return results;
}

void sort_rows(std::vector<history_row>& rows) {
    std::sort(rows.begin(), rows.end(), [](const history_row& a, const history_row& b) {
        if (a.cell != b.cell) return a.cell < b.cell;
        if (a.seed != b.seed) return a.seed < b.seed;
        return a.round < b.round;
    });
}

std::vector<history_row> collect_rows(const std::vector<unit_result>& results) {
    std::vector<history_row> rows;
    for (const unit_result& u : results) rows.insert(rows.end(), u.rows.begin(), u.rows.end());
    sort_rows(rows);
    return rows;
}

// Last eval row of each (cell, seed); input must already be sorted.
std::vector<history_row> summarize(const std::vector<history_row>& rows) {
    std::vector<history_row> out;
    for (size_t i = 0; i < rows.size(); ++i) {
        bool last = i + 1 == rows.size() || rows[i + 1].cell != rows[i].cell ||
                    rows[i + 1].seed != rows[i].seed;
        if (last) out.push_back(rows[i]);
    }
    return out;
}

std::string render_rows(const std::vector<history_row>& rows) {
    std::string o = history_header();
    o += "\n";
    for (const history_row& r : rows) {
        o += format_row(r);
        o += "\n";
    }
    return o;
}

void write_text(const stdfs::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + p.string());
}

void prepare_out_dir(const stdfs::path& dir, bool force) {
    if (stdfs::exists(dir)) {
        if (!stdfs::is_directory(dir))
            throw std::runtime_error(dir.string() + " exists and is not a directory");
        if (!stdfs::is_empty(dir) && !force)
            throw std::runtime_error("output directory " + dir.string() +
                                     " is not empty; pass --force to write into it");
    } else {
        stdfs::create_directories(dir);
    }
}

std::string one_line(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (c == '\n' || c == '\r') c = ' ';
    return out;
}

std::string meta_text(const experiment_config& cfg, const std::vector<grid_axis>& axes,
                      const std::vector<unit_result>& results) {
    std::ostringstream o;
    o << "meta.version = " << tool_version << "\n";
    o << "meta.auroc_reduction = macro_ovr\n";
    for (int r = 0; r < cfg.replicates; ++r) {
        uint64_t root = cfg.seed + static_cast<uint64_t>(r);
        std::string p = "meta.seed.r" + std::to_string(r) + ".";
        o << p << "root = " << root << "\n";
        for (const char* label : {"data", "split", "partition", "init", "selection"})
            o << p << label << " = " << derive_seed(root, label) << "\n";
    }
    for (const unit_result& u : results)
        if (!u.error.empty())
            o << "meta.error = [" << u.cell << " seed " << u.seed << "] " << one_line(u.error)
              << "\n";
    o << resolved_config_text(cfg);
    for (const grid_axis& a : axes) {
        o << "grid." << a.key << " = ";
        for (size_t i = 0; i < a.values.size(); ++i) {
            if (i) o << ",";
            o << a.values[i];
        }
        o << "\n";
    }
    return o.str();
}

void maybe_plot(const experiment_config& cfg, const stdfs::path& dir,
                const std::vector<history_row>& rows) {
    if (!cfg.plot || rows.empty()) return;
    std::vector<curve_series> series = build_series(rows, "accuracy");
    if (series.empty()) return;
    write_text(dir / "curves.svg", render_curves_svg(series, "round", "accuracy"));
}

std::string sanitize_dir_name(const std::string& name) {
    std::string out;
    out.reserve(name.size());
    for (char c : name) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '.' || c == '_' || c == '-' || c == '=';
        out += ok ? c : '_';
    }
    if (out.size() > 80) {
        uint64_t h = hash_label(name);
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        out = out.substr(0, 63) + "_" + buf;
    }
    return out;
}

int approach_rank(const std::string& tag) {
    if (tag == "centralized") return 0;
    if (tag == "federated") return 1;
    return 2;
}

// Best-over-seeds final accuracy per (approach, cell), Table-style: one row
// per approach, one column per cell.
std::string render_pivot(const std::vector<std::string>& cell_names,
                         const std::vector<history_row>& summary_rows) {
    struct key {
        std::string approach;
        std::string cell;
        bool operator<(const key& o) const {
            return approach != o.approach ? approach < o.approach : cell < o.cell;
        }
    };
    std::map<key, double> best;
    std::vector<std::string> approaches;
    for (const history_row& r : summary_rows) {
        size_t split = r.cell.rfind("approach=");
        if (split == std::string::npos) continue;
        std::string approach = r.cell.substr(split + 9);
        std::string cell = split == 0 ? std::string("base") : r.cell.substr(0, split - 1);
        key k{approach, cell};
        auto it = best.find(k);
        if (it == best.end())
            best.emplace(k, r.accuracy);
        else
            it->second = std::max(it->second, r.accuracy);
        if (std::find(approaches.begin(), approaches.end(), approach) == approaches.end())
            approaches.push_back(approach);
    }
    std::sort(approaches.begin(), approaches.end(), [](const std::string& a, const std::string& b) {
        int ra = approach_rank(a), rb = approach_rank(b);
        return ra != rb ? ra < rb : a < b;
    });

    std::string o = "approach";
    for (const std::string& c : cell_names) o += "," + c;
    o += "\n";
    for (const std::string& a : approaches) {
        o += a;
        for (const std::string& c : cell_names) {
            auto it = best.find({a, c});
            o += ",";
            o += it == best.end() ? "nan" : fmt_double(it->second);
        }
        o += "\n";
    }
    return o;
}

}  // namespace

std::string history_header() {
    return "cell,seed,round,accuracy,auroc,train_loss,participated,uploaded,downloaded,nonfinite";
}

std::string format_row(const history_row& r) {
    std::string o = r.cell;
    o += "," + std::to_string(r.seed);
    o += "," + std::to_string(r.round);
    o += "," + fmt_double(r.accuracy);
    o += ",";
    o += r.auroc ? fmt_double(*r.auroc) : "nan";
    o += "," + fmt_double(r.train_loss);
    o += "," + r.participated;
    o += "," + r.uploaded;
    o += "," + r.downloaded;
    o += ",";
    o += r.non_finite ? "1" : "0";
    return o;
}

std::vector<history_row> parse_history_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != history_header())
        throw std::runtime_error(path + ": unexpected header '" + line + "'");

    std::vector<history_row> rows;
    size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
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
        if (fields.size() != 10)
            throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": expected 10 fields, got " +
                                     std::to_string(fields.size()));
        auto to_d = [&](const std::string& s, const char* what) {
            double v = 0.0;
            auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc() || res.ptr != s.data() + s.size())
                throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": bad " +
                                         what + " '" + s + "'");
            return v;
        };
        history_row r;
        r.cell = fields[0];
        {
            uint64_t v = 0;
            auto res = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), v);
            if (res.ec != std::errc() || res.ptr != fields[1].data() + fields[1].size())
                throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                         ": bad seed '" + fields[1] + "'");
            r.seed = v;
        }
        r.round = static_cast<int>(to_d(fields[2], "round"));
        r.accuracy = to_d(fields[3], "accuracy");
        if (fields[4] == "nan")
            r.auroc = std::nullopt;
        else
            r.auroc = to_d(fields[4], "auroc");
        r.train_loss = to_d(fields[5], "train_loss");
        r.participated = fields[6];
        r.uploaded = fields[7];
        r.downloaded = fields[8];
        if (fields[9] != "0" && fields[9] != "1")
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": bad nonfinite flag '" + fields[9] + "'");
        r.non_finite = fields[9] == "1";
        rows.push_back(std::move(r));
    }
    return rows;
}

data_context build_data_context(const experiment_config& cfg, uint64_t root) {
    data_context dc;
    dataset full;
    if (cfg.data_kind == "csv") {
        full = load_csv(cfg.csv_path, cfg.arch.num_classes);
        if (full.features.cols != static_cast<size_t>(cfg.arch.input_dim))
            throw std::runtime_error(cfg.csv_path + " has " + std::to_string(full.features.cols) +
                                     " feature columns but arch.input_dim is " +
                                     std::to_string(cfg.arch.input_dim));
    } else {
        synth_spec sp;
        sp.input_dim = cfg.arch.input_dim;
        sp.num_classes = cfg.arch.num_classes;
        sp.total_samples = cfg.total_samples;
        sp.class_separation = cfg.class_separation;
        sp.noise_sigma = cfg.noise_sigma;
        full = generate_synthetic(sp, derive_seed(root, "data"));
    }

    split_result sr =
        train_test_split(full, cfg.test_fraction, cfg.stratified, derive_seed(root, "split"));
    dc.train = std::move(sr.train);
    dc.test = std::move(sr.test);
    dc.clean_shards = partition(dc.train, cfg.sites, derive_seed(root, "partition"));

    dc.client_shards = dc.clean_shards;
    for (const auto& [id, cs] : cfg.scenario.clients) {
        if (cs.flip_fraction <= 0.0) continue;
        if (id < 0 || id >= static_cast<int>(dc.client_shards.size())) continue;
        dc.client_shards[static_cast<size_t>(id)] =
            flip_labels(dc.client_shards[static_cast<size_t>(id)], cs.flip_fraction, cs.flip,
                        derive_seed(root, "flip", static_cast<uint64_t>(id)));
    }

    if (cfg.class_weighting)
        dc.class_weights = inverse_frequency_weights(pool_shards(dc.clean_shards));
    return dc;
}

std::vector<unit_result> run_cell_units(const experiment_config& cfg,
                                        const std::string& cell_prefix, int jobs) {
    std::vector<std::function<unit_result()>> tasks;
    for (const approach_ref& ap : approaches_of(cfg))
        for (int r = 0; r < cfg.replicates; ++r)
            tasks.push_back([&cfg, cell_prefix, ap, r] {
                return run_one_unit(cfg, cell_prefix, ap, r);
            });
    return run_tasks(tasks, jobs);
}

bool run_single(const experiment_config& cfg0, const run_options& opt) {
    experiment_config cfg = cfg0;
    if (!opt.out_dir_override.empty()) cfg.out_dir = opt.out_dir_override;
    stdfs::path dir = cfg.out_dir;
    prepare_out_dir(dir, opt.force);

    std::vector<unit_result> results = run_cell_units(cfg, "", opt.jobs);
    std::vector<history_row> rows = collect_rows(results);
    write_text(dir / "history.csv", render_rows(rows));
    write_text(dir / "summary.csv", render_rows(summarize(rows)));
    write_text(dir / "meta", meta_text(cfg, {}, results));
    maybe_plot(cfg, dir, rows);

    for (const unit_result& u : results)
        if (!u.error.empty()) return false;
    return true;
}

bool run_grid(const experiment_config& base0, const std::vector<grid_axis>& axes,
              const std::vector<grid_cell>& explicit_cells, const run_options& opt) {
    experiment_config base = base0;
    if (!opt.out_dir_override.empty()) base.out_dir = opt.out_dir_override;

    std::vector<grid_cell> cells =
        explicit_cells.empty() ? expand_grid(axes, base.grid_cap) : explicit_cells;
    if (cells.size() > base.grid_cap)
        throw config_error("grid has " + std::to_string(cells.size()) + " cells, above the cap of " +
                           std::to_string(base.grid_cap));

    // resolve every cell before running anything, so a bad axis value fails fast
    std::vector<experiment_config> cell_cfgs;
    cell_cfgs.reserve(cells.size());
    for (const grid_cell& cell : cells) {
        experiment_config cc = base;
        for (const auto& [k, v] : cell.assignments) {
            try {
                apply_assignment(cc, k, v);
            } catch (const config_error& e) {
                throw config_error("cell '" + cell.name + "': " + e.what());
            }
        }
        cell_cfgs.push_back(std::move(cc));
    }

    stdfs::path dir = base.out_dir;
    prepare_out_dir(dir, opt.force);

    struct task_ref {
        size_t cell;
        approach_ref ap;
        int rep;
    };
    std::vector<task_ref> refs;
    for (size_t ci = 0; ci < cells.size(); ++ci)
        for (const approach_ref& ap : approaches_of(cell_cfgs[ci]))
            for (int r = 0; r < cell_cfgs[ci].replicates; ++r) refs.push_back({ci, ap, r});

    std::vector<std::function<unit_result()>> tasks;
    tasks.reserve(refs.size());
    for (const task_ref& t : refs)
        tasks.push_back([&, t] {
            return run_one_unit(cell_cfgs[t.cell], cells[t.cell].name + ";", t.ap, t.rep);
        });
    std::vector<unit_result> results = run_tasks(tasks, opt.jobs);

    // regroup per cell for the per-cell artifacts
    std::vector<std::vector<unit_result>> by_cell(cells.size());
    for (size_t i = 0; i < results.size(); ++i) by_cell[refs[i].cell].push_back(results[i]);

    std::vector<history_row> all_summary;
    for (size_t ci = 0; ci < cells.size(); ++ci) {
        stdfs::path cell_dir = dir / "cells" / sanitize_dir_name(cells[ci].name);
        stdfs::create_directories(cell_dir);
        std::vector<history_row> rows = collect_rows(by_cell[ci]);
        std::vector<history_row> summary = summarize(rows);
        write_text(cell_dir / "history.csv", render_rows(rows));
        write_text(cell_dir / "summary.csv", render_rows(summary));
        write_text(cell_dir / "meta", meta_text(cell_cfgs[ci], {}, by_cell[ci]));
        maybe_plot(cell_cfgs[ci], cell_dir, rows);
        all_summary.insert(all_summary.end(), summary.begin(), summary.end());
    }
    sort_rows(all_summary);
    write_text(dir / "grid_summary.csv", render_rows(all_summary));

    std::vector<std::string> cell_names;
    for (const grid_cell& c : cells) cell_names.push_back(c.name);
    std::sort(cell_names.begin(), cell_names.end());
    write_text(dir / "grid_pivot.csv", render_pivot(cell_names, all_summary));
    write_text(dir / "meta", meta_text(base, axes, results));

    for (const unit_result& u : results)
        if (!u.error.empty()) return false;
    return true;
}

}  // namespace fedfault
