#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "fedfault/config.hpp"
#include "fedfault/experiment.hpp"
#include "fedfault/svg.hpp"

using namespace fedfault;
namespace stdfs = std::filesystem;

namespace {

// Scratch directory that cleans up after itself; stale leftovers from a
// crashed run are removed up front so reruns stay deterministic.
struct temp_dir {
    stdfs::path path;
    explicit temp_dir(const std::string& tag)
        : path(stdfs::temp_directory_path() / ("fedfault_test_" + tag)) {
        stdfs::remove_all(path);
    }
    ~temp_dir() {
        std::error_code ec;
        stdfs::remove_all(path, ec);
    }
};

std::string read_file(const stdfs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Small, fast experiment: full class presence at both sites so tiny sample
// counts cannot starve the partition.
const char* kBaseConfig =
    "data.kind = synthetic\n"
    "data.total_samples = 400\n"
    "fed.rounds = 6\n"
    "fed.eval_every = 3\n"
    "run.replicates = 2\n"
    "run.baselines = centralized, locals\n"
    "site.0.fraction = 0.5\n"
    "site.0.classes = 0, 1, 2, 3\n"
    "site.1.fraction = 0.3\n"
    "site.1.classes = 0, 1, 2, 3\n"
    "scenario.client.1.participation = 0.5\n";

experiment_config base_config() { return parse_config_text(kBaseConfig, "test").cfg; }

size_t count_occurrences(const std::string& hay, const std::string& needle) {
    size_t n = 0;
    for (size_t at = hay.find(needle); at != std::string::npos; at = hay.find(needle, at + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("the history schema is pinned") {
    CHECK(history_header() ==
          "cell,seed,round,accuracy,auroc,train_loss,participated,uploaded,downloaded,nonfinite");

    history_row r;
    r.cell = "base;approach=federated";
    r.seed = 3;
    r.round = 10;
    r.accuracy = 0.5;
    r.auroc = 0.75;
    r.train_loss = 1.25;
    r.participated = "111";
    r.uploaded = "101";
    r.downloaded = "011";
    CHECK(format_row(r) == "base;approach=federated,3,10,0.5,0.75,1.25,111,101,011,0");

    r.auroc.reset();
    r.non_finite = true;
    CHECK(format_row(r) == "base;approach=federated,3,10,0.5,nan,1.25,111,101,011,1");
}

TEST_CASE("history files round-trip through the parser") {
    temp_dir tmp("history_roundtrip");
    stdfs::create_directories(tmp.path);
    stdfs::path file = tmp.path / "history.csv";

    history_row a;
    a.cell = "fed.eta=0.1;approach=federated";
    a.seed = 1;
    a.round = 0;
    a.accuracy = 0.265625;
    a.auroc = 0.51171875;
    a.train_loss = 1.3862943611198906;
    a.participated = "10";
    a.uploaded = "10";
    a.downloaded = "10";
    history_row b = a;
    b.round = 5;
    b.auroc.reset();
    b.non_finite = true;

    std::ofstream(file) << history_header() << "\n" << format_row(a) << "\n" << format_row(b) << "\n";
    std::vector<history_row> rows = parse_history_csv(file.string());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].cell == a.cell);
    CHECK(rows[0].seed == 1);
    CHECK(rows[0].accuracy == a.accuracy);
    REQUIRE(rows[0].auroc.has_value());
    CHECK(*rows[0].auroc == *a.auroc);
    CHECK(rows[0].train_loss == a.train_loss);
    CHECK(rows[0].participated == "10");
    CHECK(!rows[0].non_finite);
    CHECK(rows[1].round == 5);
    CHECK(!rows[1].auroc.has_value());
    CHECK(rows[1].non_finite);

    CHECK_THROWS_WITH_AS(parse_history_csv((tmp.path / "absent.csv").string()),
                         doctest::Contains("cannot open"), std::runtime_error);
    std::ofstream(tmp.path / "bad.csv") << "round,accuracy\n";
    CHECK_THROWS_WITH_AS(parse_history_csv((tmp.path / "bad.csv").string()),
                         doctest::Contains("unexpected header"), std::runtime_error);
    std::ofstream(tmp.path / "short.csv") << history_header() << "\nx,1,2\n";
    CHECK_THROWS_WITH_AS(parse_history_csv((tmp.path / "short.csv").string()),
                         doctest::Contains("expected 10 fields"), std::runtime_error);
}

TEST_CASE("run_single writes the documented artifacts") {
    temp_dir tmp("run_single");
    experiment_config cfg = base_config();
    run_options opt;
    opt.out_dir_override = tmp.path.string();
    REQUIRE(run_single(cfg, opt));

    REQUIRE(stdfs::exists(tmp.path / "history.csv"));
    REQUIRE(stdfs::exists(tmp.path / "summary.csv"));
    REQUIRE(stdfs::exists(tmp.path / "meta"));
    CHECK(!stdfs::exists(tmp.path / "curves.svg"));  // out.plot is off

    // 4 approaches x 2 seeds x evals at rounds {0, 3, 6}
    std::vector<history_row> rows = parse_history_csv((tmp.path / "history.csv").string());
    CHECK(rows.size() == 4 * 2 * 3);

    // rows are sorted by (cell, seed, round) and approaches tagged in-cell
    for (size_t i = 1; i < rows.size(); ++i) {
        auto key = [](const history_row& r) { return std::tuple(r.cell, r.seed, r.round); };
        CHECK(key(rows[i - 1]) < key(rows[i]));
    }
    CHECK(rows.front().cell == "approach=centralized");
    CHECK(rows.front().seed == 1);
    CHECK(rows.front().round == 0);
    std::map<std::string, int> per_cell;
    for (const history_row& r : rows) per_cell[r.cell]++;
    REQUIRE(per_cell.size() == 4);
    CHECK(per_cell.at("approach=centralized") == 6);
    CHECK(per_cell.at("approach=federated") == 6);
    CHECK(per_cell.at("approach=local:0") == 6);
    CHECK(per_cell.at("approach=local:1") == 6);

    // federated rows carry one flag per client; solo rows exactly one
    for (const history_row& r : rows) {
        size_t want = r.cell == "approach=federated" ? 2 : 1;
        CHECK(r.participated.size() == want);
        CHECK(r.uploaded.size() == want);
        CHECK(r.downloaded.size() == want);
    }

    // the summary is the last eval row of each unit
    std::vector<history_row> summary = parse_history_csv((tmp.path / "summary.csv").string());
    REQUIRE(summary.size() == 4 * 2);
    for (const history_row& r : summary) CHECK(r.round == 6);

    // the meta file re-parses as a config equal to the one that ran
    experiment_config meta_cfg = parse_config_file((tmp.path / "meta").string()).cfg;
    experiment_config expect = cfg;
    expect.out_dir = tmp.path.string();
    CHECK(meta_cfg == expect);
    std::string meta = read_file(tmp.path / "meta");
    CHECK(meta.find("meta.version = 0.1.0") != std::string::npos);
    CHECK(meta.find("meta.auroc_reduction = macro_ovr") != std::string::npos);
    CHECK(meta.find("meta.seed.r0.root = 1") != std::string::npos);
    CHECK(meta.find("meta.seed.r1.root = 2") != std::string::npos);
    CHECK(meta.find("meta.error") == std::string::npos);
}

TEST_CASE("reruns reproduce the artifacts byte for byte") {
    temp_dir tmp("rerun");
    experiment_config cfg = base_config();
    cfg.plot = true;
    run_options opt;
    opt.out_dir_override = tmp.path.string();
    REQUIRE(run_single(cfg, opt));
    std::string history = read_file(tmp.path / "history.csv");
    std::string summary = read_file(tmp.path / "summary.csv");
    std::string meta = read_file(tmp.path / "meta");
    std::string svg = read_file(tmp.path / "curves.svg");

    opt.force = true;
    opt.jobs = 3;  // worker count must not leak into the output
    REQUIRE(run_single(cfg, opt));
    CHECK(read_file(tmp.path / "history.csv") == history);
    CHECK(read_file(tmp.path / "summary.csv") == summary);
    CHECK(read_file(tmp.path / "meta") == meta);
    CHECK(read_file(tmp.path / "curves.svg") == svg);
}

TEST_CASE("a non-empty output directory is refused without force") {
    temp_dir tmp("refuse");
    stdfs::create_directories(tmp.path);
    std::ofstream(tmp.path / "keep.txt") << "precious\n";

    experiment_config cfg = base_config();
    run_options opt;
    opt.out_dir_override = tmp.path.string();
    CHECK_THROWS_WITH_AS(run_single(cfg, opt), doctest::Contains("pass --force"),
                         std::runtime_error);
    CHECK(read_file(tmp.path / "keep.txt") == "precious\n");

    // a file squatting on the path is never silently replaced
    stdfs::path file_target = tmp.path / "keep.txt";
    run_options opt2;
    opt2.out_dir_override = file_target.string();
    opt2.force = true;
    CHECK_THROWS_WITH_AS(run_single(cfg, opt2), doctest::Contains("not a directory"),
                         std::runtime_error);
}

TEST_CASE("unit results are independent of the worker count") {
    experiment_config cfg = base_config();
    std::vector<unit_result> serial = run_cell_units(cfg, "", 1);
    std::vector<unit_result> parallel = run_cell_units(cfg, "", 4);
    REQUIRE(serial.size() == parallel.size());
    for (size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].cell == parallel[i].cell);
        CHECK(serial[i].seed == parallel[i].seed);
        CHECK(serial[i].error == parallel[i].error);
        REQUIRE(serial[i].rows.size() == parallel[i].rows.size());
        for (size_t j = 0; j < serial[i].rows.size(); ++j)
            CHECK(format_row(serial[i].rows[j]) == format_row(parallel[i].rows[j]));
    }
}

TEST_CASE("unit failures are recorded in meta instead of aborting the run") {
    temp_dir tmp("unit_error");
    experiment_config cfg = base_config();
    cfg.data_kind = "csv";
    cfg.csv_path = (tmp.path / "missing.csv").string();
    run_options opt;
    opt.out_dir_override = (tmp.path / "out").string();

    CHECK(!run_single(cfg, opt));
    std::string meta = read_file(tmp.path / "out" / "meta");
    CHECK(meta.find("meta.error = [approach=") != std::string::npos);
    CHECK(meta.find("missing.csv") != std::string::npos);
    // artifacts still exist, with no data rows
    CHECK(parse_history_csv((tmp.path / "out" / "history.csv").string()).empty());
}

TEST_CASE("run_grid lays out per-cell directories plus the grid rollups") {
    temp_dir tmp("grid");
    parsed_config p =
        parse_config_text(std::string(kBaseConfig) + "grid.fed.eta = 0.05, 0.1\n", "test");
    run_options opt;
    opt.out_dir_override = tmp.path.string();
    opt.jobs = 4;
    REQUIRE(run_grid(p.cfg, p.axes, {}, opt));

    for (const char* cell : {"fed.eta=0.05", "fed.eta=0.1"}) {
        stdfs::path dir = tmp.path / "cells" / cell;
        CHECK(stdfs::exists(dir / "history.csv"));
        CHECK(stdfs::exists(dir / "summary.csv"));
        CHECK(stdfs::exists(dir / "meta"));
    }

    // cell columns carry the cell name ahead of the approach tag
    std::vector<history_row> cell_rows =
        parse_history_csv((tmp.path / "cells" / "fed.eta=0.05" / "history.csv").string());
    REQUIRE(!cell_rows.empty());
    for (const history_row& r : cell_rows)
        CHECK(r.cell.rfind("fed.eta=0.05;approach=", 0) == 0);

    // grid_summary is the concatenation of the per-cell summaries, resorted
    std::vector<history_row> all =
        parse_history_csv((tmp.path / "grid_summary.csv").string());
    CHECK(all.size() == 2 * 4 * 2);  // cells x approaches x seeds
    for (size_t i = 1; i < all.size(); ++i) {
        auto key = [](const history_row& r) { return std::tuple(r.cell, r.seed, r.round); };
        CHECK(key(all[i - 1]) < key(all[i]));
    }

    // the pivot holds the best final accuracy over seeds, cells as columns
    std::vector<std::string> pivot_lines;
    {
        std::istringstream in(read_file(tmp.path / "grid_pivot.csv"));
        std::string line;
        while (std::getline(in, line)) pivot_lines.push_back(line);
    }
    REQUIRE(pivot_lines.size() == 5);
    CHECK(pivot_lines[0] == "approach,fed.eta=0.05,fed.eta=0.1");
    CHECK(pivot_lines[1].rfind("centralized,", 0) == 0);
    CHECK(pivot_lines[2].rfind("federated,", 0) == 0);
    CHECK(pivot_lines[3].rfind("local:0,", 0) == 0);
    CHECK(pivot_lines[4].rfind("local:1,", 0) == 0);

    std::map<std::pair<std::string, std::string>, double> best;
    for (const history_row& r : all) {
        size_t at = r.cell.rfind(";approach=");
        REQUIRE(at != std::string::npos);
        std::string cell = r.cell.substr(0, at);
        std::string approach = r.cell.substr(at + 10);
        auto key = std::make_pair(approach, cell);
        auto it = best.find(key);
        if (it == best.end() || r.accuracy > it->second) best[key] = r.accuracy;
    }
    for (size_t li = 1; li < pivot_lines.size(); ++li) {
        std::istringstream in(pivot_lines[li]);
        std::string approach, v05, v10;
        std::getline(in, approach, ',');
        std::getline(in, v05, ',');
        std::getline(in, v10, ',');
        CHECK(std::stod(v05) == best.at({approach, "fed.eta=0.05"}));
        CHECK(std::stod(v10) == best.at({approach, "fed.eta=0.1"}));
    }

    // the top-level meta re-parses with the grid axes intact
    parsed_config meta = parse_config_file((tmp.path / "meta").string());
    REQUIRE(meta.axes.size() == 1);
    CHECK(meta.axes[0].key == "fed.eta");
    CHECK(meta.axes[0].values == std::vector<std::string>{"0.05", "0.1"});
}

TEST_CASE("awkward cell names are sanitized for the directory layout only") {
    temp_dir tmp("sanitize");
    experiment_config cfg = base_config();
    std::vector<grid_cell> cells = {{"eta sweep/low", {{"fed.eta", "0.02"}}}};
    run_options opt;
    opt.out_dir_override = tmp.path.string();
    REQUIRE(run_grid(cfg, {}, cells, opt));

    stdfs::path dir = tmp.path / "cells" / "eta_sweep_low";
    REQUIRE(stdfs::exists(dir / "history.csv"));
    std::vector<history_row> rows = parse_history_csv((dir / "history.csv").string());
    REQUIRE(!rows.empty());
    // the original name survives in the data
    CHECK(rows.front().cell.rfind("eta sweep/low;approach=", 0) == 0);
}

TEST_CASE("grid outputs are identical across worker counts") {
    temp_dir tmp_a("grid_jobs1");
    temp_dir tmp_b("grid_jobs4");
    parsed_config p =
        parse_config_text(std::string(kBaseConfig) + "grid.fed.epochs = 1, 2\n", "test");
    run_options a;
    a.out_dir_override = tmp_a.path.string();
    a.jobs = 1;
    run_options b;
    b.out_dir_override = tmp_b.path.string();
    b.jobs = 4;
    REQUIRE(run_grid(p.cfg, p.axes, {}, a));
    REQUIRE(run_grid(p.cfg, p.axes, {}, b));
    CHECK(read_file(tmp_a.path / "grid_summary.csv") == read_file(tmp_b.path / "grid_summary.csv"));
    CHECK(read_file(tmp_a.path / "grid_pivot.csv") == read_file(tmp_b.path / "grid_pivot.csv"));
}

TEST_CASE("build_series groups by cell and collapses seeds into an envelope") {
    auto row = [](const std::string& cell, uint64_t seed, int round, double acc) {
        history_row r;
        r.cell = cell;
        r.seed = seed;
        r.round = round;
        r.accuracy = acc;
        r.auroc = acc + 0.1;
        r.train_loss = 1.0 - acc;
        return r;
    };
    std::vector<history_row> rows = {
        row("a", 1, 0, 0.25), row("a", 1, 10, 0.5), row("a", 2, 0, 0.75), row("a", 2, 10, 1.0),
        row("b", 1, 0, 0.375), row("b", 1, 10, 0.625),
    };

    std::vector<curve_series> series = build_series(rows, "accuracy");
    REQUIRE(series.size() == 2);
    CHECK(series[0].label == "a");
    CHECK(series[0].xs == std::vector<double>{0.0, 10.0});
    CHECK(series[0].mean == std::vector<double>{0.5, 0.75});
    CHECK(series[0].lo == std::vector<double>{0.25, 0.5});
    CHECK(series[0].hi == std::vector<double>{0.75, 1.0});
    CHECK(series[1].label == "b");
    CHECK(series[1].mean == std::vector<double>{0.375, 0.625});

    // rounds where the metric is undefined everywhere drop out of the curve
    rows[1].auroc.reset();
    rows[3].auroc.reset();
    std::vector<curve_series> auroc_series = build_series(rows, "auroc");
    CHECK(auroc_series[0].xs == std::vector<double>{0.0});

    CHECK_THROWS_AS(build_series(rows, "banana"), std::invalid_argument);
}

TEST_CASE("curve rendering is deterministic and structurally predictable") {
    curve_series flat;
    flat.label = "only";
    flat.xs = {0, 10, 20, 30, 40};
    flat.mean = {0.25, 0.5, 0.7, 0.8, 0.85};
    flat.lo = flat.mean;
    flat.hi = flat.mean;

    std::string svg = render_curves_svg({flat}, "round", "accuracy");
    CHECK(svg == render_curves_svg({flat}, "round", "accuracy"));
    CHECK(count_occurrences(svg, "<polyline") == 1);
    CHECK(count_occurrences(svg, "<polygon") == 0);  // no width, no band

    // five vertices on the curve: the points attribute has five pairs
    size_t at = svg.find("<polyline");
    size_t open = svg.find("points=\"", at) + 8;
    size_t close = svg.find('"', open);
    CHECK(count_occurrences(svg.substr(open, close - open), ",") == 5);

    curve_series banded = flat;
    banded.label = "spread";
    for (double& v : banded.lo) v -= 0.05;
    for (double& v : banded.hi) v += 0.05;
    std::string svg2 = render_curves_svg({flat, banded}, "round", "accuracy");
    CHECK(count_occurrences(svg2, "<polyline") == 2);
    CHECK(count_occurrences(svg2, "<polygon") == 1);
    CHECK(svg2.find("only") != std::string::npos);      // legend labels
    CHECK(svg2.find("spread") != std::string::npos);
    CHECK(svg2.find("round") != std::string::npos);     // axis labels
    CHECK(svg2.find("accuracy") != std::string::npos);

    CHECK_THROWS_AS(render_curves_svg({}, "x", "y"), std::invalid_argument);
}

TEST_CASE("presets resolve to runnable grids") {
    std::vector<std::string> names = preset_names();
    REQUIRE(!names.empty());
    for (const std::string& name : names) {
        preset_def p = make_preset(name);
        CHECK(!p.cells.empty());
        CHECK(p.cfg.rounds >= 1);
        // every preset cell must apply cleanly to its base config
        for (const grid_cell& cell : p.cells) {
            experiment_config cc = p.cfg;
            for (const auto& [k, v] : cell.assignments) apply_assignment(cc, k, v);
        }
    }
    CHECK_THROWS_WITH_AS(make_preset("nope"), doctest::Contains("unknown preset"), config_error);
}
