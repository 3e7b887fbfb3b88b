#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedfault/config.hpp"
#include "fedfault/experiment.hpp"
#include "fedfault/svg.hpp"

#include <fstream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunError = 1;
constexpr int kExitConfigError = 2;

int cmd_run(const std::string& config_path, const fedfault::run_options& opt) {
    fedfault::parsed_config pc = fedfault::parse_config_file(config_path);
    if (!pc.axes.empty())
        throw fedfault::config_error(config_path +
                                     " declares grid axes; use `fedfault grid` to run it");
    return fedfault::run_single(pc.cfg, opt) ? kExitOk : kExitRunError;
}

int cmd_grid(const std::string& config_path, const fedfault::run_options& opt) {
    fedfault::parsed_config pc = fedfault::parse_config_file(config_path);
    return fedfault::run_grid(pc.cfg, pc.axes, {}, opt) ? kExitOk : kExitRunError;
}

int cmd_preset(const std::string& name, const fedfault::run_options& opt) {
    fedfault::preset_def def = fedfault::make_preset(name);
    return fedfault::run_grid(def.cfg, {}, def.cells, opt) ? kExitOk : kExitRunError;
}

int cmd_validate(const std::string& config_path) {
    fedfault::parsed_config pc = fedfault::parse_config_file(config_path);
    size_t cells = 1;
    for (const fedfault::grid_axis& a : pc.axes) cells *= a.values.size();
    std::printf("%s: ok (%zu grid cell%s)\n", config_path.c_str(), cells, cells == 1 ? "" : "s");
    return kExitOk;
}

int cmd_plot(const std::vector<std::string>& histories, const std::string& out_path,
             const std::string& metric) {
    std::vector<fedfault::history_row> rows;
    for (const std::string& path : histories) {
        std::vector<fedfault::history_row> r = fedfault::parse_history_csv(path);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    std::vector<fedfault::curve_series> series = fedfault::build_series(rows, metric);
    std::string svg = fedfault::render_curves_svg(series, "round", metric);
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + out_path + " for writing");
    f << svg;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + out_path);
    std::printf("wrote %s\n", out_path.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated averaging simulator with client fault injection"};
    app.require_subcommand(1);

    std::string config_path, preset_name, plot_out = "curves.svg", plot_metric = "accuracy";
    std::vector<std::string> plot_inputs;
    fedfault::run_options opt;

    CLI::App* run = app.add_subcommand("run", "run a single experiment config");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--out", opt.out_dir_override, "output directory (overrides out.dir)");
    run->add_flag("--force", opt.force, "write into a non-empty output directory");
    run->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::Range(1, 256));

    CLI::App* grid = app.add_subcommand("grid", "run every cell of a config's grid axes");
    grid->add_option("config", config_path, "config file with grid.* axes")->required();
    grid->add_option("--out", opt.out_dir_override, "output directory (overrides out.dir)");
    grid->add_flag("--force", opt.force, "write into a non-empty output directory");
    grid->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::Range(1, 256));

    CLI::App* preset = app.add_subcommand("preset", "run a built-in experiment campaign");
    preset->add_option("name", preset_name, "one of: table3, fig4, fig5-6, fig7, fig8, fig9")
        ->required();
    preset->add_option("--out", opt.out_dir_override, "output directory");
    preset->add_flag("--force", opt.force, "write into a non-empty output directory");
    preset->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::Range(1, 256));

    CLI::App* validate = app.add_subcommand("validate", "parse and check a config, run nothing");
    validate->add_option("config", config_path, "config file")->required();

    CLI::App* plot = app.add_subcommand("plot", "render learning curves from history files");
    plot->add_option("histories", plot_inputs, "history.csv files")->required()->expected(-1);
    plot->add_option("--out", plot_out, "output SVG path");
    plot->add_option("--metric", plot_metric, "accuracy, auroc, or train_loss");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, opt);
        if (grid->parsed()) return cmd_grid(config_path, opt);
        if (preset->parsed()) return cmd_preset(preset_name, opt);
        if (validate->parsed()) return cmd_validate(config_path);
        if (plot->parsed()) return cmd_plot(plot_inputs, plot_out, plot_metric);
    } catch (const fedfault::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRunError;
    }
    return kExitOk;
}
