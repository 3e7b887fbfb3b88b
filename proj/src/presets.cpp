#include <stdexcept>
#include <string>

#include "fedfault/experiment.hpp"

namespace fedfault {

namespace {

// Desk-scale stand-ins for the two measurement campaigns: a three-site
// pasture profile with disparate volumes and partial class coverage, and a
// many-client camera profile with equal volumes. Geometry constants are
// chosen so the fault-free runs land in the high-but-not-saturated accuracy
// band where degradations stay visible.
constexpr double kPastureSeparation = 3.0;
constexpr double kPastureSigma = 1.1;
constexpr double kCameraSeparation = 3.0;
constexpr double kCameraSigma = 2.0;
constexpr double kCameraEta = 0.05;

void pasture_profile(experiment_config& c) {
    c.arch = model_arch{2, 4, 0};
    c.data_kind = "synthetic";
    c.total_samples = 12000;
    c.class_separation = kPastureSeparation;
    c.noise_sigma = kPastureSigma;
    c.sites = {{0.5746, {0, 1, 2}, std::nullopt},
               {0.2893, {1, 2, 3}, std::nullopt},
               {0.0596, {0, 3}, std::nullopt}};
    c.eta = 0.05;
    c.local_epochs = 1;
    c.batch_size = 50;
    c.eval_every = 10;
    c.replicates = 5;
    c.plot = true;
}

void camera_profile(experiment_config& c, int clients) {
    // the informative signal lives in two coordinates; the rest are noise
    // dims the model has to learn to ignore, which keeps ranking quality
    // sensitive to how much clean data actually reaches the federation. The
    // hidden layer matters for the fault studies: a linear softmax ranks by
    // direction alone and shrugs off any learning rate, while a saturating
    // net genuinely falls over when one client trains too hot
    c.arch = model_arch{12, 4, 16};
    c.data_kind = "synthetic";
    c.total_samples = 6000;
    c.class_separation = kCameraSeparation;
    c.noise_sigma = kCameraSigma;
    c.sites.clear();
    std::vector<int> all{0, 1, 2, 3};
    // equal volumes with 4% of the pool left unassigned; demanding the whole
    // pool is infeasible once stratified-split rounding shaves a few samples
    for (int k = 0; k < clients; ++k)
        c.sites.push_back({0.96 / static_cast<double>(clients), all, std::nullopt});
    c.class_weighting = true;
    c.eta = kCameraEta;
    c.local_epochs = 1;
    c.batch_size = 50;
    c.eval_every = 10;
    c.replicates = 5;
    c.plot = true;
}

grid_cell cell_of(std::vector<std::pair<std::string, std::string>> assignments) {
    grid_cell c;
    for (size_t i = 0; i < assignments.size(); ++i) {
        if (i) c.name += ";";
        c.name += assignments[i].first + "=" + assignments[i].second;
    }
    if (c.name.empty()) c.name = "base";
    c.assignments = std::move(assignments);
    return c;
}

std::string fmt_eta(double v) {
    std::string s = std::to_string(v);
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"table3", "fig4", "fig5-6", "fig7", "fig8", "fig9"};
}

preset_def make_preset(const std::string& name) {
    preset_def p;
    experiment_config& c = p.cfg;

    if (name == "table3") {
        // hyperparameter sweep with all three approaches side by side
        pasture_profile(c);
        c.rounds = 200;
        c.baseline_centralized = true;
        c.baseline_all_locals = true;
        c.out_dir = "out/table3";
        const int tuples[][3] = {{1, 10, 200},  {5, 10, 200},  {20, 10, 200}, {1, 50, 200},
                                 {5, 50, 200},  {20, 50, 200}, {1, 50, 2000}, {1, 50, 10000}};
        for (const auto& t : tuples)
            p.cells.push_back(cell_of({{"fed.epochs", std::to_string(t[0])},
                                       {"fed.batch", std::to_string(t[1])},
                                       {"fed.rounds", std::to_string(t[2])}}));
        return p;
    }

    if (name == "fig4") {
        // complete dropout: each site in turn, four participation rates
        pasture_profile(c);
        c.rounds = 500;
        c.out_dir = "out/fig4";
        for (int k = 0; k < 3; ++k)
            for (const char* rate : {"1", "0.75", "0.5", "0.25"})
                p.cells.push_back(
                    cell_of({{"scenario.client." + std::to_string(k) + ".participation", rate}}));
        return p;
    }

    if (name == "fig5-6") {
        // partial dropout: one unreliable link direction per cell
        pasture_profile(c);
        c.rounds = 500;
        c.out_dir = "out/fig5-6";
        for (int k = 0; k < 3; ++k)
            for (const char* dir : {"upload", "download"})
                for (const char* rate : {"1", "0.75", "0.5", "0.25"})
                    p.cells.push_back(cell_of(
                        {{"scenario.client." + std::to_string(k) + "." + dir, rate}}));
        return p;
    }

    if (name == "fig7") {
        // mislabelled clients: all clean, 7 of 15 corrupted, corrupted removed
        camera_profile(c, 15);
        c.rounds = 300;
        c.out_dir = "out/fig7";
        grid_cell a;
        a.name = "case=clean";
        p.cells.push_back(a);
        grid_cell b;
        b.name = "case=corrupted";
        for (int k = 0; k < 7; ++k)
            b.assignments.push_back(
                {"scenario.client." + std::to_string(k) + ".flip_fraction", "0.5"});
        p.cells.push_back(b);
        grid_cell excl;
        excl.name = "case=excluded";
        for (int k = 0; k < 7; ++k)
            excl.assignments.push_back(
                {"scenario.client." + std::to_string(k) + ".participation", "0"});
        p.cells.push_back(excl);
        return p;
    }

    if (name == "fig8") {
        // one client with a persistently wrong learning rate
        camera_profile(c, 6);
        c.rounds = 300;
        c.out_dir = "out/fig8";
        for (int m : {1, 2, 5, 10, 20, 50, 100})
            p.cells.push_back(cell_of(
                {{"scenario.client.0.eta", fmt_eta(kCameraEta * static_cast<double>(m))}}));
        return p;
    }

    if (name == "fig9") {
        // mislabelled data and a wrong learning rate on the same client
        camera_profile(c, 6);
        c.rounds = 300;
        c.out_dir = "out/fig9";
        for (int m : {1, 10}) {
            grid_cell cell;
            cell.name = "flip=0.5;eta_mult=" + std::to_string(m);
            cell.assignments.push_back({"scenario.client.0.flip_fraction", "0.5"});
            cell.assignments.push_back(
                {"scenario.client.0.eta", fmt_eta(kCameraEta * static_cast<double>(m))});
            p.cells.push_back(cell);
        }
        return p;
    }

    throw config_error("unknown preset '" + name + "'; known presets: table3, fig4, fig5-6, fig7, fig8, fig9");
}

}  // namespace fedfault
