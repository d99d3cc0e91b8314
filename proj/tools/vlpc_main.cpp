// vlpc: simulation and robust power-allocation experiments for a single-lamp
// visible-light positioning and communication system.

#include "vlpc/experiments.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

namespace {

int run(int argc, char** argv) {
    CLI::App app{"Single-lamp VLPC simulation and robust power allocation"};
    app.require_subcommand(1);

    std::string config_path, out_path, param = "pout", values_csv;
    std::uint64_t seed = 0;
    bool have_seed = false;
    double pt = -1, rbar = -1, pout = -1;
    int grid = 0, trials = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (defaults used when omitted)");
        cmd->add_option("--out", out_path, "output CSV path")->required();
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t v) { seed = v; have_seed = true; }, "master RNG seed");
    };

    CLI::App* pos = app.add_subcommand("position-sweep", "RMSE and sqrt(CRLB) vs SNR (or L)");
    add_common(pos);
    pos->add_option("--trials", trials, "Monte-Carlo trials per sweep point");

    CLI::App* alloc = app.add_subcommand("allocate", "one robust allocation plus baselines");
    add_common(alloc);
    alloc->add_option("--pt", pt, "total power budget [W]");
    alloc->add_option("--rbar", rbar, "minimum rate [bit/s]");
    alloc->add_option("--pout", pout, "outage tolerance in (0,1)");

    CLI::App* sweep = app.add_subcommand("sweep", "robust allocation across a parameter sweep");
    add_common(sweep);
    sweep->add_option("--param", param, "swept parameter: pout | pt | rbar")->required();
    sweep->add_option("--values", values_csv, "comma-separated sweep values")->required();
    sweep->add_option("--pt", pt, "total power budget [W]");
    sweep->add_option("--rbar", rbar, "minimum rate [bit/s]");
    sweep->add_option("--pout", pout, "outage tolerance in (0,1)");

    CLI::App* map = app.add_subcommand("crlb-map", "sqrt(CRLB) over a horizontal grid");
    add_common(map);
    map->add_option("--grid", grid, "grid resolution per axis");

    CLI11_PARSE(app, argc, argv);

    vlpc::LoadedConfig loaded;
    if (!config_path.empty()) loaded = vlpc::load_config(config_path);
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";

    vlpc::Scenario& sc = loaded.scenario;
    vlpc::ExperimentConfig& cfg = loaded.experiment;
    if (have_seed) cfg.seed = seed;
    if (pt > 0) cfg.p_total = pt;
    if (rbar >= 0) cfg.rbar = rbar;
    if (pout > 0) cfg.p_out = pout;
    if (grid > 0) cfg.grid = grid;
    if (trials > 0) cfg.trials = trials;
    sc.validate();

    vlpc::ResultTable table;
    if (app.got_subcommand(pos)) {
        if (cfg.kind != vlpc::ExperimentKind::positioning_sweep &&
            cfg.param != vlpc::SweepParam::side_length)
            cfg.param = vlpc::SweepParam::snr_db;
        table = vlpc::run_positioning_sweep(sc, cfg);
    } else if (app.got_subcommand(alloc)) {
        table = vlpc::run_allocate(sc, cfg);
    } else if (app.got_subcommand(sweep)) {
        cfg.values.clear();
        std::stringstream ss(values_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.values.push_back(std::stod(tok));
        if (param == "pout") cfg.param = vlpc::SweepParam::p_out;
        else if (param == "pt") cfg.param = vlpc::SweepParam::p_total;
        else if (param == "rbar") cfg.param = vlpc::SweepParam::rbar;
        else throw std::invalid_argument("--param must be pout, pt or rbar");
        cfg.kind = vlpc::ExperimentKind::sweep;
        cfg.validate();
        table = vlpc::run_allocation_sweep(sc, cfg);
    } else if (app.got_subcommand(map)) {
        table = vlpc::run_crlb_map(sc, cfg);
    }

    vlpc::emit_csv(table, out_path);
    std::cerr << "wrote " << table.rows.size() << " rows to " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const vlpc::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
