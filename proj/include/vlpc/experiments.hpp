#pragma once
// Config loading, Monte-Carlo experiment harnesses and CSV emission.

#include "vlpc/allocator.hpp"
#include "vlpc/csi.hpp"
#include "vlpc/scenario.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace vlpc {

enum class ExperimentKind { positioning_sweep, crlb_map, allocate, sweep };
enum class SweepParam { snr_db, side_length, p_out, p_total, rbar };

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::positioning_sweep;
    SweepParam param = SweepParam::snr_db;
    std::vector<double> values;  // strictly increasing
    int trials = 1000;
    std::uint64_t seed = 1;
    std::string output;

    double p_total = 10.0;
    double rbar = 10e6;
    double p_out = 0.05;
    int n_draws = 10000;
    bool baselines = true;

    int grid = 25;            // crlb-map resolution
    double map_p_p = 1.0;     // positioning power the map assumes
    double sweep_snr_db = 5.0;  // SNR held fixed during a side-length sweep
    Vec3 room{5.0, 5.0, 3.0};

    void validate() const;
};

using Cell = std::variant<double, std::string>;

struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

struct LoadedConfig {
    Scenario scenario;
    ExperimentConfig experiment;
    std::vector<std::string> warnings;  // unknown fields, forward compatibility
};

/// Parse + validate a JSON config; defaults fill every omitted field.
/// Throws std::invalid_argument naming each offending field (all of them).
LoadedConfig load_config(const std::string& path);
LoadedConfig parse_config(const std::string& json_text);

/// RMSE and sqrt(CRLB) versus SNR (or PD-triangle side length). Common random
/// numbers across sweep points; trials parallelize under VLPC_THREADS.
ResultTable run_positioning_sweep(const Scenario& s, const ExperimentConfig& cfg);

/// sqrt(CRLB) on a grid over the room at the MU height.
ResultTable run_crlb_map(const Scenario& s, const ExperimentConfig& cfg);

/// One robust allocation plus (optionally) the non-robust and equal-power
/// baseline rows.
ResultTable run_allocate(const Scenario& s, const ExperimentConfig& cfg);

/// bcd_optimize per sweep point plus Monte-Carlo outage / average rate.
/// Infeasible points become rows with status "infeasible"; the sweep continues.
ResultTable run_allocation_sweep(const Scenario& s, const ExperimentConfig& cfg);

struct RateMcStats {
    double outage = 0.0;
    double outage_stderr = 0.0;
    double avg_rate = 0.0;      // mean of the rate lower bound [bit/s]
    double rate_stderr = 0.0;
};

/// Gaussian Delta-h Monte Carlo of the rate lower bound for a fixed design.
RateMcStats rate_outage_mc(const Scenario& s, const Eigen::VectorXd& h_hat,
                           const Eigen::VectorXd& v, double p_c, const CsiMoments& moments,
                           double rbar, int n_draws, std::uint64_t seed);

/// Fraction of Delta-h ~ N(mu, D) draws with rate lower bound <= rbar.
double empirical_outage(const Scenario& s, const AllocationResult& allocation,
                        const CsiMoments& moments, double rbar, int n_draws, std::uint64_t seed);

/// RFC-4180-style CSV: header row, '.' decimals, LF terminators, 17
/// significant digits so a round-trip parse is exact.
void emit_csv(const ResultTable& table, const std::string& path);
std::string to_csv(const ResultTable& table);

}  // namespace vlpc
