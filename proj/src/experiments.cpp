#include "vlpc/experiments.hpp"

#include "vlpc/fisher.hpp"
#include "vlpc/ook_rate.hpp"
#include "vlpc/positioning.hpp"
#include "vlpc/rng.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>

namespace vlpc {

using nlohmann::json;

void ExperimentConfig::validate() const {
    std::vector<std::string> bad;
    if (trials < 1) bad.push_back("experiment.trials must be >= 1");
    if (n_draws < 1000) bad.push_back("experiment.n_draws must be >= 1000");
    if (grid < 1) bad.push_back("experiment.grid must be >= 1");
    for (std::size_t i = 1; i < values.size(); ++i)
        if (!(values[i] > values[i - 1])) {
            bad.push_back("experiment.values must be strictly increasing");
            break;
        }
    if (kind == ExperimentKind::sweep &&
        (param == SweepParam::snr_db || param == SweepParam::side_length))
        bad.push_back("experiment.param for an allocation sweep must be pout|pt|rbar");
    if (!bad.empty()) {
        std::ostringstream oss;
        oss << "invalid experiment config:";
        for (const auto& b : bad) oss << "\n  - " << b;
        throw std::invalid_argument(oss.str());
    }
}

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config schema error at '" + path + "': " + what);
}

double need_number(const json& j, const std::string& path) {
    if (!j.is_number()) schema_error(path, "expected a number");
    return j.get<double>();
}

Vec3 need_vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) schema_error(path, "expected an array of 3 numbers");
    return Vec3(need_number(j[0], path + "[0]"), need_number(j[1], path + "[1]"),
                need_number(j[2], path + "[2]"));
}

void warn_unknown(const json& obj, std::initializer_list<const char*> known,
                  const std::string& prefix, std::vector<std::string>& warnings) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool found = false;
        for (const char* k : known)
            if (it.key() == k) {
                found = true;
                break;
            }
        if (!found) warnings.push_back("unknown field '" + prefix + it.key() + "' ignored");
    }
}

void parse_scenario(const json& j, Scenario& s, std::vector<std::string>& warnings) {
    warn_unknown(j,
                 {"lamp", "mu_position", "pd_offsets", "pd_triangle_side", "channel", "sigma2_p",
                  "sigma2_c", "bandwidth_hz", "t_p", "t_u", "t_c", "i_dc", "peak_amp", "eps_sym",
                  "p_o_max", "p_e_max"},
                 "scenario.", warnings);
    if (j.contains("lamp")) s.lamp = need_vec3(j["lamp"], "scenario.lamp");
    if (j.contains("mu_position")) s.mu_position = need_vec3(j["mu_position"], "scenario.mu_position");
    if (j.contains("pd_triangle_side"))
        s.pd_offsets = equilateral_pd_offsets(
            need_number(j["pd_triangle_side"], "scenario.pd_triangle_side"));
    if (j.contains("pd_offsets")) {
        if (!j["pd_offsets"].is_array()) schema_error("scenario.pd_offsets", "expected an array");
        s.pd_offsets.clear();
        int i = 0;
        for (const auto& o : j["pd_offsets"])
            s.pd_offsets.push_back(need_vec3(o, "scenario.pd_offsets[" + std::to_string(i++) + "]"));
    }
    if (j.contains("channel")) {
        const json& c = j["channel"];
        warn_unknown(c, {"theta_half_deg", "a_pd", "g_conc", "t_f", "fov_deg"}, "scenario.channel.",
                     warnings);
        if (c.contains("theta_half_deg"))
            s.channel.theta_half_deg = need_number(c["theta_half_deg"], "scenario.channel.theta_half_deg");
        if (c.contains("a_pd")) s.channel.a_pd = need_number(c["a_pd"], "scenario.channel.a_pd");
        if (c.contains("g_conc")) s.channel.g_conc = need_number(c["g_conc"], "scenario.channel.g_conc");
        if (c.contains("t_f")) s.channel.t_f = need_number(c["t_f"], "scenario.channel.t_f");
        if (c.contains("fov_deg")) s.channel.fov_deg = need_number(c["fov_deg"], "scenario.channel.fov_deg");
    }
    auto num = [&](const char* k, double& out) {
        if (j.contains(k)) out = need_number(j[k], std::string("scenario.") + k);
    };
    num("sigma2_p", s.sigma2_p);
    num("sigma2_c", s.sigma2_c);
    num("bandwidth_hz", s.bandwidth_hz);
    num("t_p", s.t_p);
    num("t_u", s.t_u);
    num("t_c", s.t_c);
    num("i_dc", s.i_dc);
    num("peak_amp", s.peak_amp);
    num("eps_sym", s.eps_sym);
    num("p_o_max", s.p_o_max);
    num("p_e_max", s.p_e_max);
}

ExperimentKind parse_kind(const std::string& k) {
    if (k == "positioning-sweep") return ExperimentKind::positioning_sweep;
    if (k == "crlb-map") return ExperimentKind::crlb_map;
    if (k == "allocate") return ExperimentKind::allocate;
    if (k == "sweep") return ExperimentKind::sweep;
    schema_error("experiment.kind", "unknown kind '" + k + "'");
}

SweepParam parse_param(const std::string& p) {
    if (p == "snr_db") return SweepParam::snr_db;
    if (p == "side_length" || p == "l") return SweepParam::side_length;
    if (p == "pout" || p == "p_out") return SweepParam::p_out;
    if (p == "pt" || p == "p_total") return SweepParam::p_total;
    if (p == "rbar") return SweepParam::rbar;
    schema_error("experiment.sweep.param", "unknown parameter '" + p + "'");
}

void parse_experiment(const json& j, ExperimentConfig& e, std::vector<std::string>& warnings) {
    warn_unknown(j,
                 {"kind", "sweep", "trials", "seed", "output", "allocate", "grid", "map_p_p",
                  "sweep_snr_db", "room"},
                 "experiment.", warnings);
    if (j.contains("kind")) {
        if (!j["kind"].is_string()) schema_error("experiment.kind", "expected a string");
        e.kind = parse_kind(j["kind"].get<std::string>());
    }
    if (j.contains("sweep")) {
        const json& sw = j["sweep"];
        warn_unknown(sw, {"param", "values"}, "experiment.sweep.", warnings);
        if (sw.contains("param")) {
            if (!sw["param"].is_string()) schema_error("experiment.sweep.param", "expected a string");
            e.param = parse_param(sw["param"].get<std::string>());
        }
        if (sw.contains("values")) {
            if (!sw["values"].is_array()) schema_error("experiment.sweep.values", "expected an array");
            e.values.clear();
            int i = 0;
            for (const auto& v : sw["values"])
                e.values.push_back(need_number(v, "experiment.sweep.values[" + std::to_string(i++) + "]"));
        }
    }
    if (j.contains("trials")) e.trials = static_cast<int>(need_number(j["trials"], "experiment.trials"));
    if (j.contains("seed"))
        e.seed = static_cast<std::uint64_t>(need_number(j["seed"], "experiment.seed"));
    if (j.contains("output")) {
        if (!j["output"].is_string()) schema_error("experiment.output", "expected a string");
        e.output = j["output"].get<std::string>();
    }
    if (j.contains("allocate")) {
        const json& a = j["allocate"];
        warn_unknown(a, {"p_total", "rbar", "p_out", "n_draws", "baselines"}, "experiment.allocate.",
                     warnings);
        if (a.contains("p_total")) e.p_total = need_number(a["p_total"], "experiment.allocate.p_total");
        if (a.contains("rbar")) e.rbar = need_number(a["rbar"], "experiment.allocate.rbar");
        if (a.contains("p_out")) e.p_out = need_number(a["p_out"], "experiment.allocate.p_out");
        if (a.contains("n_draws"))
            e.n_draws = static_cast<int>(need_number(a["n_draws"], "experiment.allocate.n_draws"));
        if (a.contains("baselines")) {
            if (!a["baselines"].is_boolean())
                schema_error("experiment.allocate.baselines", "expected a boolean");
            e.baselines = a["baselines"].get<bool>();
        }
    }
    if (j.contains("grid")) e.grid = static_cast<int>(need_number(j["grid"], "experiment.grid"));
    if (j.contains("map_p_p")) e.map_p_p = need_number(j["map_p_p"], "experiment.map_p_p");
    if (j.contains("sweep_snr_db")) e.sweep_snr_db = need_number(j["sweep_snr_db"], "experiment.sweep_snr_db");
    if (j.contains("room")) e.room = need_vec3(j["room"], "experiment.room");
}

}  // namespace

LoadedConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config root must be a JSON object");

    LoadedConfig out;
    warn_unknown(j, {"scenario", "experiment"}, "", out.warnings);
    if (j.contains("scenario")) {
        if (!j["scenario"].is_object()) schema_error("scenario", "expected an object");
        parse_scenario(j["scenario"], out.scenario, out.warnings);
    }
    if (j.contains("experiment")) {
        if (!j["experiment"].is_object()) schema_error("experiment", "expected an object");
        parse_experiment(j["experiment"], out.experiment, out.warnings);
    }

    // exhaustive invariant reporting: collect both sets of violations
    std::string errors;
    try {
        out.scenario.validate();
    } catch (const std::invalid_argument& e) {
        errors += e.what();
    }
    try {
        out.experiment.validate();
    } catch (const std::invalid_argument& e) {
        if (!errors.empty()) errors += "\n";
        errors += e.what();
    }
    if (!errors.empty()) throw std::invalid_argument(errors);
    return out;
}

LoadedConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace {

double snr_power(const Scenario& s, double snr_db) {
    const double h1 = los_gain(s, 0, s.mu_position);
    if (h1 <= 0) throw std::domain_error("positioning sweep: PD 1 sees zero gain");
    return std::pow(10.0, snr_db / 10.0) * s.bandwidth_hz * s.sigma2_p / (h1 * h1);
}

// Squared position errors for `trials` independent estimates. Per-trial seeds
// depend only on (seed, trial), giving common random numbers across sweep
// points. Trials are chunked over threads; assembly order is fixed.
std::vector<double> positioning_trials(const Scenario& s, double p_p, int trials,
                                       std::uint64_t seed) {
    std::vector<double> sq(static_cast<std::size_t>(trials));
    const Vec3 init(s.lamp.x(), s.lamp.y(), s.lamp.z() / 2.0);
    auto run_range = [&](int begin, int end) {
        for (int t = begin; t < end; ++t) {
            const RssObservation obs =
                simulate_gain_estimates(s, p_p, splitmix64(seed ^ splitmix64(t)));
            const PositionEstimate est = solve_position(s, obs.gain_estimate, init);
            sq[static_cast<std::size_t>(t)] = (est.u_hat - s.mu_position).squaredNorm();
        }
    };
    const int threads = std::min(thread_budget(), trials);
    if (threads <= 1) {
        run_range(0, trials);
    } else {
        std::vector<std::future<void>> jobs;
        const int chunk = (trials + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int b = t * chunk, e = std::min(trials, b + chunk);
            if (b < e) jobs.push_back(std::async(std::launch::async, run_range, b, e));
        }
        for (auto& jb : jobs) jb.get();
    }
    return sq;
}

void rmse_row(const std::vector<double>& sq, double& rmse, double& stderr_out) {
    const double n = static_cast<double>(sq.size());
    double mean = 0;
    for (double v : sq) mean += v;
    mean /= n;
    double var = 0;
    for (double v : sq) var += (v - mean) * (v - mean);
    var /= std::max(1.0, n - 1.0);
    rmse = std::sqrt(mean);
    stderr_out = (rmse > 0) ? std::sqrt(var / n) / (2.0 * rmse) : 0.0;
}

}  // namespace

ResultTable run_positioning_sweep(const Scenario& s, const ExperimentConfig& cfg) {
    const bool snr_sweep = cfg.param == SweepParam::snr_db;
    std::vector<double> values = cfg.values;
    if (values.empty()) {
        if (snr_sweep) values = {0, 5, 10, 15, 20, 25, 30};
        else values = {0.05, 0.1, 0.2, 0.3, 0.5};
    }

    ResultTable tab;
    tab.columns = {snr_sweep ? "snr_db" : "side_length_m", "p_p_w",
                   "rmse_m", "rmse_stderr_m", "sqrt_crlb_m", "trials"};
    for (double v : values) {
        Scenario sc = s;
        double p_p;
        if (snr_sweep) {
            p_p = snr_power(sc, v);
        } else {
            sc.pd_offsets = equilateral_pd_offsets(v);
            p_p = snr_power(sc, cfg.sweep_snr_db);
        }
        const std::vector<double> sq = positioning_trials(sc, p_p, cfg.trials, cfg.seed);
        double rmse, se;
        rmse_row(sq, rmse, se);
        const double crlb = crlb_trace(fim(sc, sc.mu_position, p_p));
        tab.rows.push_back({v, p_p, rmse, se, std::sqrt(crlb), double(cfg.trials)});
    }
    return tab;
}

ResultTable run_crlb_map(const Scenario& s, const ExperimentConfig& cfg) {
    ResultTable tab;
    tab.columns = {"x_m", "y_m", "sqrt_crlb_m"};
    for (int i = 0; i < cfg.grid; ++i)
        for (int j = 0; j < cfg.grid; ++j) {
            Scenario sc = s;
            sc.mu_position.x() = (i + 0.5) * cfg.room.x() / cfg.grid;
            sc.mu_position.y() = (j + 0.5) * cfg.room.y() / cfg.grid;
            double val = std::numeric_limits<double>::quiet_NaN();
            try {
                val = std::sqrt(crlb_trace(fim(sc, sc.mu_position, cfg.map_p_p)));
            } catch (const std::exception&) {
                // unlocalizable cell (out of FoV / degenerate); keep NaN
            }
            tab.rows.push_back({sc.mu_position.x(), sc.mu_position.y(), val});
        }
    return tab;
}

RateMcStats rate_outage_mc(const Scenario& s, const Eigen::VectorXd& h_hat,
                           const Eigen::VectorXd& v, double p_c, const CsiMoments& moments,
                           double rbar, int n_draws, std::uint64_t seed) {
    const int m = static_cast<int>(h_hat.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(moments.d);
    const Eigen::MatrixXd sqrt_d = es.eigenvectors() *
                                   es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                                   es.eigenvectors().transpose();
    auto eng = make_engine(seed, 0xabcdULL);
    std::normal_distribution<double> normal(0.0, 1.0);

    long outage_count = 0;
    double rate_sum = 0, rate_sq = 0;
    Eigen::VectorXd zvec(m);
    for (int k = 0; k < n_draws; ++k) {
        for (int i = 0; i < m; ++i) zvec[i] = normal(eng);
        const Eigen::VectorXd dh = moments.mu + sqrt_d * zvec;
        const double s_eff = v.dot(h_hat + dh);
        const double rate = rate_lower_bound({s_eff, p_c, s.peak_amp, s.bandwidth_hz, s.sigma2_c});
        if (rate <= rbar) ++outage_count;
        rate_sum += rate;
        rate_sq += rate * rate;
    }
    RateMcStats st;
    const double n = static_cast<double>(n_draws);
    st.outage = outage_count / n;
    st.outage_stderr = std::sqrt(std::max(st.outage * (1 - st.outage), 0.0) / n);
    st.avg_rate = rate_sum / n;
    const double var = std::max(0.0, (rate_sq - n * st.avg_rate * st.avg_rate) / (n - 1));
    st.rate_stderr = std::sqrt(var / n);
    return st;
}

double empirical_outage(const Scenario& s, const AllocationResult& allocation,
                        const CsiMoments& moments, double rbar, int n_draws, std::uint64_t seed) {
    if (n_draws < 1000) throw std::invalid_argument("empirical_outage: n_draws >= 1000 required");
    return rate_outage_mc(s, allocation.h_hat, allocation.v, allocation.p_c, moments, rbar,
                          n_draws, seed).outage;
}

namespace {

const std::vector<std::string> kAllocColumns = {
    "design",  "param",        "value",       "p_p_w",          "p_c_w",
    "crlb_m2", "avg_rate_bps", "rate_stderr", "empirical_outage", "outage_stderr",
    "status",  "iterations",   "draws"};

std::vector<Cell> alloc_row(const Scenario& s, const ExperimentConfig& cfg,
                            const std::string& design, const std::string& param, double value,
                            const AllocationResult& res) {
    const RateMcStats mc = rate_outage_mc(s, res.h_hat, res.v, res.p_c, res.moments, cfg.rbar,
                                          cfg.n_draws, cfg.seed + 7777);
    return {design,       param,       value,
            res.p_p,      res.p_c,     res.crlb,
            mc.avg_rate,  mc.rate_stderr, mc.outage,
            mc.outage_stderr, std::string(res.converged ? "ok" : "max-iters"),
            double(res.iterations), double(cfg.n_draws)};
}

std::vector<Cell> failed_row(const std::string& design, const std::string& param, double value,
                             const std::string& status) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {design, param, value, nan, nan, nan, nan, nan, nan, nan, status, 0.0, 0.0};
}

// Non-robust design: treat h_hat as the truth and spend exactly the power
// that makes the rate lower bound hit rbar.
AllocationResult non_robust_design(const Scenario& s, const ExperimentConfig& cfg) {
    const AllocationConfig ac = AllocationConfig::for_scenario(s, cfg.p_total, cfg.rbar, cfg.p_out);
    AllocationResult res;
    res.h_hat = los_gains(s, s.mu_position);
    res.delta = delta_threshold(cfg.rbar, s.bandwidth_hz, s.sigma2_c, s.peak_amp);
    res.v = res.h_hat.normalized();
    res.v_matrix = res.v * res.v.transpose();
    const double s_eff2 = res.h_hat.squaredNorm();
    res.p_c = res.delta / s_eff2;
    if (res.p_c > std::min(ac.p_c_max, cfg.p_total))
        throw InfeasibleError("non-robust design: rate target exceeds the budget");
    res.p_p = std::min(ac.p_p_max, cfg.p_total - res.p_c);
    res.crlb = crlb_trace(fim(s, s.mu_position, res.p_p));
    res.moments = csi_moments(s, s.mu_position,
                              position_error_covariance(fim(s, s.mu_position, res.p_p)),
                              ac.moment_samples, ac.moment_seed);
    res.converged = true;
    res.rank1 = true;
    return res;
}

AllocationResult equal_power_design(const Scenario& s, const ExperimentConfig& cfg) {
    const AllocationConfig ac = AllocationConfig::for_scenario(s, cfg.p_total, cfg.rbar, cfg.p_out);
    AllocationResult res;
    res.h_hat = los_gains(s, s.mu_position);
    res.v = res.h_hat.normalized();
    res.v_matrix = res.v * res.v.transpose();
    res.p_p = std::min(ac.p_p_max, cfg.p_total / 2.0);
    res.p_c = std::min(ac.p_c_max, cfg.p_total / 2.0);
    res.crlb = crlb_trace(fim(s, s.mu_position, res.p_p));
    res.moments = csi_moments(s, s.mu_position,
                              position_error_covariance(fim(s, s.mu_position, res.p_p)),
                              ac.moment_samples, ac.moment_seed);
    res.converged = true;
    res.rank1 = true;
    return res;
}

}  // namespace

ResultTable run_allocate(const Scenario& s, const ExperimentConfig& cfg) {
    ResultTable tab;
    tab.columns = kAllocColumns;
    const AllocationConfig ac = AllocationConfig::for_scenario(s, cfg.p_total, cfg.rbar, cfg.p_out);
    const AllocationResult robust = bcd_optimize(s, s.mu_position, ac, cfg.seed);
    tab.rows.push_back(alloc_row(s, cfg, "robust", "p_out", cfg.p_out, robust));
    if (cfg.baselines) {
        try {
            tab.rows.push_back(alloc_row(s, cfg, "non-robust", "p_out", cfg.p_out,
                                         non_robust_design(s, cfg)));
        } catch (const InfeasibleError&) {
            tab.rows.push_back(failed_row("non-robust", "p_out", cfg.p_out, "infeasible"));
        }
        tab.rows.push_back(alloc_row(s, cfg, "equal-power", "p_out", cfg.p_out,
                                     equal_power_design(s, cfg)));
    }
    return tab;
}

ResultTable run_allocation_sweep(const Scenario& s, const ExperimentConfig& cfg) {
    ResultTable tab;
    tab.columns = kAllocColumns;
    std::string pname;
    switch (cfg.param) {
        case SweepParam::p_out: pname = "p_out"; break;
        case SweepParam::p_total: pname = "p_total"; break;
        case SweepParam::rbar: pname = "rbar"; break;
        default: throw std::invalid_argument("allocation sweep: parameter must be pout|pt|rbar");
    }
    for (double v : cfg.values) {
        ExperimentConfig point = cfg;
        if (cfg.param == SweepParam::p_out) point.p_out = v;
        else if (cfg.param == SweepParam::p_total) point.p_total = v;
        else point.rbar = v;
        const AllocationConfig ac =
            AllocationConfig::for_scenario(s, point.p_total, point.rbar, point.p_out);
        try {
            const AllocationResult res = bcd_optimize(s, s.mu_position, ac, cfg.seed);
            tab.rows.push_back(alloc_row(s, point, "robust", pname, v, res));
        } catch (const InfeasibleError&) {
            tab.rows.push_back(failed_row("robust", pname, v, "infeasible"));
        }
    }
    return tab;
}

std::string to_csv(const ResultTable& table) {
    std::ostringstream oss;
    auto put_text = [&oss](const std::string& s) {
        if (s.find_first_of(",\"\n") != std::string::npos) {
            oss << '"';
            for (char c : s) {
                if (c == '"') oss << '"';
                oss << c;
            }
            oss << '"';
        } else {
            oss << s;
        }
    };
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (i) oss << ',';
        put_text(table.columns[i]);
    }
    oss << '\n';
    char buf[64];
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) oss << ',';
            if (std::holds_alternative<double>(row[i])) {
                std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(row[i]));
                oss << buf;
            } else {
                put_text(std::get<std::string>(row[i]));
            }
        }
        oss << '\n';
    }
    return oss.str();
}

void emit_csv(const ResultTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_csv: cannot open for writing: " + path);
    out << to_csv(table);
    if (!out) throw std::runtime_error("emit_csv: write failed: " + path);
}

}  // namespace vlpc
