#include "vlpc/allocator.hpp"

#include "vlpc/fisher.hpp"
#include "vlpc/ook_rate.hpp"
#include "vlpc/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace vlpc {

AllocationConfig AllocationConfig::for_scenario(const Scenario& s, double p_total, double rbar,
                                                double p_out) {
    AllocationConfig c;
    c.p_total = p_total;
    c.rbar = rbar;
    c.p_out = p_out;
    const double a2 = s.peak_amp * s.peak_amp;
    const double idc2 = s.i_dc * s.i_dc;
    const double optical_headroom = std::max(s.p_o_max - s.i_dc, 0.0);
    c.p_p_max = std::min({idc2 / a2, optical_headroom * optical_headroom / a2,
                          std::max(s.p_e_max - idc2, 0.0) / s.eps_sym});
    c.p_c_max = std::min(s.p_o_max * s.p_o_max / a2, 2.0 * s.p_e_max / a2);
    return c;
}

void AllocationConfig::validate() const {
    std::vector<std::string> bad;
    if (!(p_out > 0 && p_out < 1)) bad.push_back("p_out must lie in (0,1)");
    if (!(p_total > 0)) bad.push_back("p_total must be positive");
    if (!(rbar >= 0)) bad.push_back("rbar must be nonnegative");
    if (!(p_p_max >= 0) || !(p_c_max >= 0)) bad.push_back("power caps must be nonnegative");
    if (max_iters < 1) bad.push_back("max_iters must be >= 1");
    if (moment_samples < 2) bad.push_back("moment_samples must be >= 2");
    if (!(bcd_tol > 0)) bad.push_back("bcd_tol must be positive");
    if (!bad.empty()) {
        std::ostringstream oss;
        oss << "invalid allocation config:";
        for (const auto& b : bad) oss << " " << b << ";";
        throw std::invalid_argument(oss.str());
    }
}

namespace {

// Tr(Omega * X) as Expr terms on block `blk`.
void add_trace_product(sdp::Expr& e, int blk, const Eigen::MatrixXd& omega, double factor) {
    const int n = static_cast<int>(omega.rows());
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double c = (i == j) ? omega(i, i) : omega(i, j) + omega(j, i);
            if (c != 0.0) e.add(blk, i, j, factor * c);
        }
}

sdp::SolveOptions vlc_solver_options() {
    sdp::SolveOptions opt;
    opt.tol_gap = 1e-9;
    opt.tol_feas = 2e-9;  // row scaling maps this to ~1e-7 public violations
    return opt;
}

}  // namespace

double worst_case_cvar_quadratic(const Eigen::MatrixXd& q_mat, const Eigen::VectorXd& q_vec,
                                 double q0, const Eigen::VectorXd& mu,
                                 const Eigen::MatrixXd& sigma, double rho) {
    const int n = static_cast<int>(mu.size());
    if (q_mat.rows() != n || q_mat.cols() != n || q_vec.size() != n || sigma.rows() != n ||
        sigma.cols() != n)
        throw std::invalid_argument("worst_case_cvar_quadratic: dimension mismatch");
    if (!(rho > 0 && rho < 1)) throw std::invalid_argument("worst_case_cvar_quadratic: rho in (0,1)");
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1 + sigma.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("worst_case_cvar_quadratic: sigma not symmetric");
    if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma).eigenvalues().minCoeff() <
        -1e-9 * (1 + sigma.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("worst_case_cvar_quadratic: sigma not PSD");

    Eigen::MatrixXd omega(n + 1, n + 1);
    omega.topLeftCorner(n, n) = sigma + mu * mu.transpose();
    omega.topRightCorner(n, 1) = mu;
    omega.bottomLeftCorner(1, n) = mu.transpose();
    omega(n, n) = 1.0;

    sdp::SdpProblem p;
    const int bm = p.add_psd_block(n + 1);  // auxiliary moment matrix
    const int bs = p.add_psd_block(n + 1);  // slack of the shifted LMI
    const int beta = p.add_free_var();

    sdp::Expr obj;
    obj.add_free(beta, 1.0);
    add_trace_product(obj, bm, omega, 1.0 / rho);
    p.set_objective(obj);

    // bs = bm - [[Q, q/2], [q^T/2, q0 - beta]]
    for (int i = 0; i <= n; ++i)
        for (int j = i; j <= n; ++j) {
            sdp::Expr e;
            e.add(bs, i, j, 1.0).add(bm, i, j, -1.0);
            double rhs;
            if (j < n) rhs = -q_mat(i, j);
            else if (i < n) rhs = -q_vec(i) / 2.0;
            else {
                e.add_free(beta, -1.0);  // S_nn = M_nn - q0 + beta
                rhs = -q0;
            }
            p.add_eq(std::move(e), rhs);
        }

    const sdp::SdpSolution sol = sdp::solve(p, vlc_solver_options());
    if (sol.status != sdp::Status::optimal)
        throw std::runtime_error(std::string("worst_case_cvar_quadratic: solver status ") +
                                 sdp::to_string(sol.status));
    return sol.objective;
}

namespace {

// Conjugation of the CSI-error coordinates that balances the CVaR
// certificate: the optimal W top-left block scales like ||V h|| / std(Delta h),
// so expressing the error in units of sqrt(std/||V h||) keeps it O(1) for the
// solver. vh_norm is ||V h|| in normalized gain units (1 for the SDR problem,
// |v^T h| for a fixed rank-one beamformer).
double uncertainty_coordinate_scale(const Eigen::MatrixXd& omega_gain_normalized,
                                    double vh_norm) {
    const int m = static_cast<int>(omega_gain_normalized.rows()) - 1;
    const double var = omega_gain_normalized.topLeftCorner(m, m).diagonal().mean();
    const double sd = std::sqrt(std::max(var, 1e-18));
    return std::sqrt(std::max(vh_norm, 1e-4) / sd);
}

}  // namespace

VlcSdp build_vlc_sdp(const Eigen::VectorXd& h_hat, const Eigen::MatrixXd& omega, double delta,
                     const AllocationConfig& config, double p_c_bound) {
    const int m = static_cast<int>(h_hat.size());
    if (omega.rows() != m + 1 || omega.cols() != m + 1)
        throw std::invalid_argument("build_vlc_sdp: omega must be (M+1)x(M+1)");
    if (!(delta > 0)) throw std::invalid_argument("build_vlc_sdp: delta must be positive");
    const double gs = h_hat.norm();
    if (!(gs > 0)) throw std::invalid_argument("build_vlc_sdp: h_hat is zero");

    VlcSdp out;
    out.gain_scale = gs;
    out.power_scale = delta / (gs * gs);
    out.p_c_bound = p_c_bound;

    const Eigen::VectorXd ht = h_hat / gs;
    // Omega in normalized gain units: scale the first M rows/cols by 1/gs.
    Eigen::VectorXd d_scale(m + 1);
    d_scale.head(m).setConstant(1.0 / gs);
    d_scale(m) = 1.0;
    Eigen::MatrixXd omega_t = d_scale.asDiagonal() * omega * d_scale.asDiagonal();
    const double c0 = uncertainty_coordinate_scale(omega_t, 1.0);
    out.uncertainty_scale = c0;
    Eigen::VectorXd c_scale(m + 1);
    c_scale.head(m).setConstant(c0);
    c_scale(m) = 1.0;
    omega_t = (c_scale.asDiagonal() * omega_t * c_scale.asDiagonal()).eval();

    sdp::SdpProblem& p = out.problem;
    out.block_v = p.add_psd_block(m);
    out.block_w = p.add_psd_block(m + 1);
    out.block_s = p.add_psd_block(m + 1);  // S = W + [[V, V ht], [ht^T V, ht^T V ht - t + beta]]
    out.block_t = p.add_psd_block(2);      // [[t, 1], [1, P_c]] encodes t P_c >= delta (scaled)
    out.free_beta = p.add_free_var();

    sdp::Expr obj;
    obj.add(out.block_t, 1, 1, 1.0);  // minimize scaled P_c
    p.set_objective(obj);

    {
        sdp::Expr e;
        for (int i = 0; i < m; ++i) e.add(out.block_v, i, i, 1.0);
        p.add_eq(std::move(e), 1.0);  // Tr(V) = 1
    }
    {
        sdp::Expr e;
        e.add(out.block_t, 0, 1, 1.0);
        p.add_eq(std::move(e), 1.0);  // off-diagonal sqrt(delta) in scaled units
    }
    for (int i = 0; i <= m; ++i)
        for (int j = i; j <= m; ++j) {
            sdp::Expr e;
            e.add(out.block_s, i, j, 1.0).add(out.block_w, i, j, -1.0);
            if (j < m) {
                e.add(out.block_v, i, j, -1.0 / (c0 * c0));
            } else if (i < m) {
                for (int k = 0; k < m; ++k) e.add(out.block_v, i, k, -ht[k] / c0);
            } else {
                for (int k = 0; k < m; ++k)
                    for (int l = k; l < m; ++l)
                        e.add(out.block_v, k, l, (k == l) ? -ht[k] * ht[l] : -2.0 * ht[k] * ht[l]);
                e.add(out.block_t, 0, 0, 1.0);   // + t
                e.add_free(out.free_beta, -1.0); // - beta
            }
            p.add_eq(std::move(e), 0.0);
        }
    {
        // beta + Tr(Omega W)/p_out <= 0, stated as p_out beta + Tr(Omega W) <= 0
        // so the row's coefficients stay O(1) for any outage tolerance
        sdp::Expr e;
        e.add_free(out.free_beta, config.p_out);
        add_trace_product(e, out.block_w, omega_t, 1.0);
        p.add_ineq(std::move(e), 0.0);
    }
    return out;
}

namespace {

VlcSolution finish_vlc(const VlcSdp& built, const sdp::SdpSolution& sol) {
    if (sol.status == sdp::Status::infeasible)
        throw InfeasibleError("VLC subproblem infeasible: rate/outage requirements unattainable");
    if (sol.status != sdp::Status::optimal)
        throw std::runtime_error(std::string("VLC subproblem: solver status ") +
                                 sdp::to_string(sol.status));
    const sdp::VerifyReport rep = sdp::verify_solution(built.problem, sol);
    if (!rep.pass) {
        std::ostringstream oss;
        oss << "VLC subproblem: solution failed verification:";
        for (const auto& c : rep.checks)
            if (!c.pass) oss << " [" << c.name << " " << c.value << " > " << c.limit << "]";
        throw std::runtime_error(oss.str());
    }

    const double gs2 = built.gain_scale * built.gain_scale;
    VlcSolution v;
    v.p_c = sol.psd[static_cast<std::size_t>(built.block_t)](1, 1) * built.power_scale;
    if (v.p_c > built.p_c_bound * (1.0 + 1e-9))
        throw InfeasibleError("VLC subproblem: minimal P_c exceeds its cap");
    if (built.block_v >= 0) {
        v.v_matrix = sol.psd[static_cast<std::size_t>(built.block_v)];
        const Eigen::VectorXd ev =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(v.v_matrix).eigenvalues();
        const int n = static_cast<int>(ev.size());
        v.rank_ratio = std::max(0.0, ev[n - 2]) / std::max(ev[n - 1], 1e-300);
    } else {
        v.rank_ratio = 0.0;
    }
    Eigen::MatrixXd w = sol.psd[static_cast<std::size_t>(built.block_w)];
    const int mp1 = static_cast<int>(w.rows());
    // undo the gain and uncertainty normalizations of the certificate
    Eigen::VectorXd u_scale(mp1);
    u_scale.head(mp1 - 1).setConstant(built.uncertainty_scale);
    u_scale(mp1 - 1) = built.gain_scale;
    v.certificate.w = u_scale.asDiagonal() * w * u_scale.asDiagonal();
    v.certificate.beta = sol.free[0] * gs2;
    v.certificate.t = sol.psd[static_cast<std::size_t>(built.block_t)](0, 0) * gs2;
    return v;
}

}  // namespace

VlcSolution solve_vlc_subproblem(const Eigen::VectorXd& h_hat, const Eigen::MatrixXd& omega,
                                 double delta, const AllocationConfig& config, double p_c_bound) {
    const VlcSdp built = build_vlc_sdp(h_hat, omega, delta, config, p_c_bound);
    const sdp::SdpSolution sol = sdp::solve(built.problem, vlc_solver_options());
    return finish_vlc(built, sol);
}

double vlp_power_update(double p_c, const AllocationConfig& config) {
    if (p_c > config.p_total)
        throw InfeasibleError("vlp_power_update: communication power alone exceeds the budget");
    return std::min(config.p_p_max, config.p_total - p_c);
}

double min_pc_for_fixed_v(const Eigen::VectorXd& v, const Eigen::VectorXd& h_hat,
                          const Eigen::MatrixXd& omega, double delta,
                          const AllocationConfig& config) {
    const int m = static_cast<int>(h_hat.size());
    if (std::abs(v.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("min_pc_for_fixed_v: v must be unit norm");
    const double gs = h_hat.norm();
    const Eigen::VectorXd ht = h_hat / gs;
    const Eigen::MatrixXd v0 = v * v.transpose();
    const Eigen::VectorXd v0h = v0 * ht;

    Eigen::VectorXd d_scale(m + 1);
    d_scale.head(m).setConstant(1.0 / gs);
    d_scale(m) = 1.0;
    Eigen::MatrixXd omega_t = d_scale.asDiagonal() * omega * d_scale.asDiagonal();
    const double c0 = uncertainty_coordinate_scale(omega_t, std::abs(v.dot(ht)));
    Eigen::VectorXd c_scale(m + 1);
    c_scale.head(m).setConstant(c0);
    c_scale(m) = 1.0;
    omega_t = (c_scale.asDiagonal() * omega_t * c_scale.asDiagonal()).eval();

    sdp::SdpProblem p;
    const int bw = p.add_psd_block(m + 1);
    const int bs = p.add_psd_block(m + 1);
    const int bt = p.add_psd_block(2);
    const int beta = p.add_free_var();

    sdp::Expr obj;
    obj.add(bt, 1, 1, 1.0);
    p.set_objective(obj);
    {
        sdp::Expr e;
        e.add(bt, 0, 1, 1.0);
        p.add_eq(std::move(e), 1.0);
    }
    for (int i = 0; i <= m; ++i)
        for (int j = i; j <= m; ++j) {
            sdp::Expr e;
            e.add(bs, i, j, 1.0).add(bw, i, j, -1.0);
            double rhs;
            if (j < m) rhs = v0(i, j) / (c0 * c0);
            else if (i < m) rhs = v0h(i) / c0;
            else {
                e.add(bt, 0, 0, 1.0);
                e.add_free(beta, -1.0);
                rhs = ht.dot(v0 * ht);
            }
            p.add_eq(std::move(e), rhs);
        }
    {
        sdp::Expr e;
        e.add_free(beta, config.p_out);
        add_trace_product(e, bw, omega_t, 1.0);
        p.add_ineq(std::move(e), 0.0);
    }

    const sdp::SdpSolution sol = sdp::solve(p, vlc_solver_options());
    if (sol.status == sdp::Status::infeasible)
        throw InfeasibleError("min_pc_for_fixed_v: infeasible for this beamformer");
    if (sol.status != sdp::Status::optimal)
        throw std::runtime_error(std::string("min_pc_for_fixed_v: solver status ") +
                                 sdp::to_string(sol.status));
    const double p_c = sol.psd[static_cast<std::size_t>(bt)](1, 1) * delta / (gs * gs);
    if (p_c > config.p_c_max * (1.0 + 1e-9))
        throw InfeasibleError("min_pc_for_fixed_v: minimal P_c exceeds its cap");
    return p_c;
}

Eigen::VectorXd extract_beamformer(const Eigen::MatrixXd& v_matrix, const Eigen::VectorXd& h_hat,
                                   const Eigen::MatrixXd& omega, double delta,
                                   const AllocationConfig& config, std::uint64_t seed,
                                   int n_candidates) {
    const int m = static_cast<int>(v_matrix.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v_matrix);
    const Eigen::VectorXd ev = es.eigenvalues();

    auto sign_normalize = [](Eigen::VectorXd v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (std::abs(v[i]) > 1e-12) {
                if (v[i] < 0) v = -v;
                break;
            }
        }
        return v;
    };

    const double ratio = std::max(0.0, ev[m - 2]) / std::max(ev[m - 1], 1e-300);
    if (ratio <= 1e-6) return sign_normalize(es.eigenvectors().col(m - 1).normalized());

    // Gaussian randomization over N(0, V).
    const Eigen::MatrixXd sqrt_v = es.eigenvectors() *
                                   ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                                   es.eigenvectors().transpose();
    auto eng = make_engine(seed, 0x9e3779b9ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd best;
    double best_pc = std::numeric_limits<double>::infinity();
    for (int c = 0; c < n_candidates; ++c) {
        Eigen::VectorXd xi(m);
        for (int i = 0; i < m; ++i) xi[i] = normal(eng);
        Eigen::VectorXd cand = sqrt_v * xi;
        const double norm = cand.norm();
        if (norm < 1e-14) continue;
        cand /= norm;
        try {
            const double pc = min_pc_for_fixed_v(cand, h_hat, omega, delta, config);
            if (pc < best_pc) {
                best_pc = pc;
                best = cand;
            }
        } catch (const InfeasibleError&) {
        } catch (const std::runtime_error&) {
            // candidates whose restricted subproblem defeats the solver are
            // simply skipped, like infeasible ones
        }
    }
    if (best.size() == 0)
        throw InfeasibleError("extract_beamformer: no feasible randomized candidate");
    return sign_normalize(best);
}

AllocationResult bcd_optimize(const Scenario& s, const Vec3& u_hat, const AllocationConfig& config,
                              std::uint64_t seed) {
    s.validate();
    config.validate();
    double delta;
    try {
        delta = delta_threshold(config.rbar, s.bandwidth_hz, s.sigma2_c, s.peak_amp);
    } catch (const std::domain_error& e) {
        throw InfeasibleError(e.what());
    }

    const Eigen::VectorXd h_hat = los_gains(s, u_hat);
    if (h_hat.minCoeff() <= 0.0)
        throw std::invalid_argument("bcd_optimize: some PD sees zero gain at u_hat");

    auto moments_at = [&](double p_p) {
        return csi_moments(s, u_hat, position_error_covariance(fim(s, u_hat, p_p)),
                           config.moment_samples, config.moment_seed);
    };
    auto objective_at = [&](double p_p) { return crlb_trace(fim(s, u_hat, p_p)); };
    const double p_p_budget_cap = std::min(config.p_p_max, config.p_total);

    AllocationResult res;
    res.h_hat = h_hat;
    res.delta = delta;

    // Bootstrap from the loosest moments (P_p = 0): the resulting P_c upper
    // bound puts P_p(0) at or below the fixed point, so later refreshes only
    // shrink P_c and the objective descends. Fall back to the optimistic end
    // when the pessimistic subproblem is unusable.
    double p_c_prev, p_p_prev;
    {
        VlcSolution boot;
        bool ok = false;
        try {
            boot = solve_vlc_subproblem(h_hat, moments_at(0.0).omega, delta, config, config.p_c_max);
            ok = boot.p_c <= config.p_total;
        } catch (const InfeasibleError&) {
        }
        if (!ok) {
            boot = solve_vlc_subproblem(h_hat, moments_at(p_p_budget_cap).omega, delta, config,
                                        config.p_c_max);
            if (boot.p_c > config.p_total)
                throw InfeasibleError("bcd_optimize: rate constraint needs more than the total budget");
        }
        p_c_prev = boot.p_c;
        p_p_prev = vlp_power_update(p_c_prev, config);
        res.trace.push_back({objective_at(p_p_prev), p_p_prev, p_c_prev});
    }

    VlcSolution last{};
    double obj_prev = res.trace.back().objective;
    for (int k = 1; k <= config.max_iters; ++k) {
        const CsiMoments mom = moments_at(p_p_prev);
        last = solve_vlc_subproblem(h_hat, mom.omega, delta, config, config.p_c_max);
        const double p_p = vlp_power_update(last.p_c, config);
        const double obj = objective_at(p_p);
        res.trace.push_back({obj, p_p, last.p_c});
        res.iterations = k;
        const bool stop = std::abs(obj - obj_prev) <= config.bcd_tol;
        obj_prev = obj;
        p_p_prev = p_p;
        p_c_prev = last.p_c;
        if (stop) {
            res.converged = true;
            break;
        }
    }

    res.p_p = p_p_prev;
    // Hand any leftover budget (P_p capped below P_T - P_c) to communication:
    // it costs nothing in CRLB and the CVaR certificate stays valid since the
    // rate constraint only relaxes as P_c grows.
    const double leftover = std::max(0.0, config.p_total - res.p_p - p_c_prev);
    res.p_c = std::min(config.p_c_max, p_c_prev + leftover);
    res.crlb = objective_at(res.p_p);
    res.v_matrix = last.v_matrix;
    res.certificate = last.certificate;
    res.rank_ratio = last.rank_ratio;
    res.rank1 = last.rank_ratio <= 1e-6;
    res.moments = moments_at(res.p_p);
    res.v = extract_beamformer(res.v_matrix, h_hat, res.moments.omega, delta, config, seed);
    return res;
}

}  // namespace vlpc
