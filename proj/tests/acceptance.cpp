// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.

#include "vlpc/allocator.hpp"
#include "vlpc/experiments.hpp"
#include "vlpc/fisher.hpp"
#include "vlpc/ook_rate.hpp"
#include "vlpc/positioning.hpp"
#include "vlpc/rng.hpp"
#include "vlpc/sdp.hpp"

#include "mc_oracles.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

using namespace vlpc;

namespace {

int g_failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
    std::printf("%s criterion %2d: %-28s  %s  (%.2f s)\n", pass ? "PASS" : "FAIL", id,
                name.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

Scenario random_scenario(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Scenario s;
    s.lamp = Vec3(2.0 + u01(rng), 2.0 + u01(rng), 2.6 + 0.8 * u01(rng));
    s.mu_position = Vec3(1.0 + 3.0 * u01(rng), 1.0 + 3.0 * u01(rng), 0.5 + 1.5 * u01(rng));
    s.pd_offsets = equilateral_pd_offsets(0.05 + 0.3 * u01(rng));
    s.channel.theta_half_deg = 35.0 + 40.0 * u01(rng);
    s.t_p = 0.05 + 0.2 * u01(rng);
    return s;
}

// 1. crlb_trace vs a numerically inverted B-scaled FIM, 20 random scenarios.
void criterion1() {
    Timer tm;
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> upow(0.0, 12.0);
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
        const Scenario s = random_scenario(rng);
        const FisherInfo f = fim(s, s.mu_position, upow(rng));
        const Eigen::Matrix3d jb = (f.scale / f.bandwidth_hz) * f.q;
        const double oracle = jb.fullPivLu().inverse().trace();
        worst = std::max(worst, std::abs(crlb_trace(f) - oracle) / std::abs(oracle));
    }
    report(1, "CRLB oracle equivalence", worst <= 1e-10 && tm.seconds() < 1.0,
           fmt("max rel err %.2e (tol 1e-10)", worst), tm.seconds());
}

// 2. closed-form gradients vs central differences at 100 random interior points.
void criterion2() {
    Timer tm;
    Scenario s;
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> ux(0.8, 4.2), uz(0.5, 2.2);
    double worst = 0;
    for (int k = 0; k < 100; ++k) {
        const Vec3 mu(ux(rng), ux(rng), uz(rng));
        for (int pd = 0; pd < 3; ++pd) {
            const Vec3 an = los_gain_gradient(s, pd, mu);
            for (int a = 0; a < 3; ++a) {
                Vec3 lo = mu, hi = mu;
                lo[a] -= 1e-6;
                hi[a] += 1e-6;
                const double fd = (los_gain(s, pd, hi) - los_gain(s, pd, lo)) / 2e-6;
                worst = std::max(worst,
                                 std::abs(fd - an[a]) / std::max(std::abs(an[a]), 1e-3 * an.norm()));
            }
        }
    }
    report(2, "gradient audit", worst <= 1e-5 && tm.seconds() < 1.0,
           fmt("max rel err %.2e (tol 1e-5)", worst), tm.seconds());
}

// 3. estimator efficiency at SNR 15 dB + noiseless recovery + monotone trend.
void criterion3() {
    Timer tm;
    Scenario s;

    double worst_recovery = 0;
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> ux(1.0, 4.0), uz(0.6, 2.4);
    for (int k = 0; k < 20; ++k) {
        Scenario sc = s;
        sc.mu_position = Vec3(ux(rng), ux(rng), uz(rng));
        const Eigen::VectorXd h = los_gains(sc, sc.mu_position);
        for (const Vec3& init : {Vec3(2.5, 2.5, 1.5), Vec3(1.2, 3.3, 0.8), Vec3(3.8, 1.1, 2.2)}) {
            const PositionEstimate est = solve_position(sc, h, init);
            worst_recovery = std::max(worst_recovery, (est.u_hat - sc.mu_position).norm());
        }
    }

    const double h1 = los_gain(s, 0, s.mu_position);
    auto rmse_at_snr = [&](double snr_db, int trials) {
        const double p_p =
            std::pow(10.0, snr_db / 10.0) * s.bandwidth_hz * s.sigma2_p / (h1 * h1);
        double sum = 0;
        const Vec3 init(s.lamp.x(), s.lamp.y(), s.lamp.z() / 2.0);
        for (int t = 0; t < trials; ++t) {
            const RssObservation obs = simulate_gain_estimates(s, p_p, splitmix64(31 ^ splitmix64(t)));
            sum += (solve_position(s, obs.gain_estimate, init).u_hat - s.mu_position).squaredNorm();
        }
        return std::sqrt(sum / trials);
    };

    const double p15 = std::pow(10.0, 1.5) * s.bandwidth_hz * s.sigma2_p / (h1 * h1);
    const double rmse15 = rmse_at_snr(15.0, 1000);
    const double bound15 = std::sqrt(crlb_trace(fim(s, s.mu_position, p15)));
    const double ratio = rmse15 / bound15;

    int inversions = 0;
    double worst_inv = 0;
    double prev = -1;
    for (double snr = 0; snr <= 30; snr += 5) {
        const double r = rmse_at_snr(snr, 1000);
        if (prev >= 0 && r > prev) {
            ++inversions;
            worst_inv = std::max(worst_inv, (r - prev) / prev);
        }
        prev = r;
    }

    const bool pass = worst_recovery <= 1e-6 && ratio >= 0.8 && ratio <= 3.0 &&
                      (inversions == 0 || (inversions == 1 && worst_inv <= 0.05)) &&
                      tm.seconds() < 60.0;
    report(3, "estimator efficiency", pass,
           fmt("recovery %.1e m, RMSE/sqrtCRLB %.3f, inversions %d", worst_recovery, ratio,
               inversions),
           tm.seconds());
}

// 4. rate bound ordering and quadrature-vs-MC agreement.
void criterion4() {
    Timer tm;
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> ug(-5.5, -4.0), up(-2.0, 1.5);
    bool ordered = true;
    for (int k = 0; k < 1000; ++k) {
        const RateContext c{std::pow(10.0, ug(rng)), std::pow(10.0, up(rng)), 0.007, 20e6, 1e-21};
        if (rate_exact(c) < rate_lower_bound(c) - 1e-3) ordered = false;
    }

    double worst_mc = 0;
    for (int p = 0; p < 10; ++p) {
        const double r = 0.25 * std::pow(1.9, p);  // 0.25 .. ~50
        const double mc =
            std::min(std::max(vlpc_test::mi_sampling_oracle(r, 1000000), 0.0), 1.0);
        worst_mc = std::max(worst_mc, std::abs(mc - ook_mi_ratio(r)));
    }

    report(4, "rate-bound ordering", ordered && worst_mc <= 1e-3 && tm.seconds() < 120.0,
           fmt("Jensen ordered %s, max |MC - quadrature| %.2e (tol 1e-3)",
               ordered ? "yes" : "NO", worst_mc),
           tm.seconds());
}

// 5. delta transform equivalence, zero mismatches over 1000 tuples.
void criterion5() {
    Timer tm;
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> ug(1e-6, 4e-5), up(1e-3, 20.0), ur(0.1e6, 30e6);
    int mismatches = 0;
    for (int k = 0; k < 1000; ++k) {
        const double s_eff = ug(rng), pc = up(rng), rbar = ur(rng);
        const double d = delta_threshold(rbar, 20e6, 1e-21, 0.007);
        const bool rate_le = rate_lower_bound({s_eff, pc, 0.007, 20e6, 1e-21}) <= rbar;
        if (rate_le != (s_eff * s_eff <= d / pc)) ++mismatches;
    }
    report(5, "delta-transform equivalence", mismatches == 0 && tm.seconds() < 1.0,
           fmt("%d mismatches in 1000", mismatches), tm.seconds());
}

// 6. worst-case CVaR closed-form oracles.
void criterion6() {
    Timer tm;
    auto m1 = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };
    auto v1 = [](double v) { return Eigen::VectorXd::Constant(1, v); };
    const double lin = worst_case_cvar_quadratic(m1(0), v1(1), 0, v1(0), m1(1), 0.05);
    const double quad = worst_case_cvar_quadratic(m1(1), v1(0), 0, v1(0), m1(1), 0.1);
    const double e1 = std::abs(lin - std::sqrt(19.0));
    const double e2 = std::abs(quad - 10.0);
    report(6, "worst-case CVaR oracles", e1 <= 1e-4 && e2 <= 1e-4 && tm.seconds() < 5.0,
           fmt("linear %.6f (err %.1e), quadratic %.6f (err %.1e)", lin, e1, quad, e2),
           tm.seconds());
}

// 7. analytic SDP battery with independent verification.
void criterion7() {
    Timer tm;
    using namespace vlpc::sdp;
    int solved = 0, verified = 0;
    bool infeasible_ok = false, unbounded_ok = false;

    auto run = [&](const SdpProblem& p, double expect) {
        const SdpSolution sol = solve(p);
        if (sol.status == Status::optimal && std::abs(sol.objective - expect) <= 1e-6 * (1 + std::abs(expect)))
            ++solved;
        if (verify_solution(p, sol).pass) ++verified;
    };

    {  // 1: min x, [[x,1],[1,x]] >= 0
        SdpProblem p;
        const int s = p.add_psd_block(2);
        const int x = p.add_free_var();
        Expr o;
        o.add_free(x, 1);
        p.set_objective(o);
        p.add_eq(Expr{}.add(s, 0, 1, 1), 1.0);
        p.add_eq(Expr{}.add(s, 0, 0, 1).add_free(x, -1), 0.0);
        p.add_eq(Expr{}.add(s, 1, 1, 1).add_free(x, -1), 0.0);
        run(p, 1.0);
    }
    {  // 2: min Tr X, X11 = 5
        SdpProblem p;
        const int x = p.add_psd_block(2);
        Expr o;
        o.add(x, 0, 0, 1).add(x, 1, 1, 1);
        p.set_objective(o);
        p.add_eq(Expr{}.add(x, 0, 0, 1), 5.0);
        run(p, 5.0);
    }
    {  // 3: infeasible trace
        SdpProblem p;
        const int x = p.add_psd_block(2);
        Expr o;
        o.add(x, 0, 0, 1);
        p.set_objective(o);
        p.add_eq(Expr{}.add(x, 0, 0, 1).add(x, 1, 1, 1), -1.0);
        infeasible_ok = solve(p).status == Status::infeasible;
    }
    {  // 4: diagonal LP
        SdpProblem p;
        const int x = p.add_psd_block(1), y = p.add_psd_block(1);
        Expr o;
        o.add(x, 0, 0, 1).add(y, 0, 0, 2);
        p.set_objective(o);
        p.add_eq(Expr{}.add(x, 0, 0, 1).add(y, 0, 0, 1), 1.0);
        run(p, 1.0);
    }
    {  // 5: lambda_max dual pair
        SdpProblem p;
        const int s = p.add_psd_block(2);
        const int t = p.add_free_var();
        Expr o;
        o.add_free(t, 1);
        p.set_objective(o);
        p.add_eq(Expr{}.add(s, 0, 0, 1).add_free(t, -1), -2.0);
        p.add_eq(Expr{}.add(s, 1, 1, 1).add_free(t, -1), -2.0);
        p.add_eq(Expr{}.add(s, 0, 1, 1), -1.0);
        run(p, 3.0);
    }
    {  // 6: lambda_min primal
        SdpProblem p;
        const int x = p.add_psd_block(2);
        Expr o;
        o.add(x, 0, 0, 2).add(x, 1, 1, 2).add(x, 0, 1, 2);
        p.set_objective(o);
        p.add_eq(Expr{}.add(x, 0, 0, 1).add(x, 1, 1, 1), 1.0);
        run(p, 1.0);
    }
    {  // 7: SOC arrow, ||(3,4)|| <= t
        SdpProblem p;
        const int s = p.add_psd_block(3);
        const int t = p.add_free_var();
        Expr o;
        o.add_free(t, 1);
        p.set_objective(o);
        for (int i = 0; i < 3; ++i) p.add_eq(Expr{}.add(s, i, i, 1).add_free(t, -1), 0.0);
        p.add_eq(Expr{}.add(s, 0, 1, 1), 3.0);
        p.add_eq(Expr{}.add(s, 0, 2, 1), 4.0);
        p.add_eq(Expr{}.add(s, 1, 2, 1), 0.0);
        run(p, 5.0);
    }
    {  // 8: max off-diagonal
        SdpProblem p;
        const int x = p.add_psd_block(2);
        Expr o;
        o.add(x, 0, 1, -1);
        p.set_objective(o);
        p.add_eq(Expr{}.add(x, 0, 0, 1), 1.0);
        p.add_eq(Expr{}.add(x, 1, 1, 1), 4.0);
        run(p, -2.0);
    }
    {  // 9: unbounded
        SdpProblem p;
        const int x = p.add_psd_block(1), y = p.add_psd_block(1);
        Expr o;
        o.add(x, 0, 0, -1);
        p.set_objective(o);
        p.add_eq(Expr{}.add(y, 0, 0, 1), 1.0);
        unbounded_ok = solve(p).status == Status::unbounded;
    }
    {  // 10: redundant rows
        SdpProblem p;
        const int x = p.add_psd_block(2);
        Expr o;
        o.add(x, 0, 0, 1).add(x, 1, 1, 1);
        p.set_objective(o);
        p.add_eq(Expr{}.add(x, 0, 0, 1), 2.0);
        p.add_eq(Expr{}.add(x, 0, 0, 1), 2.0);
        run(p, 2.0);
    }

    const bool pass =
        solved == 8 && verified == 8 && infeasible_ok && unbounded_ok && tm.seconds() < 10.0;
    report(7, "SDP solver battery", pass,
           fmt("8/%d optimal solved, %d verified, infeasible %s, unbounded %s", solved, verified,
               infeasible_ok ? "certified" : "MISSED", unbounded_ok ? "certified" : "MISSED"),
           tm.seconds());
}

// 8. robust design outage vs the non-robust baseline.
void criterion8() {
    Timer tm;
    Scenario s;
    bool robust_ok = true;
    std::string detail;
    for (double pout : {0.05, 0.01}) {
        const AllocationConfig cfg = AllocationConfig::for_scenario(s, 10.0, 10e6, pout);
        const AllocationResult res = bcd_optimize(s, s.mu_position, cfg, 88);
        const double out = empirical_outage(s, res, res.moments, cfg.rbar, 10000, 40);
        const double slack = 3 * std::sqrt(pout * (1 - pout) / 10000.0);
        if (out > pout + slack) robust_ok = false;
        detail += fmt("robust@%.0f%%: %.4f  ", 100 * pout, out);
    }

    // non-robust baseline: treat h_hat as the truth, spend exactly enough
    const Eigen::VectorXd h = los_gains(s, s.mu_position);
    const double delta = delta_threshold(10e6, s.bandwidth_hz, s.sigma2_c, s.peak_amp);
    AllocationResult nr;
    nr.h_hat = h;
    nr.v = h.normalized();
    nr.p_c = delta / h.squaredNorm();
    nr.p_p = std::min(AllocationConfig::for_scenario(s, 10.0, 10e6, 0.05).p_p_max,
                      10.0 - nr.p_c);
    nr.moments = csi_moments(s, s.mu_position,
                             position_error_covariance(fim(s, s.mu_position, nr.p_p)), 10000,
                             12345);
    const double out_nr = empirical_outage(s, nr, nr.moments, 10e6, 10000, 41);
    detail += fmt("non-robust: %.4f", out_nr);

    const bool pass = robust_ok && std::abs(out_nr - 0.5) <= 0.05 && tm.seconds() < 300.0;
    report(8, "robust outage vs baseline", pass, detail, tm.seconds());
}

// 9. BCD descent, convergence and feasibility.
void criterion9() {
    Timer tm;
    Scenario s;
    const AllocationConfig cfg = AllocationConfig::for_scenario(s, 10.0, 10e6, 0.05);
    const AllocationResult res = bcd_optimize(s, s.mu_position, cfg, 9);
    bool monotone = true;
    for (std::size_t k = 1; k < res.trace.size(); ++k)
        if (res.trace[k].objective > res.trace[k - 1].objective + 1e-8) monotone = false;
    bool feasible = res.p_p + res.p_c <= cfg.p_total + 1e-9 && res.p_p <= cfg.p_p_max + 1e-12 &&
                    res.p_c <= cfg.p_c_max + 1e-12 && res.p_p >= 0 && res.p_c >= 0;
    const bool pass =
        monotone && res.converged && res.iterations <= 30 && feasible && tm.seconds() < 120.0;
    report(9, "BCD behavior", pass,
           fmt("monotone %s, converged in %d iters, budget %s", monotone ? "yes" : "NO",
               res.iterations, feasible ? "ok" : "VIOLATED"),
           tm.seconds());
}

// 10. sweep trend directions of the robust allocation.
void criterion10() {
    Timer tm;
    Scenario s;

    struct Point {
        double p_p, p_c, crlb, rate;
        bool ok;
    };
    auto solve_point = [&](double pt, double rbar, double pout) {
        Point pnt{0, 0, 0, 0, false};
        try {
            const AllocationConfig cfg = AllocationConfig::for_scenario(s, pt, rbar, pout);
            const AllocationResult res = bcd_optimize(s, s.mu_position, cfg, 10);
            const RateMcStats mc =
                rate_outage_mc(s, res.h_hat, res.v, res.p_c, res.moments, rbar, 10000, 50);
            pnt = {res.p_p, res.p_c, res.crlb, mc.avg_rate, true};
        } catch (const InfeasibleError&) {
        }
        return pnt;
    };

    // monotone with at most one Monte-Carlo inversion of <= 2 percent
    auto trend = [](const std::vector<double>& v, int dir) {
        int inversions = 0;
        bool big = false;
        for (std::size_t k = 1; k < v.size(); ++k) {
            const double d = dir * (v[k] - v[k - 1]);
            if (d < 0) {
                ++inversions;
                if (-d > 0.02 * std::abs(v[k - 1])) big = true;
            }
        }
        return inversions == 0 || (inversions == 1 && !big);
    };

    bool all_ok = true;
    std::string detail;

    {  // outage-tolerance sweep: P_p up, P_c down, CRLB down
        std::vector<double> pp, pc, crlb;
        for (double pout : {0.01, 0.02, 0.05, 0.10}) {
            const Point p = solve_point(10.0, 10e6, pout);
            if (!p.ok) all_ok = false;
            pp.push_back(p.p_p);
            pc.push_back(p.p_c);
            crlb.push_back(p.crlb);
        }
        const bool ok = trend(pp, +1) && trend(pc, -1) && trend(crlb, -1);
        if (!ok) all_ok = false;
        detail += fmt("Pout[Pp^ Pc_v CRLBv]:%s ", ok ? "ok" : "FAIL");
    }
    {  // total-power sweep: CRLB down, average rate up
        std::vector<double> crlb, rate;
        for (double pt : {14.0, 16.0, 18.0, 20.0}) {
            const Point p = solve_point(pt, 5e6, 0.05);
            if (!p.ok) all_ok = false;
            crlb.push_back(p.crlb);
            rate.push_back(p.rate);
        }
        const bool ok = trend(crlb, -1) && trend(rate, +1);
        if (!ok) all_ok = false;
        detail += fmt("PT[CRLBv rate^]:%s ", ok ? "ok" : "FAIL");
    }
    {  // rate-threshold sweep: P_p down, P_c up, CRLB up
        std::vector<double> pp, pc, crlb;
        for (double rb : {2.5e6, 5e6, 10e6, 15e6}) {
            const Point p = solve_point(8.0, rb, 0.05);
            if (!p.ok) all_ok = false;
            pp.push_back(p.p_p);
            pc.push_back(p.p_c);
            crlb.push_back(p.crlb);
        }
        const bool ok = trend(pp, -1) && trend(pc, +1) && trend(crlb, +1);
        if (!ok) all_ok = false;
        detail += fmt("rbar[Pp_v Pc^ CRLB^]:%s", ok ? "ok" : "FAIL");
    }

    report(10, "trend reproduction", all_ok && tm.seconds() < 600.0, detail, tm.seconds());
}

}  // namespace

int main() {
    std::printf("VLPC acceptance suite\n");
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    criterion10();
    std::printf("%d of 10 criteria failed\n", g_failures);
    return g_failures;
}
