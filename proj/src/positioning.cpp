#include "vlpc/positioning.hpp"

#include "vlpc/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vlpc {

double expected_rx_power(const Scenario& s, int pd_index, double p_p) {
    const double h = los_gain(s, pd_index, s.mu_position);
    const double drive = p_p * s.eps_sym + s.i_dc * s.i_dc;
    return drive * h * h + s.bandwidth_hz * s.sigma2_p;
}

double gain_estimate_noise_var(const Scenario& s, double p_p) {
    const double drive = p_p * s.eps_sym + s.i_dc * s.i_dc;
    if (drive <= 0.0) throw std::domain_error("gain_estimate_noise_var: P_p eps + I_dc^2 is zero");
    return s.bandwidth_hz * s.sigma2_p / (s.t_p * drive);
}

RssObservation simulate_gain_estimates(const Scenario& s, double p_p, std::uint64_t seed) {
    const Eigen::VectorXd h = los_gains(s, s.mu_position);
    const double sd = std::sqrt(gain_estimate_noise_var(s, p_p));
    auto eng = make_engine(seed, 0);
    std::normal_distribution<double> normal(0.0, 1.0);

    RssObservation obs;
    obs.p_p = p_p;
    obs.noise_power = s.bandwidth_hz * s.sigma2_p;
    obs.gain_estimate.resize(h.size());
    for (Eigen::Index i = 0; i < h.size(); ++i) obs.gain_estimate[i] = h[i] + sd * normal(eng);
    return obs;
}

Eigen::VectorXd powers_to_gain_estimates(const Scenario& s, RssObservation& obs) {
    const double drive = obs.p_p * s.eps_sym + s.i_dc * s.i_dc;
    Eigen::VectorXd gains(obs.rx_power.size());
    obs.clamped = false;
    for (Eigen::Index i = 0; i < obs.rx_power.size(); ++i) {
        const double num = obs.rx_power[i] - obs.noise_power;
        if (num < 0.0) obs.clamped = true;
        gains[i] = std::sqrt(std::max(num, 0.0) / drive);
    }
    obs.gain_estimate = gains;
    return gains;
}

namespace {

double max_vz(const Scenario& s) {
    double m = 0.0;
    for (const auto& v : s.pd_offsets) m = std::max(m, v.z());
    return m;
}

// Keep the solver out of the near-field zone under the lamp: within about one
// array radius of the lamp plane the gain system admits a second exact root
// (grazing-incidence geometry), so the box top stays two radii below it.
double z_box_margin(const Scenario& s) {
    double r = 0.0;
    for (const auto& v : s.pd_offsets) r = std::max(r, std::hypot(v.x(), v.y()));
    return std::max(1e-3, 2.0 * r);
}

// Residuals and Jacobian in alpha-normalized gain units. Working in units of
// alpha keeps the pinned gradient/step tolerances meaningful (raw gains are
// ~1e-5 and would satisfy them far from the optimum).
void eval(const Scenario& s, double alpha, double m, const Eigen::VectorXd& gains, const Vec3& u,
          Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const int n = static_cast<int>(s.pd_count());
    r.resize(n);
    if (jac) jac->resize(n, 3);
    for (int i = 0; i < n; ++i) {
        const Vec3 pd = u + s.pd_offsets[static_cast<std::size_t>(i)];
        r[i] = lambertian_gain_raw(alpha, m, s.lamp, pd) / alpha - gains[i] / alpha;
        if (jac) {
            const double dz = s.lamp.z() - pd.z();
            const double d = (s.lamp - pd).norm();
            const double dm3 = std::pow(d, m + 3.0);
            const double dm5 = dm3 * d * d;
            const double dzm = std::pow(dz, m);
            (*jac)(i, 0) = -(m + 3.0) * dzm * dz * (pd.x() - s.lamp.x()) / dm5;
            (*jac)(i, 1) = -(m + 3.0) * dzm * dz * (pd.y() - s.lamp.y()) / dm5;
            (*jac)(i, 2) = -(m + 1.0) * dzm / dm3 + (m + 3.0) * dzm * dz * dz / dm5;
        }
    }
}

struct LmResult {
    Vec3 u;
    double cost;       // 0.5 ||r||^2, normalized units
    bool converged;
    int iterations;
};

LmResult lm_minimize(const Scenario& s, const Eigen::VectorXd& gains, Vec3 u, double z_hi) {
    const double alpha = alpha_const(s.channel);
    const double m = lambertian_order(s.channel.theta_half_deg);
    constexpr int kMaxIter = 200;
    constexpr double kGradTol = 1e-10;
    constexpr double kStepTol = 1e-12;

    auto project = [&](Vec3 p) {
        p.z() = std::min(std::max(p.z(), 0.0), z_hi);
        return p;
    };
    u = project(u);

    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    eval(s, alpha, m, gains, u, r, &jac);
    double cost = 0.5 * r.squaredNorm();
    double lambda = 1e-3;

    LmResult out{u, cost, false, 0};
    for (int it = 1; it <= kMaxIter; ++it) {
        out.iterations = it;
        const Eigen::Vector3d grad = jac.transpose() * r;
        if (grad.norm() <= kGradTol) {
            out.converged = true;
            break;
        }
        Eigen::Matrix3d jtj = jac.transpose() * jac;
        Eigen::Matrix3d damped = jtj;
        for (int k = 0; k < 3; ++k)
            damped(k, k) += lambda * std::max(jtj(k, k), 1e-12);
        const Eigen::Vector3d step = damped.ldlt().solve(-grad);
        const Vec3 trial = project(u + step);

        Eigen::VectorXd r_trial;
        eval(s, alpha, m, gains, trial, r_trial, nullptr);
        const double cost_trial = 0.5 * r_trial.squaredNorm();
        if (cost_trial < cost) {
            const double moved = (trial - u).norm();
            u = trial;
            cost = cost_trial;
            eval(s, alpha, m, gains, u, r, &jac);
            lambda = std::max(lambda / 10.0, 1e-12);
            if (moved <= kStepTol) {
                out.converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;  // stalled
        }
    }
    out.u = u;
    out.cost = cost;
    return out;
}

// Coarse residual scan around the lamp axis; lands reliably in the global
// basin, which three fixed starts alone do not always do.
Vec3 grid_seed(const Scenario& s, double alpha, double m, const Eigen::VectorXd& gains,
               double z_hi) {
    Vec3 best(s.lamp.x(), s.lamp.y(), z_hi / 2.0);
    double best_cost = std::numeric_limits<double>::infinity();
    Eigen::VectorXd r;
    for (int ix = -6; ix <= 6; ++ix)
        for (int iy = -6; iy <= 6; ++iy)
            for (int iz = 1; iz <= 7; ++iz) {
                const Vec3 cand(s.lamp.x() + 0.5 * ix, s.lamp.y() + 0.5 * iy, z_hi * iz / 8.0);
                eval(s, alpha, m, gains, cand, r, nullptr);
                const double cost = r.squaredNorm();
                if (cost < best_cost) {
                    best_cost = cost;
                    best = cand;
                }
            }
    return best;
}

}  // namespace

Eigen::VectorXd residuals_eta(const Scenario& s, const Vec3& candidate, const Eigen::VectorXd& gains) {
    if (gains.size() != static_cast<Eigen::Index>(s.pd_count()))
        throw std::invalid_argument("residuals_eta: gain vector length != PD count");
    const double alpha = alpha_const(s.channel);
    const double m = lambertian_order(s.channel.theta_half_deg);
    Eigen::VectorXd eta(gains.size());
    for (Eigen::Index i = 0; i < gains.size(); ++i) {
        const Vec3 pd = candidate + s.pd_offsets[static_cast<std::size_t>(i)];
        eta[i] = lambertian_gain_raw(alpha, m, s.lamp, pd) - gains[i];
    }
    return eta;
}

PositionEstimate solve_position(const Scenario& s, const Eigen::VectorXd& gains, const Vec3& init_guess) {
    if (gains.size() != static_cast<Eigen::Index>(s.pd_count()))
        throw std::invalid_argument("solve_position: gain vector length != PD count");
    const double z_hi = s.lamp.z() - max_vz(s) - z_box_margin(s);
    if (init_guess.z() >= s.lamp.z() - max_vz(s))
        throw std::invalid_argument("solve_position: init_guess not below the lamp plane");

    // Multi-start: caller's guess (typically the previous estimate), the lamp
    // nadir at the guess height, the nadir at half lamp height, and a coarse
    // grid scan seed.
    const double alpha = alpha_const(s.channel);
    const double m = lambertian_order(s.channel.theta_half_deg);
    const Vec3 starts[4] = {init_guess,
                            Vec3(s.lamp.x(), s.lamp.y(), std::min(init_guess.z(), z_hi)),
                            Vec3(s.lamp.x(), s.lamp.y(), std::min(s.lamp.z() / 2.0, z_hi)),
                            grid_seed(s, alpha, m, gains, z_hi)};

    LmResult best{};
    bool have = false;
    int total_iters = 0;
    for (const Vec3& u0 : starts) {
        const LmResult r = lm_minimize(s, gains, u0, z_hi);
        total_iters += r.iterations;
        if (!have || r.cost < best.cost) {
            best = r;
            have = true;
        }
    }

    PositionEstimate est;
    est.u_hat = best.u;
    est.residual_norm = residuals_eta(s, best.u, gains).norm();
    est.converged = best.converged;
    est.iterations = total_iters;
    return est;
}

}  // namespace vlpc
