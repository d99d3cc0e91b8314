#pragma once
// RSS observation simulation and nonlinear least-squares position estimation.

#include "vlpc/scenario.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace vlpc {

struct RssObservation {
    Eigen::VectorXd rx_power;       // per-PD received electrical power [W]; empty if gains given directly
    Eigen::VectorXd gain_estimate;  // per-PD gain estimate
    double p_p = 0.0;               // positioning power used
    double noise_power = 0.0;       // B sigma2_p [W]
    bool clamped = false;           // a negative radicand was clamped during inversion
};

struct PositionEstimate {
    Vec3 u_hat{0, 0, 0};
    double residual_norm = 0.0;  // ||eta(u_hat)||
    bool converged = false;
    int iterations = 0;
};

/// Expected received electrical power P_r,i = (P_p eps + I_dc^2) h_i^2 + B sigma2_p.
double expected_rx_power(const Scenario& s, int pd_index, double p_p);

/// Variance of the correlator-based gain estimate h_i + e_i:
/// B sigma2_p / (T_p (P_p eps + I_dc^2)), the per-coefficient CRLB scale.
double gain_estimate_noise_var(const Scenario& s, double p_p);

/// Gains with i.i.d. zero-mean Gaussian errors of gain_estimate_noise_var;
/// deterministic for a fixed seed.
RssObservation simulate_gain_estimates(const Scenario& s, double p_p, std::uint64_t seed);

/// Inverts received powers to gain estimates,
/// h_i = sqrt(max(P_r,i - noise, 0) / (P_p eps + I_dc^2));
/// clamps negative radicands to 0 and sets obs.clamped.
Eigen::VectorXd powers_to_gain_estimates(const Scenario& s, RssObservation& obs);

/// eta_i(u) = alpha (z_l - z_u - v_z,i)^(m+1) / ||l - u - v_i||^(m+3) - gain_i
/// (unclipped model; candidate must lie below the lamp plane).
Eigen::VectorXd residuals_eta(const Scenario& s, const Vec3& candidate, const Eigen::VectorXd& gains);

/// Levenberg-Marquardt minimization of ||eta(u)||^2 with the closed-form
/// gradient as Jacobian, multi-start (init_guess, lamp nadir at two heights)
/// and the z box constraint [0, z_l - margin] enforced by projection.
/// Throws std::invalid_argument when init_guess is not below the lamp plane.
PositionEstimate solve_position(const Scenario& s, const Eigen::VectorXd& gains, const Vec3& init_guess);

}  // namespace vlpc
