#pragma once
// Geometry, physical constants and the Lambertian LOS channel gain with its
// analytic spatial gradient.

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace vlpc {

using Vec3 = Eigen::Vector3d;

/// PD offsets forming an equilateral triangle of side `side` in the horizontal
/// plane, centered on the MU. Vertices at (side/sqrt3, 0, 0) and
/// (-side/(2 sqrt3), +-side/2, 0).
std::vector<Vec3> equilateral_pd_offsets(double side);

struct ChannelParams {
    double theta_half_deg = 60.0;  // semi-angle at half power [deg]
    double a_pd = 1e-4;            // PD area [m^2]
    double g_conc = 1.0;           // optical concentrator gain
    double t_f = 1.0;              // optical filter gain
    double fov_deg = 90.0;         // receiver field of view [deg]
    // LED axis is fixed straight down, PD normals straight up.
};

/// Single-lamp scenario: lamp/receiver geometry, channel constants, noise
/// densities, frame timings and power caps. Defaults follow the standard
/// 5x5x3 m room setup with three PDs on a 0.1 m triangle.
struct Scenario {
    Vec3 lamp{2.5, 2.5, 3.0};
    Vec3 mu_position{2.0, 2.0, 1.5};
    std::vector<Vec3> pd_offsets = equilateral_pd_offsets(0.1);
    ChannelParams channel;

    double sigma2_p = 1e-21;      // positioning noise PSD [W/Hz]
    double sigma2_c = 1e-21;      // data noise PSD [W/Hz]
    double bandwidth_hz = 20e6;

    double t_p = 0.12;            // positioning subframe [s]
    double t_u = 0.01;            // uplink feedback subframe [s]
    double t_c = 0.87;            // data subframe [s]

    double i_dc = 2.0;            // DC bias
    double peak_amp = 0.007;      // peak amplitude A
    double eps_sym = 1.0;         // positioning-symbol mean square
    double p_o_max = 8.0;         // optical power cap [W]
    double p_e_max = 16.0;        // electrical power cap [W]

    std::size_t pd_count() const { return pd_offsets.size(); }

    /// Validates every invariant and throws std::invalid_argument listing all
    /// violations (not just the first).
    void validate() const;
};

/// Lambertian emission order m = -ln2 / ln(cos theta_1/2).
/// Throws std::domain_error outside (0, 90) degrees.
double lambertian_order(double theta_half_deg);

/// Gain constant alpha = (m+1) A_pd g T_f / (2 pi)  [m^2].
double alpha_const(const ChannelParams& params);

/// Raw Lambertian gain alpha dz^(m+1) / d^(m+3) without FoV clipping.
/// Valid only for pd strictly below the lamp; used by the positioning model.
double lambertian_gain_raw(double alpha, double m, const Vec3& lamp, const Vec3& pd);

/// LOS path gain between the lamp and PD `pd_index` of an MU at `mu`.
/// Returns 0 outside the field of view or when the PD is at/above the lamp
/// plane (hard FoV cutoff).
double los_gain(const Scenario& s, int pd_index, const Vec3& mu);

/// All M gains stacked.
Eigen::VectorXd los_gains(const Scenario& s, const Vec3& mu);

/// Closed-form spatial gradient (dh/dx_u, dh/dy_u, dh/dz_u) of los_gain.
/// Throws std::domain_error when the gain is clipped to zero (the gradient of
/// the clipped region is undefined; callers must stay off the FoV boundary).
Vec3 los_gain_gradient(const Scenario& s, int pd_index, const Vec3& mu);

}  // namespace vlpc
