#include "vlpc/scenario.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vlpc {

std::vector<Vec3> equilateral_pd_offsets(double side) {
    const double r = side / std::sqrt(3.0);
    return {Vec3(r, 0.0, 0.0), Vec3(-r / 2.0, side / 2.0, 0.0),
            Vec3(-r / 2.0, -side / 2.0, 0.0)};
}

void Scenario::validate() const {
    std::vector<std::string> bad;
    auto require = [&](bool ok, const std::string& msg) {
        if (!ok) bad.push_back(msg);
    };

    require(lamp.allFinite() && mu_position.allFinite(), "lamp/mu_position must be finite");
    require(pd_offsets.size() >= 3, "pd_offsets: need at least 3 PDs");
    for (std::size_t i = 0; i < pd_offsets.size(); ++i) {
        require(pd_offsets[i].allFinite(), "pd_offsets[" + std::to_string(i) + "] not finite");
        require(lamp.z() > mu_position.z() + pd_offsets[i].z(),
                "pd_offsets[" + std::to_string(i) + "]: PD must lie strictly below the lamp");
    }
    // Horizontal collinearity would make the FIM singular.
    if (pd_offsets.size() >= 3) {
        double max_area = 0.0;
        for (std::size_t i = 0; i + 2 < pd_offsets.size() + 0; ++i)
            for (std::size_t j = i + 1; j < pd_offsets.size(); ++j)
                for (std::size_t k = j + 1; k < pd_offsets.size(); ++k) {
                    const Vec3 a = pd_offsets[j] - pd_offsets[i];
                    const Vec3 b = pd_offsets[k] - pd_offsets[i];
                    max_area = std::max(max_area, std::abs(a.x() * b.y() - a.y() * b.x()));
                }
        require(max_area > 1e-12, "pd_offsets are collinear in the horizontal plane");
    }

    require(channel.theta_half_deg > 0 && channel.theta_half_deg < 90,
            "channel.theta_half_deg must lie in (0, 90)");
    require(channel.a_pd > 0, "channel.a_pd must be positive");
    require(channel.g_conc > 0, "channel.g_conc must be positive");
    require(channel.t_f > 0, "channel.t_f must be positive");
    require(channel.fov_deg > 0 && channel.fov_deg <= 90, "channel.fov_deg must lie in (0, 90]");

    require(sigma2_p > 0, "sigma2_p must be positive");
    require(sigma2_c > 0, "sigma2_c must be positive");
    require(bandwidth_hz > 0, "bandwidth_hz must be positive");
    require(t_p > 0, "t_p must be positive");
    require(t_u > 0, "t_u must be positive");
    require(t_c > 0, "t_c must be positive");
    require(i_dc > 0, "i_dc must be positive");
    require(peak_amp > 0, "peak_amp must be positive");
    require(eps_sym > 0, "eps_sym must be positive");
    require(p_o_max > 0, "p_o_max must be positive");
    require(p_e_max > 0, "p_e_max must be positive");

    if (!bad.empty()) {
        std::ostringstream oss;
        oss << "invalid scenario:";
        for (const auto& b : bad) oss << "\n  - " << b;
        throw std::invalid_argument(oss.str());
    }
}

double lambertian_order(double theta_half_deg) {
    if (!(theta_half_deg > 0.0) || !(theta_half_deg < 90.0))
        throw std::domain_error("lambertian_order: theta_half_deg outside (0, 90)");
    const double c = std::cos(theta_half_deg * M_PI / 180.0);
    return -std::log(2.0) / std::log(c);
}

double alpha_const(const ChannelParams& params) {
    const double m = lambertian_order(params.theta_half_deg);
    return (m + 1.0) * params.a_pd * params.g_conc * params.t_f / (2.0 * M_PI);
}

double lambertian_gain_raw(double alpha, double m, const Vec3& lamp, const Vec3& pd) {
    const double dz = lamp.z() - pd.z();
    const double d = (lamp - pd).norm();
    return alpha * std::pow(dz, m + 1.0) / std::pow(d, m + 3.0);
}

namespace {

// Shared gain/FoV evaluation. Returns false when the gain clips to zero.
bool gain_geometry(const Scenario& s, int pd_index, const Vec3& mu, Vec3& pd, double& dz,
                   double& d) {
    pd = mu + s.pd_offsets.at(static_cast<std::size_t>(pd_index));
    dz = s.lamp.z() - pd.z();
    if (dz <= 0.0) return false;
    d = (s.lamp - pd).norm();
    // Incidence angle equals radiance angle here (lamp points down, PD up).
    const double cos_fov = std::cos(s.channel.fov_deg * M_PI / 180.0);
    return dz / d > cos_fov;
}

}  // namespace

double los_gain(const Scenario& s, int pd_index, const Vec3& mu) {
    Vec3 pd;
    double dz, d;
    if (!gain_geometry(s, pd_index, mu, pd, dz, d)) return 0.0;
    const double m = lambertian_order(s.channel.theta_half_deg);
    return lambertian_gain_raw(alpha_const(s.channel), m, s.lamp, pd);
}

Eigen::VectorXd los_gains(const Scenario& s, const Vec3& mu) {
    Eigen::VectorXd h(static_cast<Eigen::Index>(s.pd_count()));
    for (int i = 0; i < h.size(); ++i) h[i] = los_gain(s, i, mu);
    return h;
}

Vec3 los_gain_gradient(const Scenario& s, int pd_index, const Vec3& mu) {
    Vec3 pd;
    double dz, d;
    if (!gain_geometry(s, pd_index, mu, pd, dz, d))
        throw std::domain_error("los_gain_gradient: PD outside FoV (gain clipped to 0)");
    const double m = lambertian_order(s.channel.theta_half_deg);
    const double alpha = alpha_const(s.channel);

    const double dm3 = std::pow(d, m + 3.0);
    const double dm5 = dm3 * d * d;
    const double dzm = std::pow(dz, m);

    Vec3 g;
    g.x() = -alpha * (m + 3.0) * dzm * dz * (pd.x() - s.lamp.x()) / dm5;
    g.y() = -alpha * (m + 3.0) * dzm * dz * (pd.y() - s.lamp.y()) / dm5;
    g.z() = -(m + 1.0) * alpha * dzm / dm3 + (m + 3.0) * alpha * dzm * dz * dz / dm5;
    return g;
}

}  // namespace vlpc
