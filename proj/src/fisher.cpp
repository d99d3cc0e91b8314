#include "vlpc/fisher.hpp"

#include <cmath>
#include <stdexcept>

namespace vlpc {

namespace {

// Closed-form adjugate inverse; keeps golden tests free of iterative-solver
// noise. Throws when the matrix is numerically singular.
Eigen::Matrix3d invert3_adjugate(const Eigen::Matrix3d& a) {
    Eigen::Matrix3d adj;
    adj(0, 0) = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
    adj(0, 1) = a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2);
    adj(0, 2) = a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1);
    adj(1, 0) = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
    adj(1, 1) = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
    adj(1, 2) = a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2);
    adj(2, 0) = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
    adj(2, 1) = a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1);
    adj(2, 2) = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    const double det = a(0, 0) * adj(0, 0) + a(0, 1) * adj(1, 0) + a(0, 2) * adj(2, 0);
    if (det == 0.0) throw std::runtime_error("q_matrix is singular");
    const Eigen::Matrix3d inv = adj / det;
    const double cond_est = a.cwiseAbs().maxCoeff() * inv.cwiseAbs().maxCoeff() * 3.0;
    if (!(cond_est < 1e12)) throw std::runtime_error("q_matrix is numerically singular (cond > 1e12)");
    return inv;
}

}  // namespace

Eigen::Matrix3d q_matrix(const Scenario& s, const Vec3& mu) {
    Eigen::Matrix3d q = Eigen::Matrix3d::Zero();
    for (int i = 0; i < static_cast<int>(s.pd_count()); ++i) {
        const Vec3 g = los_gain_gradient(s, i, mu);
        q.noalias() += g * g.transpose();
    }
    // exact symmetry regardless of summation rounding
    q = ((q + q.transpose()) / 2.0).eval();
    invert3_adjugate(q);  // degenerate-layout check
    return q;
}

FisherInfo fim(const Scenario& s, const Vec3& mu, double p_p) {
    if (p_p < 0) throw std::invalid_argument("fim: p_p must be nonnegative");
    FisherInfo info;
    info.q = q_matrix(s, mu);
    info.scale = s.t_p * (p_p * s.eps_sym + s.i_dc * s.i_dc) / s.sigma2_p;
    info.bandwidth_hz = s.bandwidth_hz;
    return info;
}

double crlb_trace(const FisherInfo& info) {
    return crlb_covariance(info).trace();
}

Eigen::Matrix3d crlb_covariance(const FisherInfo& info) {
    return info.bandwidth_hz * invert3_adjugate(info.q) / info.scale;
}

Eigen::Matrix3d position_error_covariance(const FisherInfo& info) {
    return invert3_adjugate(info.q) / info.scale;
}

}  // namespace vlpc
