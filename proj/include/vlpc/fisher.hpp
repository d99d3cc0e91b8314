#pragma once
// Fisher information of the MU position under the gain-observation model and
// the CRLB metrics derived from it.

#include "vlpc/scenario.hpp"

#include <Eigen/Core>

namespace vlpc {

struct FisherInfo {
    Eigen::Matrix3d q;      // gradient outer-product sum
    double scale;           // T_p (P_p eps + I_dc^2) / sigma2_p
    double bandwidth_hz;    // B, applied at inversion time
};

/// Q[a][b] = sum_i dh_i/du_a dh_i/du_b; symmetric by construction.
/// Throws std::runtime_error on a degenerate PD layout (cond > 1e12).
Eigen::Matrix3d q_matrix(const Scenario& s, const Vec3& mu);

/// J_p = scale * Q with the bandwidth convention applied at inversion time.
FisherInfo fim(const Scenario& s, const Vec3& mu, double p_p);

/// Tr(J_p^-1) = B sigma2_p Tr(Q^-1) / (T_p (P_p eps + I_dc^2))  [m^2],
/// computed through the closed-form 3x3 adjugate inverse.
double crlb_trace(const FisherInfo& info);

/// E_p = B sigma2_p Q^-1 / (T_p (P_p eps + I_dc^2)); the reported CRLB
/// covariance (PSD, trace == crlb_trace).
Eigen::Matrix3d crlb_covariance(const FisherInfo& info);

/// J_p^-1 without the bandwidth factor: the covariance actually attained by
/// the gain-domain ML estimator, used for CSI-error propagation.
Eigen::Matrix3d position_error_covariance(const FisherInfo& info);

}  // namespace vlpc
