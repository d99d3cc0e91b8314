#pragma once
// Positioning-error to CSI-error map and Monte-Carlo estimation of its first
// two moments plus the Omega block matrix.

#include "vlpc/scenario.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace vlpc {

struct CsiMoments {
    Eigen::VectorXd mu;     // mean of Delta h              (M)
    Eigen::MatrixXd d;      // covariance of Delta h        (M x M)
    Eigen::MatrixXd omega;  // [[D + mu mu^T, mu], [mu^T, 1]]  ((M+1) x (M+1))
    int n_samples = 0;
    std::uint64_t seed = 0;
};

/// Delta h_i = los_gain(u_hat + e_p) - los_gain(u_hat), both FoV-clipped.
double csi_error(const Scenario& s, const Vec3& u_hat, const Vec3& e_p, int pd_index);

/// Draws e_p ~ N(0, e_p_cov) through a symmetric square root, evaluates
/// Delta h per sample and returns the sample mean, covariance (n-1
/// denominator) and Omega. Deterministic per seed; chunked accumulation is
/// order-independent, so threaded and serial runs agree bit for bit.
/// Throws std::invalid_argument on a non-PSD covariance or n_samples < 2.
CsiMoments csi_moments(const Scenario& s, const Vec3& u_hat, const Eigen::Matrix3d& e_p_cov,
                       int n_samples, std::uint64_t seed);

}  // namespace vlpc
