#pragma once
// Robust positioning/communication power allocation: worst-case CVaR over the
// moment ambiguity set, the VLC SDP subproblem, the closed-form VLP update,
// the block-coordinate-descent loop, and rank-one beamformer extraction.

#include "vlpc/csi.hpp"
#include "vlpc/scenario.hpp"
#include "vlpc/sdp.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace vlpc {

/// A (rbar, p_out, p_total) combination with no feasible allocation.
class InfeasibleError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AllocationConfig {
    double p_total = 10.0;   // P_T [W]
    double rbar = 10e6;      // minimum rate [bit/s]
    double p_out = 0.05;     // outage tolerance
    double p_p_max = 0.0;    // per-signal caps [W]
    double p_c_max = 0.0;
    double bcd_tol = 1e-9;   // stopping tolerance on |d Tr(J^-1)| [m^2]
    int max_iters = 50;
    int moment_samples = 10000;
    std::uint64_t moment_seed = 12345;  // fixed seed reused every refresh

    /// Caps from the scenario's optical/electrical limits:
    /// p_p_max = min{I^2/A^2, (Po-I)^2/A^2, (Pe-I^2)/eps},
    /// p_c_max = min{Po^2/A^2, 2 Pe/A^2}.
    static AllocationConfig for_scenario(const Scenario& s, double p_total, double rbar,
                                         double p_out);
    void validate() const;
};

struct CvarCertificate {
    Eigen::MatrixXd w;  // (M+1)x(M+1) PSD certificate (the auxiliary matrix of the CVaR SDP)
    double beta = 0.0;
    double t = 0.0;     // surrogate for delta / P_c
};

struct BcdStep {
    double objective;  // Tr(J_p^-1) [m^2]
    double p_p;
    double p_c;
};

struct AllocationResult {
    double p_p = 0.0;
    double p_c = 0.0;
    Eigen::MatrixXd v_matrix;  // relaxed beamformer, Tr = 1
    Eigen::VectorXd v;         // extracted unit beamformer
    double crlb = 0.0;         // Tr(J_p^-1) at p_p [m^2]
    std::vector<BcdStep> trace;
    bool rank1 = false;        // lambda2/lambda1 <= 1e-6 at the SDR optimum
    double rank_ratio = 0.0;
    bool converged = false;
    int iterations = 0;
    CvarCertificate certificate;
    CsiMoments moments;        // CSI-error moments at the converged p_p
    Eigen::VectorXd h_hat;     // gains at the operating point
    double delta = 0.0;
};

/// Worst-case CVaR of L(xi) = xi^T Q xi + q^T xi + q0 over all distributions
/// with mean mu and covariance Sigma, at level rho, via the moment SDP.
double worst_case_cvar_quadratic(const Eigen::MatrixXd& q_mat, const Eigen::VectorXd& q_vec,
                                 double q0, const Eigen::VectorXd& mu,
                                 const Eigen::MatrixXd& sigma, double rho);

/// The assembled (and internally rescaled) VLC subproblem.
struct VlcSdp {
    sdp::SdpProblem problem;
    double gain_scale;         // ||h_hat||
    double power_scale;        // delta / ||h_hat||^2
    double uncertainty_scale;  // CSI-error coordinate conjugation factor
    int block_v, block_w, block_s, block_t;
    int free_beta;
    double p_c_bound;
};

/// Assemble the VLC subproblem: min P_c over {V, W, beta, t, P_c} subject to
/// the CVaR constraints, Tr(V) = 1, V,W >= 0 and the t P_c >= delta coupling
/// (2x2 PSD block). The upper bound on P_c is enforced by post-check: it can
/// never be active at a min-P_c optimum, violating it means infeasible.
VlcSdp build_vlc_sdp(const Eigen::VectorXd& h_hat, const Eigen::MatrixXd& omega, double delta,
                     const AllocationConfig& config, double p_c_bound);

struct VlcSolution {
    double p_c;
    Eigen::MatrixXd v_matrix;
    CvarCertificate certificate;
    double rank_ratio;  // lambda2/lambda1 of v_matrix
};

/// Solve the VLC subproblem; the returned solution has passed the independent
/// verify_solution audit. Throws InfeasibleError when the CVaR constraint
/// cannot be met at P_c <= p_c_bound.
VlcSolution solve_vlc_subproblem(const Eigen::VectorXd& h_hat, const Eigen::MatrixXd& omega,
                                 double delta, const AllocationConfig& config, double p_c_bound);

/// Closed-form VLP subproblem optimum: min(p_p_max, p_total - p_c).
/// Throws InfeasibleError when p_c alone exceeds the budget.
double vlp_power_update(double p_c, const AllocationConfig& config);

/// Minimal feasible P_c for a fixed unit beamformer (rank-1 restriction).
double min_pc_for_fixed_v(const Eigen::VectorXd& v, const Eigen::VectorXd& h_hat,
                          const Eigen::MatrixXd& omega, double delta,
                          const AllocationConfig& config);

/// Principal eigenvector when the SDR optimum is (numerically) rank one,
/// otherwise Gaussian randomization: candidates xi ~ N(0, V), each scored by
/// its minimal feasible P_c. Sign convention: first nonzero component > 0.
Eigen::VectorXd extract_beamformer(const Eigen::MatrixXd& v_matrix, const Eigen::VectorXd& h_hat,
                                   const Eigen::MatrixXd& omega, double delta,
                                   const AllocationConfig& config, std::uint64_t seed,
                                   int n_candidates = 100);

/// Block coordinate descent; see AllocationResult. The bootstrap solves the
/// VLC subproblem once with the loosest moments (P_p = 0) so the iterates
/// approach the fixed point from below and the objective is nonincreasing.
AllocationResult bcd_optimize(const Scenario& s, const Vec3& u_hat, const AllocationConfig& config,
                              std::uint64_t seed);

}  // namespace vlpc
