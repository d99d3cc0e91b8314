#pragma once
// Exact OOK mutual information (Gauss-Hermite), the closed-form achievable
// rate lower bound, and the rate-threshold transform delta.

#include <Eigen/Core>

namespace vlpc {

struct RateContext {
    double s_eff;          // effective gain v^T h
    double p_c;            // communication power [W]
    double peak_amp;       // A
    double bandwidth_hz;   // B
    double sigma2_c;       // noise PSD [W/Hz]
};

/// Gauss-Hermite nodes/weights (weight exp(-x^2)) via Golub-Welsch.
void gauss_hermite(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

/// Gauss-Laguerre nodes/weights (weight exp(-x) on [0, inf)).
void gauss_laguerre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

/// Per-use OOK mutual information as a function of the per-sample
/// amplitude-to-noise ratio r = a/sigma; clamped to [0, 1]. Gauss-Hermite at
/// small r; for larger r the symbol-crossing layer is integrated by a
/// closed-form bulk plus a layer-centered Gauss-Laguerre rule of the same
/// order, which keeps the 64- and 128-node rules within 1e-9 everywhere.
double ook_mi_ratio(double r, int nodes = 64);

/// Per-use mutual information of the context; the per-sample amplitude is
/// s_eff sqrt(P_c/(2B)) A and the per-sample noise variance sigma2_c/2, so
/// the Jensen bound of rate_exact is exactly rate_lower_bound.
double mi_exact_per_use(const RateContext& ctx, int nodes = 64);

/// 2B * mi_exact_per_use [bit/s].
double rate_exact(const RateContext& ctx);

/// R = 3B - B/ln2 - 2B log2(1 + exp(-(v^T h)^2 P_c A^2 / (4 B sigma2_c)));
/// raw value, may be negative.
double rate_lower_bound(const RateContext& ctx);

/// Supremum of rate_lower_bound: B (3 - 1/ln2).
double rate_lower_bound_limit(double bandwidth_hz);

/// delta = -(4 B sigma2_c / A^2) ln(2^(3/2 - 1/(2 ln2) - rbar/(2B)) - 1);
/// the rate constraint R <= rbar becomes (v^T h)^2 <= delta / P_c.
/// Throws std::domain_error when rbar is outside [0, B(3 - 1/ln2)).
double delta_threshold(double rbar, double bandwidth_hz, double sigma2_c, double peak_amp);

}  // namespace vlpc
