#include "vlpc/ook_rate.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace vlpc {

void gauss_hermite(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: n >= 1 required");
    // Golub-Welsch on the Hermite Jacobi matrix (off-diagonals sqrt(k/2)).
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = std::sqrt(k / 2.0);
        jac(k, k - 1) = b;
        jac(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    nodes = es.eigenvalues();
    weights.resize(n);
    const double sqrt_pi = std::sqrt(M_PI);
    for (int k = 0; k < n; ++k) {
        const double v0 = es.eigenvectors()(0, k);
        weights[k] = sqrt_pi * v0 * v0;
    }
}

void gauss_laguerre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
    if (n < 1) throw std::invalid_argument("gauss_laguerre: n >= 1 required");
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        jac(k, k) = 2.0 * k + 1.0;
        if (k > 0) {
            jac(k, k - 1) = k;
            jac(k - 1, k) = k;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    nodes = es.eigenvalues();
    weights.resize(n);
    for (int k = 0; k < n; ++k) {
        const double v0 = es.eigenvectors()(0, k);
        weights[k] = v0 * v0;
    }
}

namespace {

enum class Rule { hermite, laguerre };

const std::pair<Eigen::VectorXd, Eigen::VectorXd>& cached_rule(Rule rule, int n) {
    static std::mutex mtx;
    static std::map<std::pair<int, int>, std::pair<Eigen::VectorXd, Eigen::VectorXd>> cache;
    std::lock_guard<std::mutex> lock(mtx);
    const auto key = std::make_pair(static_cast<int>(rule), n);
    auto it = cache.find(key);
    if (it == cache.end()) {
        Eigen::VectorXd x, w;
        if (rule == Rule::hermite) gauss_hermite(n, x, w);
        else gauss_laguerre(n, x, w);
        it = cache.emplace(key, std::make_pair(std::move(x), std::move(w))).first;
    }
    return it->second;
}

// log((exp(-u) + exp(-w)) / 2) evaluated without underflow.
double log_mean_exp_neg(double u, double w) {
    const double lo = std::min(u, w);
    return -lo + std::log1p(std::exp(-std::abs(u - w))) - std::log(2.0);
}

// exp(x) log(1 + exp(-x)) for x >= 0, stable up to the asymptote 1.
double scaled_softplus(double x) {
    if (x > 30.0) return 1.0;
    return std::exp(x) * std::log1p(std::exp(-x));
}

// Below this ratio the plain Gauss-Hermite rule already resolves the
// symbol-crossing layer; above it the layer (width ~1/r at distance r/2)
// falls between Hermite nodes and the rule stalls near 1e-7.
constexpr double kLayerSwitch = 2.0;

double mi_small_r(double r, int nodes) {
    const auto& [x, w] = cached_rule(Rule::hermite, nodes);
    // I = -E_x{ log2((exp(-x^2) + exp(-(r + sqrt2 x)^2/2))/2) } - 1/(2 ln2),
    // x standard GH variable; both symbol hypotheses give the same expectation.
    const double sqrt2 = std::sqrt(2.0);
    double acc = 0.0;
    for (int k = 0; k < x.size(); ++k) {
        const double u = x[k] * x[k];
        const double t = r + sqrt2 * x[k];
        acc += w[k] * log_mean_exp_neg(u, 0.5 * t * t);
    }
    const double ln2 = std::log(2.0);
    return -acc / (std::sqrt(M_PI) * ln2) - 1.0 / (2.0 * ln2);
}

// Exact split I = 1 - (C + T)/ln2 over zeta ~ N(0,1) with
// Delta(zeta) = r^2/2 + r zeta:
//   C = E[(-Delta)^+]              (closed form via erfc)
//   T = E[log1p(exp(-|Delta|))]    (Gauss-Laguerre centered on the layer)
double mi_large_r(double r, int nodes) {
    const double c = r / 2.0;
    const double pdf = std::exp(-0.5 * c * c) / std::sqrt(2.0 * M_PI);
    const double tail_cdf = 0.5 * std::erfc(c / std::sqrt(2.0));
    const double bulk = r * (pdf - c * tail_cdf);

    const auto& [x, w] = cached_rule(Rule::laguerre, nodes);
    const double zeta0 = -c;
    double t_acc = 0.0;
    for (int k = 0; k < x.size(); ++k) {
        const double f = scaled_softplus(x[k]);
        const double zp = zeta0 + x[k] / r;
        const double zm = zeta0 - x[k] / r;
        t_acc += w[k] * f * (std::exp(-0.5 * zp * zp) + std::exp(-0.5 * zm * zm));
    }
    const double layer = t_acc / (r * std::sqrt(2.0 * M_PI));
    return 1.0 - (bulk + layer) / std::log(2.0);
}

}  // namespace

double ook_mi_ratio(double r, int nodes) {
    r = std::abs(r);
    const double mi = (r < kLayerSwitch) ? mi_small_r(r, nodes) : mi_large_r(r, nodes);
    return std::min(std::max(mi, 0.0), 1.0);
}

double mi_exact_per_use(const RateContext& ctx, int nodes) {
    if (ctx.bandwidth_hz <= 0) throw std::invalid_argument("mi_exact_per_use: bandwidth must be positive");
    if (ctx.p_c < 0) throw std::invalid_argument("mi_exact_per_use: p_c must be nonnegative");
    const double r = std::abs(ctx.s_eff) * ctx.peak_amp *
                     std::sqrt(ctx.p_c / (ctx.bandwidth_hz * ctx.sigma2_c));
    return ook_mi_ratio(r, nodes);
}

double rate_exact(const RateContext& ctx) {
    return 2.0 * ctx.bandwidth_hz * mi_exact_per_use(ctx);
}

double rate_lower_bound(const RateContext& ctx) {
    const double ln2 = std::log(2.0);
    const double b = ctx.bandwidth_hz;
    const double x = ctx.s_eff * ctx.s_eff * ctx.p_c * ctx.peak_amp * ctx.peak_amp /
                     (4.0 * b * ctx.sigma2_c);
    return 3.0 * b - b / ln2 - 2.0 * b * std::log1p(std::exp(-x)) / ln2;
}

double rate_lower_bound_limit(double bandwidth_hz) {
    return bandwidth_hz * (3.0 - 1.0 / std::log(2.0));
}

double delta_threshold(double rbar, double bandwidth_hz, double sigma2_c, double peak_amp) {
    if (rbar < 0) throw std::domain_error("delta_threshold: rbar must be nonnegative");
    const double ln2 = std::log(2.0);
    const double c = 1.5 - 1.0 / (2.0 * ln2) - rbar / (2.0 * bandwidth_hz);
    if (c <= 0.0)
        throw std::domain_error("delta_threshold: rbar >= B(3 - 1/ln2), lower bound can never reach it");
    const double arg = std::expm1(c * ln2);  // 2^c - 1 > 0
    return -(4.0 * bandwidth_hz * sigma2_c / (peak_amp * peak_amp)) * std::log(arg);
}

}  // namespace vlpc
