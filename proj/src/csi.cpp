#include "vlpc/csi.hpp"

#include "vlpc/rng.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <future>
#include <stdexcept>
#include <vector>

namespace vlpc {

double csi_error(const Scenario& s, const Vec3& u_hat, const Vec3& e_p, int pd_index) {
    return los_gain(s, pd_index, u_hat + e_p) - los_gain(s, pd_index, u_hat);
}

namespace {

struct ChunkStats {
    Eigen::VectorXd sum;
    Eigen::MatrixXd outer;
    long count = 0;

    void merge(const ChunkStats& o) {
        sum += o.sum;
        outer += o.outer;
        count += o.count;
    }
};

constexpr int kChunk = 1024;

ChunkStats run_chunk(const Scenario& s, const Vec3& u_hat, const Eigen::Matrix3d& sqrt_cov,
                     const Eigen::VectorXd& h0, int chunk_index, long n_total,
                     std::uint64_t seed) {
    const int m = static_cast<int>(s.pd_count());
    ChunkStats st;
    st.sum = Eigen::VectorXd::Zero(m);
    st.outer = Eigen::MatrixXd::Zero(m, m);

    auto eng = make_engine(seed, static_cast<std::uint64_t>(chunk_index) + 1);
    std::normal_distribution<double> normal(0.0, 1.0);

    const long begin = static_cast<long>(chunk_index) * kChunk;
    const long end = std::min(begin + kChunk, n_total);
    Eigen::VectorXd dh(m);
    for (long k = begin; k < end; ++k) {
        const Vec3 z(normal(eng), normal(eng), normal(eng));
        const Vec3 e = sqrt_cov * z;
        for (int i = 0; i < m; ++i) dh[i] = los_gain(s, i, u_hat + e) - h0[i];
        st.sum += dh;
        st.outer.noalias() += dh * dh.transpose();
        ++st.count;
    }
    return st;
}

// Pairwise merge in a fixed order; identical result for any thread count.
ChunkStats reduce(std::vector<ChunkStats>& parts) {
    for (std::size_t stride = 1; stride < parts.size(); stride *= 2)
        for (std::size_t i = 0; i + stride < parts.size(); i += 2 * stride)
            parts[i].merge(parts[i + stride]);
    return parts[0];
}

}  // namespace

CsiMoments csi_moments(const Scenario& s, const Vec3& u_hat, const Eigen::Matrix3d& e_p_cov,
                       int n_samples, std::uint64_t seed) {
    if (n_samples < 2) throw std::invalid_argument("csi_moments: n_samples must be >= 2");
    if ((e_p_cov - e_p_cov.transpose()).cwiseAbs().maxCoeff() >
        1e-9 * (1.0 + e_p_cov.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("csi_moments: covariance not symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(e_p_cov);
    const double tol = -1e-10 * std::max(1e-300, e_p_cov.trace());
    if (es.eigenvalues().minCoeff() < tol)
        throw std::invalid_argument("csi_moments: covariance not positive semidefinite");
    const Eigen::Matrix3d sqrt_cov = es.eigenvectors() *
                                     es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                                     es.eigenvectors().transpose();

    const Eigen::VectorXd h0 = los_gains(s, u_hat);
    const int n_chunks = static_cast<int>((n_samples + kChunk - 1) / kChunk);
    std::vector<ChunkStats> parts(static_cast<std::size_t>(n_chunks));

    const int threads = std::min(thread_budget(), n_chunks);
    if (threads <= 1) {
        for (int c = 0; c < n_chunks; ++c)
            parts[static_cast<std::size_t>(c)] = run_chunk(s, u_hat, sqrt_cov, h0, c, n_samples, seed);
    } else {
        std::vector<std::future<void>> jobs;
        std::atomic<int> next{0};
        for (int t = 0; t < threads; ++t)
            jobs.push_back(std::async(std::launch::async, [&] {
                for (int c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1))
                    parts[static_cast<std::size_t>(c)] =
                        run_chunk(s, u_hat, sqrt_cov, h0, c, n_samples, seed);
            }));
        for (auto& j : jobs) j.get();
    }
    const ChunkStats total = reduce(parts);

    const int m = static_cast<int>(s.pd_count());
    const double n = static_cast<double>(total.count);
    CsiMoments mom;
    mom.mu = total.sum / n;
    mom.d = (total.outer - n * mom.mu * mom.mu.transpose()) / (n - 1.0);
    mom.d = ((mom.d + mom.d.transpose()) / 2.0).eval();
    mom.omega.resize(m + 1, m + 1);
    mom.omega.topLeftCorner(m, m) = mom.d + mom.mu * mom.mu.transpose();
    mom.omega.topRightCorner(m, 1) = mom.mu;
    mom.omega.bottomLeftCorner(1, m) = mom.mu.transpose();
    mom.omega(m, m) = 1.0;
    mom.n_samples = n_samples;
    mom.seed = seed;
    return mom;
}

}  // namespace vlpc
