#include "vlpc/sdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace vlpc::sdp {

const char* to_string(Status st) {
    switch (st) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::numerical_limit: return "numerical-limit";
    }
    return "?";
}

int SdpProblem::add_psd_block(int dim) {
    if (dim < 1) throw std::invalid_argument("add_psd_block: dim >= 1 required");
    block_dims_.push_back(dim);
    return static_cast<int>(block_dims_.size()) - 1;
}

int SdpProblem::add_free_var() { return n_free_++; }

void SdpProblem::add_eq(Expr e, double rhs) { eqs_.emplace_back(std::move(e), rhs); }
void SdpProblem::add_ineq(Expr e, double rhs) { ineqs_.emplace_back(std::move(e), rhs); }

double SdpSolution::eval(const Expr& e) const {
    double v = e.constant;
    for (const auto& t : e.terms) v += t.coef * psd[static_cast<std::size_t>(t.block)](t.row, t.col);
    for (const auto& [idx, coef] : e.free_terms) v += coef * free[idx];
    return v;
}

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

inline int tri_index(int i, int j) { return j * (j + 1) / 2 + i; }  // i <= j

struct Cone {
    std::vector<int> dims;
    std::vector<int> offs;
    int total = 0;
    double nu = 0;

    void push(int d) {
        dims.push_back(d);
        offs.push_back(total);
        total += d * (d + 1) / 2;
        nu += d;
    }
    int count() const { return static_cast<int>(dims.size()); }
};

Eigen::MatrixXd smat(const Eigen::VectorXd& v, int off, int d) {
    Eigen::MatrixXd m(d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i <= j; ++i) {
            const double val = v[off + tri_index(i, j)];
            if (i == j) m(i, i) = val;
            else m(i, j) = m(j, i) = val / kSqrt2;
        }
    return m;
}

void svec_into(const Eigen::MatrixXd& m, Eigen::VectorXd& v, int off) {
    const int d = static_cast<int>(m.rows());
    for (int j = 0; j < d; ++j)
        for (int i = 0; i <= j; ++i)
            v[off + tri_index(i, j)] = (i == j) ? m(i, i) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
}

void set_identity(Eigen::VectorXd& v, const Cone& cone) {
    v.setZero();
    for (int b = 0; b < cone.count(); ++b)
        for (int i = 0; i < cone.dims[b]; ++i) v[cone.offs[b] + tri_index(i, i)] = 1.0;
}

// Scalarized internal form: cone variables x (user PSD blocks + one 1x1 slack
// per inequality), native free variables u.
//   min c^T x + cf^T u   s.t.  A x + F u = b,  x in PSD cone product.
struct Internal {
    Cone cone;
    int n_user_blocks = 0;
    int slack_base = 0;
    Eigen::MatrixXd a;  // m x N
    Eigen::MatrixXd f;  // m x nf
    Eigen::VectorXd b;  // m
    Eigen::VectorXd c;  // N
    Eigen::VectorXd cf; // nf
    Eigen::VectorXd row_scale;
    double c_scale = 1, b_scale = 1;
};

void add_expr_row(const SdpProblem& p, const Internal& in, const Expr& e, Eigen::VectorXd& row,
                  Eigen::VectorXd& frow) {
    for (const auto& t : e.terms) {
        if (t.block < 0 || t.block >= static_cast<int>(p.psd_blocks().size()))
            throw std::invalid_argument("sdp: expr references unknown block");
        const int d = p.psd_blocks()[static_cast<std::size_t>(t.block)];
        if (t.row < 0 || t.col < 0 || t.row >= d || t.col >= d)
            throw std::invalid_argument("sdp: expr entry outside block");
        int i = t.row, j = t.col;
        if (i > j) std::swap(i, j);
        row[in.cone.offs[t.block] + tri_index(i, j)] += (i == j) ? t.coef : t.coef / kSqrt2;
    }
    for (const auto& [idx, coef] : e.free_terms) {
        if (idx < 0 || idx >= p.free_vars())
            throw std::invalid_argument("sdp: expr references unknown free var");
        frow[idx] += coef;
    }
}

Internal scalarize(const SdpProblem& p) {
    Internal in;
    for (int d : p.psd_blocks()) in.cone.push(d);
    in.n_user_blocks = in.cone.count();
    in.slack_base = in.cone.count();
    for (std::size_t k = 0; k < p.ineq_constraints().size(); ++k) in.cone.push(1);
    if (in.cone.total == 0) throw std::invalid_argument("sdp: no cone variables");

    const int m = static_cast<int>(p.eq_constraints().size() + p.ineq_constraints().size());
    if (m == 0) throw std::invalid_argument("sdp: at least one constraint required");
    const int nf = p.free_vars();
    in.a.setZero(m, in.cone.total);
    in.f.setZero(m, nf);
    in.b.setZero(m);
    in.c.setZero(in.cone.total);
    in.cf.setZero(nf);

    add_expr_row(p, in, p.objective(), in.c, in.cf);

    int r = 0;
    Eigen::VectorXd row, frow;
    for (const auto& [e, rhs] : p.eq_constraints()) {
        row.setZero(in.cone.total);
        frow.setZero(nf);
        add_expr_row(p, in, e, row, frow);
        in.a.row(r) = row;
        in.f.row(r) = frow;
        in.b[r] = rhs;
        ++r;
    }
    for (std::size_t k = 0; k < p.ineq_constraints().size(); ++k) {
        const auto& [e, rhs] = p.ineq_constraints()[k];
        row.setZero(in.cone.total);
        frow.setZero(nf);
        add_expr_row(p, in, e, row, frow);
        row[in.cone.offs[in.slack_base + static_cast<int>(k)]] = 1.0;
        in.a.row(r) = row;
        in.f.row(r) = frow;
        in.b[r] = rhs;
        ++r;
    }

    in.row_scale.resize(m);
    for (int k = 0; k < m; ++k) {
        double s = in.a.row(k).cwiseAbs().maxCoeff();
        if (nf > 0) s = std::max(s, in.f.row(k).cwiseAbs().maxCoeff());
        s = std::max(s, 1e-12);
        in.row_scale[k] = s;
        in.a.row(k) /= s;
        in.f.row(k) /= s;
        in.b[k] /= s;
    }
    double cmax = in.c.cwiseAbs().maxCoeff();
    if (nf > 0) cmax = std::max(cmax, in.cf.cwiseAbs().maxCoeff());
    in.c_scale = 1.0 + cmax;
    in.c /= in.c_scale;
    in.cf /= in.c_scale;
    in.b_scale = 1.0 + in.b.cwiseAbs().maxCoeff();
    in.b /= in.b_scale;
    return in;
}

struct BlockFactors {
    Eigen::MatrixXd lx, lz;
    Eigen::MatrixXd wmat;  // svec-space matrix of U -> W U W
    Eigen::MatrixXd zinv;
};

// Maximum alpha with X + alpha*D >= 0, given X = L L^T.
double step_to_boundary(const Eigen::MatrixXd& l, const Eigen::MatrixXd& d) {
    const Eigen::MatrixXd li =
        l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(l.rows(), l.cols()));
    Eigen::MatrixXd s = li * d * li.transpose();
    s = 0.5 * (s + s.transpose()).eval();
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().minCoeff();
    if (lmin >= 0) return std::numeric_limits<double>::infinity();
    return -1.0 / lmin;
}

// Homogeneous self-dual embedding with NT scaling and Mehrotra-style
// predictor-corrector. Free variables sit in a bordered KKT block.
class Hsd {
public:
    Hsd(const Internal& in, const SolveOptions& opt)
        : in_(in), opt_(opt), m_(static_cast<int>(in.a.rows())), nf_(static_cast<int>(in.f.cols())) {}

    Status run();

    Eigen::VectorXd x, u, y, z;
    double tau = 1, kappa = 1;
    int iterations = 0;

private:
    bool factorize();
    void apply_w(const Eigen::VectorXd& v, Eigen::VectorXd& out) const;
    void newton(const Eigen::VectorXd& rc, double rtk, const Eigen::VectorXd& rp,
                const Eigen::VectorXd& rd, const Eigen::VectorXd& rdf, double rg,
                Eigen::VectorXd& dx, Eigen::VectorXd& du, Eigen::VectorXd& dy,
                Eigen::VectorXd& dz, double& dtau, double& dkappa) const;
    double boundary_alpha(const Eigen::VectorXd& dx, const Eigen::VectorXd& dz, double dtau,
                          double dkappa) const;

    const Internal& in_;
    const SolveOptions& opt_;
    const int m_, nf_;
    std::vector<BlockFactors> fact_;
    Eigen::FullPivLU<Eigen::MatrixXd> kkt_;
    Eigen::MatrixXd kkt_mat_;  // unregularized, for iterative refinement
    Eigen::VectorXd wc_;   // W(c)
    Eigen::VectorXd awc_;  // A W(c)
    double cwc_ = 0;

    Eigen::VectorXd kkt_solve(const Eigen::VectorXd& rhs) const {
        Eigen::VectorXd g = kkt_.solve(rhs);
        for (int refine = 0; refine < 2; ++refine) {
            const Eigen::VectorXd resid = rhs - kkt_mat_ * g;
            g += kkt_.solve(resid);
        }
        return g;
    }
};

bool Hsd::factorize() {
    const Cone& cone = in_.cone;
    fact_.assign(static_cast<std::size_t>(cone.count()), {});
    for (int bb = 0; bb < cone.count(); ++bb) {
        const int d = cone.dims[bb];
        auto& f = fact_[static_cast<std::size_t>(bb)];
        const Eigen::MatrixXd xb = smat(x, cone.offs[bb], d);
        const Eigen::MatrixXd zb = smat(z, cone.offs[bb], d);
        Eigen::LLT<Eigen::MatrixXd> lltx(xb), lltz(zb);
        if (lltx.info() != Eigen::Success || lltz.info() != Eigen::Success) return false;
        f.lx = lltx.matrixL();
        f.lz = lltz.matrixL();
        f.zinv = lltz.solve(Eigen::MatrixXd::Identity(d, d));

        // NT scaling point: W = G G^T, G = L_x V S^{-1/2} from L_z^T L_x = U S V^T.
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(f.lz.transpose() * f.lx,
                                              Eigen::ComputeFullU | Eigen::ComputeFullV);
        if (svd.singularValues().minCoeff() <= 0) return false;
        const Eigen::MatrixXd g =
            f.lx * svd.matrixV() * svd.singularValues().cwiseSqrt().cwiseInverse().asDiagonal();
        const Eigen::MatrixXd w = g * g.transpose();

        const int sd = d * (d + 1) / 2;
        f.wmat.resize(sd, sd);
        Eigen::VectorXd basis = Eigen::VectorXd::Zero(sd);
        Eigen::VectorXd col(sd);
        for (int k = 0; k < sd; ++k) {
            basis[k] = 1.0;
            const Eigen::MatrixXd ub = smat(basis, 0, d);
            svec_into(w * ub * w, col, 0);
            f.wmat.col(k) = col;
            basis[k] = 0.0;
        }
    }

    Eigen::MatrixXd wa(cone.total, m_);
    Eigen::VectorXd tmp(cone.total);
    for (int k = 0; k < m_; ++k) {
        apply_w(in_.a.row(k).transpose(), tmp);
        wa.col(k) = tmp;
    }
    Eigen::MatrixXd ms = in_.a * wa;
    ms = 0.5 * (ms + ms.transpose()).eval();

    wc_.resize(cone.total);
    apply_w(in_.c, wc_);
    awc_ = in_.a * wc_;
    cwc_ = in_.c.dot(wc_);

    kkt_mat_.resize(m_ + nf_, m_ + nf_);
    kkt_mat_.topLeftCorner(m_, m_) = ms;
    if (nf_ > 0) {
        kkt_mat_.topRightCorner(m_, nf_) = in_.f;
        kkt_mat_.bottomLeftCorner(nf_, m_) = in_.f.transpose();
        kkt_mat_.bottomRightCorner(nf_, nf_).setZero();
    }
    const double base = std::max(ms.diagonal().cwiseAbs().maxCoeff(), 1e-12);
    double jitter = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::MatrixXd kkt = kkt_mat_;
        if (jitter > 0) kkt.topLeftCorner(m_, m_).diagonal().array() += jitter;
        if (nf_ > 0) kkt.bottomRightCorner(nf_, nf_).diagonal().array() -= 1e-14 * base;
        kkt_.compute(kkt);
        if (kkt_.isInvertible()) return true;
        jitter = (jitter == 0.0) ? 1e-14 * base : jitter * 100.0;
    }
    return false;
}

void Hsd::apply_w(const Eigen::VectorXd& v, Eigen::VectorXd& out) const {
    const Cone& cone = in_.cone;
    out.resize(cone.total);
    for (int bb = 0; bb < cone.count(); ++bb) {
        const int d = cone.dims[bb], off = cone.offs[bb], sd = d * (d + 1) / 2;
        out.segment(off, sd).noalias() =
            fact_[static_cast<std::size_t>(bb)].wmat * v.segment(off, sd);
    }
}

// Newton system of the HSD equations with NT complementarity
//   A dx + F du - b dtau                      = rp
//   A^T dy + dz - c dtau                      = rd
//   F^T dy - cf dtau                          = rdf
//   c^T dx + cf^T du - b^T dy + dkappa        = -rg   (rg carries the sign)
//   dx + W dz W                               = rc
//   tau dkappa + kappa dtau                   = rtk
void Hsd::newton(const Eigen::VectorXd& rc, double rtk, const Eigen::VectorXd& rp,
                 const Eigen::VectorXd& rd, const Eigen::VectorXd& rdf, double rg,
                 Eigen::VectorXd& dx, Eigen::VectorXd& du, Eigen::VectorXd& dy,
                 Eigen::VectorXd& dz, double& dtau, double& dkappa) const {
    Eigen::VectorXd wrd(in_.cone.total);
    apply_w(rd, wrd);

    Eigen::VectorXd rhs_a(m_ + nf_), rhs_b(m_ + nf_);
    rhs_a.head(m_) = rp - in_.a * rc + in_.a * wrd;
    rhs_b.head(m_) = awc_ + in_.b;
    if (nf_ > 0) {
        rhs_a.tail(nf_) = rdf;
        rhs_b.tail(nf_) = in_.cf;
    }
    const double r2 = rg - in_.c.dot(rc) + in_.c.dot(wrd) - rtk / tau;
    const double d2 = cwc_ + kappa / tau;

    const Eigen::VectorXd ga = kkt_solve(rhs_a);
    const Eigen::VectorXd gb = kkt_solve(rhs_b);

    Eigen::VectorXd v(m_ + nf_);
    v.head(m_) = awc_ - in_.b;
    if (nf_ > 0) v.tail(nf_) = in_.cf;
    const double denom = v.dot(gb) - d2;
    dtau = (std::abs(denom) > 1e-300) ? (r2 - v.dot(ga)) / denom : 0.0;

    const Eigen::VectorXd g = ga + gb * dtau;
    dy = g.head(m_);
    du = (nf_ > 0) ? Eigen::VectorXd(g.tail(nf_)) : Eigen::VectorXd();
    dz = rd - in_.a.transpose() * dy + in_.c * dtau;
    Eigen::VectorXd wdz(in_.cone.total);
    apply_w(dz, wdz);
    dx = rc - wdz;
    dkappa = (rtk - kappa * dtau) / tau;
}

double Hsd::boundary_alpha(const Eigen::VectorXd& dx, const Eigen::VectorXd& dz, double dtau,
                           double dkappa) const {
    const Cone& cone = in_.cone;
    double alpha = std::numeric_limits<double>::infinity();
    for (int bb = 0; bb < cone.count(); ++bb) {
        const int d = cone.dims[bb], off = cone.offs[bb];
        const auto& f = fact_[static_cast<std::size_t>(bb)];
        if (d == 1) {
            if (dx[off] < 0) alpha = std::min(alpha, -x[off] / dx[off]);
            if (dz[off] < 0) alpha = std::min(alpha, -z[off] / dz[off]);
        } else {
            alpha = std::min(alpha, step_to_boundary(f.lx, smat(dx, off, d)));
            alpha = std::min(alpha, step_to_boundary(f.lz, smat(dz, off, d)));
        }
    }
    if (dtau < 0) alpha = std::min(alpha, -tau / dtau);
    if (dkappa < 0) alpha = std::min(alpha, -kappa / dkappa);
    return alpha;
}

Status Hsd::run() {
    const Cone& cone = in_.cone;
    x.resize(cone.total);
    z.resize(cone.total);
    set_identity(x, cone);
    set_identity(z, cone);
    u = Eigen::VectorXd::Zero(nf_);
    y = Eigen::VectorXd::Zero(m_);
    tau = kappa = 1.0;

    const double bnorm = in_.b.cwiseAbs().maxCoeff();
    const double cnorm = std::max(in_.c.cwiseAbs().maxCoeff(),
                                  nf_ > 0 ? in_.cf.cwiseAbs().maxCoeff() : 0.0);
    const double anorm = in_.a.cwiseAbs().maxCoeff();
    int stall = 0;

    // best-merit iterate, restored when the path stalls
    double best_merit = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x = x, best_u = u, best_y = y, best_z = z;
    double best_tau = tau, best_kappa = kappa;
    auto restore_best = [&] {
        x = best_x;
        u = best_u;
        y = best_y;
        z = best_z;
        tau = best_tau;
        kappa = best_kappa;
    };

    for (iterations = 0; iterations < opt_.max_iter; ++iterations) {
        const double pobj = (in_.c.dot(x) + (nf_ ? in_.cf.dot(u) : 0.0)) / tau;
        const double dobj = in_.b.dot(y) / tau;
        double pres = ((in_.a * x + (nf_ ? (in_.f * u).eval() : Eigen::VectorXd::Zero(m_).eval())) / tau -
                       in_.b).cwiseAbs().maxCoeff() / (1.0 + bnorm);
        double dres =
            (in_.a.transpose() * y / tau + z / tau - in_.c).cwiseAbs().maxCoeff() / (1.0 + cnorm);
        if (nf_ > 0)
            dres = std::max(dres, (in_.f.transpose() * y / tau - in_.cf).cwiseAbs().maxCoeff() /
                                      (1.0 + cnorm));
        const double relgap =
            std::abs(pobj - dobj) / (1.0 + std::max(std::abs(pobj), std::abs(dobj)));
        if (opt_.trace)
            std::fprintf(stderr,
                         "it %3d  pobj %+.6e dobj %+.6e pres %.2e dres %.2e gap %.2e tau %.2e "
                         "kappa %.2e\n",
                         iterations, pobj, dobj, pres, dres, relgap, tau, kappa);
        if (pres <= opt_.tol_feas && dres <= opt_.tol_feas && relgap <= opt_.tol_gap)
            return Status::optimal;
        const double merit = std::max({pres, dres, relgap});
        if (merit < best_merit) {
            best_merit = merit;
            best_x = x;
            best_u = u;
            best_y = y;
            best_z = z;
            best_tau = tau;
            best_kappa = kappa;
        }

        // Farkas-type certificates
        const double bty = in_.b.dot(y);
        if (bty > 1e-12) {
            double cert = (in_.a.transpose() * y + z).cwiseAbs().maxCoeff();
            if (nf_ > 0) cert = std::max(cert, (in_.f.transpose() * y).cwiseAbs().maxCoeff());
            if (cert <= 1e-8 * std::max(1.0, anorm) * bty) return Status::infeasible;
        }
        const double ctx = in_.c.dot(x) + (nf_ ? in_.cf.dot(u) : 0.0);
        if (ctx < -1e-12) {
            const double cert =
                (in_.a * x + (nf_ ? (in_.f * u).eval() : Eigen::VectorXd::Zero(m_).eval()))
                    .cwiseAbs().maxCoeff();
            if (cert <= 1e-8 * std::max(1.0, anorm) * (-ctx)) return Status::unbounded;
        }

        const double mu = (x.dot(z) + tau * kappa) / (cone.nu + 1.0);
        if (mu < 1e-18) { restore_best(); return Status::numerical_limit; }
        if (!factorize()) { restore_best(); return Status::numerical_limit; }

        const Eigen::VectorXd rp =
            in_.b * tau - in_.a * x - (nf_ ? (in_.f * u).eval() : Eigen::VectorXd::Zero(m_).eval());
        const Eigen::VectorXd rd = in_.c * tau - in_.a.transpose() * y - z;
        const Eigen::VectorXd rdf =
            nf_ ? Eigen::VectorXd(in_.cf * tau - in_.f.transpose() * y) : Eigen::VectorXd();
        const double rg = in_.b.dot(y) - in_.c.dot(x) - (nf_ ? in_.cf.dot(u) : 0.0) - kappa;

        // predictor
        Eigen::VectorXd dx, du, dy, dz;
        double dtau, dkappa;
        newton(-x, -tau * kappa, rp, rd, rdf, rg, dx, du, dy, dz, dtau, dkappa);
        const double alpha_aff = std::min(1.0, boundary_alpha(dx, dz, dtau, dkappa));
        const double mu_aff = ((x + alpha_aff * dx).dot(z + alpha_aff * dz) +
                               (tau + alpha_aff * dtau) * (kappa + alpha_aff * dkappa)) /
                              (cone.nu + 1.0);
        double sigma = std::pow(std::max(mu_aff / mu, 0.0), 3.0);
        sigma = std::min(std::max(sigma, 1e-10), 0.999);
        // keep centering while feasibility lags the gap, otherwise the cone
        // blocks the residual-reducing directions near the end
        if (std::max(pres, dres) > 10.0 * relgap) sigma = std::min(0.999, std::max(sigma, 0.5));

        // corrector (centering; Mehrotra second-order term kept on tau/kappa)
        Eigen::VectorXd rc(cone.total);
        Eigen::VectorXd sv;
        for (int bb = 0; bb < cone.count(); ++bb) {
            const int d = cone.dims[bb], off = cone.offs[bb];
            sv.resize(d * (d + 1) / 2);
            svec_into(fact_[static_cast<std::size_t>(bb)].zinv, sv, 0);
            rc.segment(off, sv.size()) = sigma * mu * sv - x.segment(off, sv.size());
        }
        const double rtk = sigma * mu - tau * kappa - dtau * dkappa;
        newton(rc, rtk, rp, rd, rdf, rg, dx, du, dy, dz, dtau, dkappa);

        const double alpha = std::min(1.0, 0.98 * boundary_alpha(dx, dz, dtau, dkappa));
        if (alpha < 1e-10) {
            if (++stall >= 3) { restore_best(); return Status::numerical_limit; }
        } else {
            stall = 0;
        }
        x += alpha * dx;
        if (nf_ > 0) u += alpha * du;
        y += alpha * dy;
        z += alpha * dz;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        if (!(tau > 0) || !(kappa >= 0) || !x.allFinite() || !z.allFinite() || !y.allFinite())
            { restore_best(); return Status::numerical_limit; }
    }
    { restore_best(); return Status::numerical_limit; }
}

Eigen::MatrixXd expr_block_matrix(const Expr& e, int block, int dim) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& t : e.terms) {
        if (t.block != block) continue;
        if (t.row == t.col) a(t.row, t.col) += t.coef;
        else {
            a(t.row, t.col) += t.coef / 2.0;
            a(t.col, t.row) += t.coef / 2.0;
        }
    }
    return a;
}

double expr_free_coef(const Expr& e, int index) {
    double v = 0;
    for (const auto& [idx, coef] : e.free_terms)
        if (idx == index) v += coef;
    return v;
}

}  // namespace

SdpSolution solve(const SdpProblem& problem, const SolveOptions& options) {
    const Internal in = scalarize(problem);
    Hsd hsd(in, options);
    const Status st = hsd.run();

    SdpSolution sol;
    sol.status = st;
    sol.iterations = hsd.iterations;

    const int nb = static_cast<int>(problem.psd_blocks().size());
    sol.psd.resize(static_cast<std::size_t>(nb));
    sol.dual_psd.resize(static_cast<std::size_t>(nb));
    sol.free.resize(problem.free_vars());
    const int m = static_cast<int>(in.a.rows());
    sol.y.resize(m);

    const double tau = (st == Status::optimal) ? hsd.tau : 1.0;
    for (int bb = 0; bb < nb; ++bb) {
        const int d = problem.psd_blocks()[static_cast<std::size_t>(bb)];
        sol.psd[static_cast<std::size_t>(bb)] = in.b_scale * smat(hsd.x, in.cone.offs[bb], d) / tau;
        sol.dual_psd[static_cast<std::size_t>(bb)] =
            in.c_scale * smat(hsd.z, in.cone.offs[bb], d) / tau;
    }
    for (int k = 0; k < problem.free_vars(); ++k) sol.free[k] = in.b_scale * hsd.u[k] / tau;
    for (int k = 0; k < m; ++k) sol.y[k] = in.c_scale * hsd.y[k] / (tau * in.row_scale[k]);

    sol.objective = sol.eval(problem.objective());
    double dobj = problem.objective().constant;
    int r = 0;
    for (const auto& [e, rhs] : problem.eq_constraints()) dobj += sol.y[r++] * rhs;
    for (const auto& [e, rhs] : problem.ineq_constraints()) dobj += sol.y[r++] * rhs;
    sol.dual_objective = dobj;
    sol.duality_gap = std::abs(sol.objective - sol.dual_objective);
    return sol;
}

Eigen::VectorXd jacobi_eigenvalues(Eigen::MatrixXd a) {
    const int n = static_cast<int>(a.rows());
    if (n == 1) return a.col(0);
    a = 0.5 * (a + a.transpose()).eval();
    const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off = std::max(off, std::abs(a(i, j)));
        if (off <= 1e-15 * scale) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) <= 1e-18 * scale) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = ((theta >= 0) ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double cs = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * cs;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = cs * akp - sn * akq;
                    a(k, q) = sn * akp + cs * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = cs * apk - sn * aqk;
                    a(q, k) = sn * apk + cs * aqk;
                }
            }
    }
    Eigen::VectorXd ev = a.diagonal();
    std::sort(ev.data(), ev.data() + n);
    return ev;
}

VerifyReport verify_solution(const SdpProblem& problem, const SdpSolution& solution) {
    VerifyReport rep;
    auto check = [&](const std::string& name, double value, double limit) {
        const bool ok = value <= limit;
        rep.checks.push_back({name, value, limit, ok});
        rep.pass = rep.pass && ok;
    };

    if (solution.status != Status::optimal) {
        rep.checks.push_back({"status " + std::string(to_string(solution.status)) +
                                  " (no optimality audit)",
                              0.0, 0.0, true});
        return rep;
    }

    int r = 0;
    for (const auto& [e, rhs] : problem.eq_constraints()) {
        check("eq[" + std::to_string(r++) + "] residual", std::abs(solution.eval(e) - rhs),
              1e-7 * (1.0 + std::abs(rhs)));
    }
    int q = 0;
    for (const auto& [e, rhs] : problem.ineq_constraints())
        check("ineq[" + std::to_string(q++) + "] violation", solution.eval(e) - rhs,
              1e-7 * (1.0 + std::abs(rhs)));

    for (std::size_t bb = 0; bb < solution.psd.size(); ++bb) {
        const auto& xb = solution.psd[bb];
        check("psd[" + std::to_string(bb) + "] min eigenvalue deficit",
              -jacobi_eigenvalues(xb).minCoeff(), 1e-8 * (1.0 + xb.norm()));
        const auto& zb = solution.dual_psd[bb];
        check("dual psd[" + std::to_string(bb) + "] min eigenvalue deficit",
              -jacobi_eigenvalues(zb).minCoeff(), 1e-8 * (1.0 + zb.norm()));
    }

    std::vector<const Expr*> rows;
    for (const auto& [e, rhs] : problem.eq_constraints()) rows.push_back(&e);
    for (const auto& [e, rhs] : problem.ineq_constraints()) rows.push_back(&e);
    for (std::size_t bb = 0; bb < solution.psd.size(); ++bb) {
        const int d = problem.psd_blocks()[bb];
        Eigen::MatrixXd resid = expr_block_matrix(problem.objective(), static_cast<int>(bb), d);
        for (std::size_t k = 0; k < rows.size(); ++k)
            resid -= solution.y[static_cast<Eigen::Index>(k)] *
                     expr_block_matrix(*rows[k], static_cast<int>(bb), d);
        resid -= solution.dual_psd[bb];
        check("dual residual block " + std::to_string(bb), resid.cwiseAbs().maxCoeff(),
              1e-6 * (1.0 + std::abs(solution.objective)));
    }
    for (int f = 0; f < problem.free_vars(); ++f) {
        double resid = expr_free_coef(problem.objective(), f);
        for (std::size_t k = 0; k < rows.size(); ++k)
            resid -= solution.y[static_cast<Eigen::Index>(k)] * expr_free_coef(*rows[k], f);
        check("dual residual free " + std::to_string(f), std::abs(resid),
              1e-6 * (1.0 + std::abs(solution.objective)));
    }
    const std::size_t n_eq = problem.eq_constraints().size();
    for (std::size_t k = 0; k < problem.ineq_constraints().size(); ++k)
        check("ineq multiplier sign " + std::to_string(k),
              solution.y[static_cast<Eigen::Index>(n_eq + k)],
              1e-7 * (1.0 + std::abs(solution.objective)));

    check("duality gap", solution.duality_gap, 1e-7 * (1.0 + std::abs(solution.objective)));
    return rep;
}

void dump(const SdpProblem& problem, std::ostream& os) {
    os << "sdp-problem\n";
    os << "psd_blocks " << problem.psd_blocks().size();
    for (int d : problem.psd_blocks()) os << " " << d;
    os << "\nfree_vars " << problem.free_vars() << "\n";
    auto put = [&os](const Expr& e) {
        os << e.terms.size() << " " << e.free_terms.size() << " " << e.constant << "\n";
        for (const auto& t : e.terms)
            os << "P " << t.block << " " << t.row << " " << t.col << " " << t.coef << "\n";
        for (const auto& [idx, coef] : e.free_terms) os << "F " << idx << " " << coef << "\n";
    };
    os << "objective ";
    put(problem.objective());
    os << "eq " << problem.eq_constraints().size() << "\n";
    for (const auto& [e, rhs] : problem.eq_constraints()) {
        os << "rhs " << rhs << " ";
        put(e);
    }
    os << "ineq " << problem.ineq_constraints().size() << "\n";
    for (const auto& [e, rhs] : problem.ineq_constraints()) {
        os << "rhs " << rhs << " ";
        put(e);
    }
}

}  // namespace vlpc::sdp
