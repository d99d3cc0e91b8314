#pragma once
// Dense semidefinite programming at desk scale: standard-form problem model,
// homogeneous self-dual primal-dual interior-point solver, and an independent
// solution verifier.

#include <Eigen/Core>

#include <iosfwd>
#include <string>
#include <vector>

namespace vlpc::sdp {

enum class Status { optimal, infeasible, unbounded, numerical_limit };

const char* to_string(Status st);

/// Sparse linear expression over PSD-block entries and free scalars.
/// A term (block, i, j, c) contributes c * X_ij (the symmetric pair counted
/// once); free terms contribute c * u_k.
struct Expr {
    struct Term {
        int block, row, col;
        double coef;
    };
    std::vector<Term> terms;
    std::vector<std::pair<int, double>> free_terms;
    double constant = 0.0;

    Expr& add(int block, int row, int col, double coef) {
        terms.push_back({block, row, col, coef});
        return *this;
    }
    Expr& add_free(int index, double coef) {
        free_terms.emplace_back(index, coef);
        return *this;
    }
};

/// min objective  s.t.  eq_i(x) = rhs_i, ineq_j(x) <= rhs_j,
/// every PSD block >= 0, free scalars unconstrained.
/// Scalar inequalities are slack-converted inside the solver.
class SdpProblem {
public:
    int add_psd_block(int dim);
    int add_free_var();
    void set_objective(Expr e) { objective_ = std::move(e); }
    void add_eq(Expr e, double rhs);
    void add_ineq(Expr e, double rhs);

    const std::vector<int>& psd_blocks() const { return block_dims_; }
    int free_vars() const { return n_free_; }
    const Expr& objective() const { return objective_; }
    const std::vector<std::pair<Expr, double>>& eq_constraints() const { return eqs_; }
    const std::vector<std::pair<Expr, double>>& ineq_constraints() const { return ineqs_; }

private:
    std::vector<int> block_dims_;
    int n_free_ = 0;
    Expr objective_;
    std::vector<std::pair<Expr, double>> eqs_;
    std::vector<std::pair<Expr, double>> ineqs_;
};

struct SdpSolution {
    Status status = Status::numerical_limit;
    std::vector<Eigen::MatrixXd> psd;       // primal PSD blocks
    Eigen::VectorXd free;                   // free scalars
    Eigen::VectorXd y;                      // multipliers, [eqs..., ineqs...]
    std::vector<Eigen::MatrixXd> dual_psd;  // dual slack blocks
    double objective = 0.0;                 // primal value (includes Expr constant)
    double dual_objective = 0.0;
    double duality_gap = 0.0;               // |primal - dual|
    int iterations = 0;

    /// Evaluates an Expr at the primal point.
    double eval(const Expr& e) const;
};

struct SolveOptions {
    double tol_gap = 1e-9;    // relative duality gap
    double tol_feas = 1e-9;   // relative primal/dual residuals
    int max_iter = 250;
    bool trace = false;       // per-iteration diagnostics on stderr
};

/// Path-following HSD interior-point solve. Deterministic; never throws on a
/// well-formed problem (numerical trouble surfaces as Status::numerical_limit).
SdpSolution solve(const SdpProblem& problem, const SolveOptions& options = {});

struct VerifyCheck {
    std::string name;
    double value;  // measured
    double limit;  // allowed
    bool pass;
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;
    bool pass = true;
};

/// Independent residual / eigenvalue / duality-gap audit of a solution against
/// the original problem. Uses its own Jacobi eigenvalue routine rather than
/// anything the solver touches, so solver bugs cannot self-certify.
VerifyReport verify_solution(const SdpProblem& problem, const SdpSolution& solution);

/// Symmetric eigenvalues by cyclic Jacobi rotations (the verifier's own path).
Eigen::VectorXd jacobi_eigenvalues(Eigen::MatrixXd a);

/// Plain-text dump (dimensions, then sparse triplets) for external cross-checks.
void dump(const SdpProblem& problem, std::ostream& os);

}  // namespace vlpc::sdp
