#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

namespace mmhe {

// Dense strictly convex quadratic program
//   min 0.5 z' H z + g' z   s.t.  A_in z <= b_in.
// Equality constraints are eliminated upstream by condensing; the estimators
// substitute their dynamics into the cost before reaching this solver.
struct QpProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    Eigen::MatrixXd A_in;  // c x d (c may be zero)
    Eigen::VectorXd b_in;
    std::optional<Eigen::VectorXd> warm_start;  // advisory; the dual method does not need it

    QpProblem() = default;
    QpProblem(Eigen::MatrixXd h, Eigen::VectorXd gv);
    QpProblem(Eigen::MatrixXd h, Eigen::VectorXd gv, Eigen::MatrixXd a, Eigen::VectorXd b);

    Eigen::Index dim() const { return g.size(); }
    Eigen::Index n_constraints() const { return b_in.size(); }
};

enum class QpStatus { optimal, infeasible, iteration_limit };

const char* to_string(QpStatus status);

struct QpSolution {
    Eigen::VectorXd z;
    Eigen::VectorXd duals;  // one multiplier per constraint row, >= 0
    QpStatus status = QpStatus::optimal;
    double kkt_residual = 0.0;
    double objective = 0.0;
    double max_violation = 0.0;
    // Farkas certificate when status == infeasible: ray >= 0 with
    // A_in' ray = 0 and b_in' ray < 0.
    std::optional<Eigen::VectorXd> infeasibility_ray;
};

// Dual active-set solve (Goldfarb-Idnani). Deterministic for identical
// inputs; reentrant and stateless between calls.
QpSolution solve(const QpProblem& qp, double tol = 1e-8, long max_iter = 0);

std::string qp_to_json(const QpProblem& qp);

}  // namespace mmhe
