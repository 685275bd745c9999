#include "mmhe/fir_baseline.hpp"

#include <stdexcept>

namespace mmhe {

UfirEstimate ufir_estimate(const Eigen::VectorXd& y_stack, const Eigen::VectorXd& u_stack,
                           const OpenLoopMaps& maps, const LinearPlant& plant, Eigen::Index n_horizon) {
    const Eigen::Index n = plant.n();
    if (n_horizon < n) throw std::invalid_argument("ufir_estimate: horizon must be at least n");
    if (y_stack.size() != maps.Lambda.rows()) throw std::invalid_argument("ufir_estimate: y-stack size mismatch");
    if (u_stack.size() != maps.Gamma.cols()) throw std::invalid_argument("ufir_estimate: u-stack size mismatch");

    Eigen::VectorXd rhs = y_stack;
    if (maps.Gamma.cols() > 0) rhs -= maps.Gamma * u_stack;

    // Gram-inverse least squares (Lambda' Lambda)^{-1} Lambda' rhs, computed
    // through a rank-revealing QR of Lambda.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(maps.Lambda);
    if (qr.rank() < n)
        throw std::runtime_error("ufir_estimate: observability Gram matrix is singular (rank " +
                                 std::to_string(qr.rank()) + " < " + std::to_string(n) + ")");
    UfirEstimate out;
    out.x_tail = qr.solve(rhs);

    const Eigen::Index q = plant.has_control() ? plant.q() : 0;
    Eigen::VectorXd x = out.x_tail;
    for (Eigen::Index k = 0; k < n_horizon; ++k) {
        x = plant.A * x;
        if (q > 0) x += plant.B * u_stack.segment(k * q, q);
    }
    out.x_head = x;
    return out;
}

}  // namespace mmhe
