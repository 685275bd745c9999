#pragma once

#include <Eigen/Dense>

#include "mmhe/mhe_init.hpp"

namespace mmhe {

// Unbiased FIR baseline: batch least squares over the window, ignoring any
// prior and the noise statistics.
struct UfirEstimate {
    Eigen::VectorXd x_tail;  // estimate of x_{t-N}
    Eigen::VectorXd x_head;  // open-loop propagation to x_t
};

UfirEstimate ufir_estimate(const Eigen::VectorXd& y_stack, const Eigen::VectorXd& u_stack,
                           const OpenLoopMaps& maps, const LinearPlant& plant, Eigen::Index n_horizon);

}  // namespace mmhe
