#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "mmhe/linmodel.hpp"

namespace mmhe {

// One iterate of a time-varying ARE (Pi_t for the plant, Phi_t for the
// augmented system). Symmetric positive semidefinite by construction.
struct RiccatiIterate {
    Eigen::MatrixXd value;
    long step = 0;

    RiccatiIterate() = default;
    explicit RiccatiIterate(Eigen::MatrixXd v, long t = 0);
};

// Lambda-parameterized noise weight family:
//   Qe_inv = ((1 - lambda) / lambda) M + blockdiag(Q^{-1}, 0).
struct MetamorphicWeights {
    double lambda = 0.0;
    Eigen::MatrixXd M;       // (m+p) x (m+p)
    Eigen::MatrixXd Q;       // m x m
    Eigen::MatrixXd Qe_inv;  // (m+p) x (m+p)
    Eigen::MatrixXd Qe;
};

RiccatiIterate are_step(const RiccatiIterate& p, const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                        const Eigen::MatrixXd& g, const Eigen::MatrixXd& q, const Eigen::MatrixXd& r);

MetamorphicWeights qe_weights(double lambda, const Eigen::MatrixXd& m, const Eigen::MatrixXd& q);

// d(Qe^{-1})/dlambda = -M / lambda^2.
Eigen::MatrixXd derivative_qe_inv(double lambda, const Eigen::MatrixXd& m);

// dQe/dlambda = Qe M Qe / lambda^2, symmetric positive definite.
Eigen::MatrixXd derivative_qe(const MetamorphicWeights& weights);

RiccatiIterate are_step_augmented(const RiccatiIterate& p, const AugmentedPlant& aug,
                                  const MetamorphicWeights& weights, const Eigen::MatrixXd& r);

struct SteadyStateResult {
    RiccatiIterate value;
    long iterations = 0;
};

SteadyStateResult steady_state(const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& step_fn,
                               const Eigen::MatrixXd& p0, double tol = 1e-12, long max_iter = 100000);

// L_e = A_e P C_e' (R + C_e P C_e')^{-1}.
Eigen::MatrixXd metamorphic_kalman_gain(const RiccatiIterate& p, const AugmentedPlant& aug,
                                        const Eigen::MatrixXd& r);

struct PhiMonotonicityRow {
    double lambda_low;
    double lambda_high;
    long k;
    double min_eig_diff;
    bool pass;
};

struct PhiMonotonicityReport {
    std::vector<PhiMonotonicityRow> rows;
    bool pass = true;

    std::string to_csv() const;
};

// Checks that Phi_k(lambda) is monotone in lambda: for each adjacent pair of
// the grid and each k <= k_max, the minimum eigenvalue of the difference must
// clear -1e-9 (1 + ||Phi_k||_F). Phi0 is shared across the grid.
PhiMonotonicityReport phi_monotonicity_report(const LinearPlant& plant, const ObserverGain& obs,
                                              const Eigen::MatrixXd& m, const Eigen::MatrixXd& q,
                                              const Eigen::MatrixXd& r, const Eigen::MatrixXd& phi0,
                                              const std::vector<double>& lambdas, long k_max);

// Steady-state variant: Phi_inf(lambda) differences must be strictly positive
// definite (min eigenvalue >= 1e-12); valid when G and L are nonsingular.
PhiMonotonicityReport phi_steady_monotonicity_report(const LinearPlant& plant, const ObserverGain& obs,
                                                     const Eigen::MatrixXd& m, const Eigen::MatrixXd& q,
                                                     const Eigen::MatrixXd& r,
                                                     const std::vector<double>& lambdas,
                                                     double ss_tol = 1e-12, long ss_max_iter = 100000);

}  // namespace mmhe
