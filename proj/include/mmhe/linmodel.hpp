#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace mmhe {

// Discrete LTI model x+ = A x + G w (+ B u), y = C x + v. When noise enters
// the state directly, G is the identity. B is optional (empty when absent).
struct LinearPlant {
    Eigen::MatrixXd A;
    Eigen::MatrixXd G;
    Eigen::MatrixXd B;  // n x q, empty when there is no control channel
    Eigen::MatrixXd C;

    LinearPlant() = default;
    LinearPlant(Eigen::MatrixXd a, Eigen::MatrixXd g, Eigen::MatrixXd c);
    LinearPlant(Eigen::MatrixXd a, Eigen::MatrixXd g, Eigen::MatrixXd b, Eigen::MatrixXd c);

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index m() const { return G.cols(); }
    Eigen::Index p() const { return C.rows(); }
    Eigen::Index q() const { return B.cols(); }
    bool has_control() const { return B.size() > 0; }
};

// Process / measurement weights, both symmetric positive definite.
struct NoiseWeights {
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;

    NoiseWeights() = default;
    NoiseWeights(Eigen::MatrixXd q, Eigen::MatrixXd r);
};

// Pre-estimator gain with the cached closed loop A_L = A - L C. Construction
// fails unless A_L is Schur stable.
struct ObserverGain {
    Eigen::MatrixXd L;
    Eigen::MatrixXd A_L;
    double rho;

    ObserverGain() = default;
    ObserverGain(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c, Eigen::MatrixXd l);
};

// Observer-augmented model with state [x_tilde, e] of dimension 2n.
struct AugmentedPlant {
    Eigen::MatrixXd A_e;  // 2n x 2n
    Eigen::MatrixXd G_e;  // 2n x (m+p)
    Eigen::MatrixXd C_e;  // p x 2n
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    Eigen::Index p = 0;
};

struct SchurResult {
    double rho;
    bool is_schur;
};

bool check_observable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c);
bool check_controllable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& bc);
SchurResult check_schur(const Eigen::MatrixXd& a);

// Output-injection pole placement: finds L with eig(A - L C) equal to the
// requested conjugate-symmetric target set (all moduli < 1), via a Sylvester
// equation on the dual pair so multi-output C is supported.
ObserverGain place_poles(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                         const std::vector<std::complex<double>>& targets);

AugmentedPlant augment(const LinearPlant& plant, const ObserverGain& obs);

bool check_augmented_observability(const AugmentedPlant& aug);

// Eigenvalues sorted by (real, imag) for deterministic multiset comparisons.
std::vector<std::complex<double>> sorted_eigenvalues(const Eigen::MatrixXd& a);

}  // namespace mmhe
