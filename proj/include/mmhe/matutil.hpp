#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

// Small dense linear-algebra helpers shared across the toolkit.

namespace mmhe {

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
    return 0.5 * (m + m.transpose());
}

inline bool is_symmetric(const Eigen::MatrixXd& m, double rtol = 1e-10) {
    if (m.rows() != m.cols()) return false;
    const double scale = 1.0 + m.norm();
    return (m - m.transpose()).norm() <= rtol * scale;
}

inline double min_eigenvalue_sym(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue_sym(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

inline bool is_spd(const Eigen::MatrixXd& m, double tol = 0.0) {
    return is_symmetric(m) && min_eigenvalue_sym(m) > tol;
}

// Largest eigenvalue magnitude of a (possibly nonsymmetric) square matrix.
inline double spectral_radius(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius: matrix must be square");
    if (m.rows() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    if (es.info() != Eigen::Success) throw std::runtime_error("spectral_radius: eigenvalue computation failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Solve M x = rhs for symmetric positive definite M. Reports the condition
// estimate instead of silently regularizing a near-singular system.
inline Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& m, const Eigen::MatrixXd& rhs,
                                 const char* what = "solve_spd") {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e14) {
        throw std::runtime_error(std::string(what) + ": matrix not safely positive definite (min eig " +
                                 std::to_string(lo) + ", condition " +
                                 std::to_string(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) + ")");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(symmetrize(m));
    return llt.solve(rhs);
}

inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what = "spd_inverse") {
    return solve_spd(m, Eigen::MatrixXd::Identity(m.rows(), m.cols()), what);
}

// Symmetric square root of a positive semidefinite matrix.
inline Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& m, double tol = 1e-12) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < -tol * (1.0 + ev.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("spd_sqrt: matrix has a negative eigenvalue");
        ev[i] = std::sqrt(std::max(ev[i], 0.0));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline Eigen::MatrixXd spd_inv_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] <= 0.0) throw std::invalid_argument("spd_inv_sqrt: matrix not positive definite");
        ev[i] = 1.0 / std::sqrt(ev[i]);
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Unique solution P of A' P A - P + Q = 0 for Schur-stable A.
inline Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
    const Eigen::Index n = a.rows();
    if (a.cols() != n || q.rows() != n || q.cols() != n)
        throw std::invalid_argument("solve_discrete_lyapunov: dimension mismatch");
    if (spectral_radius(a) >= 1.0)
        throw std::runtime_error("solve_discrete_lyapunov: A is not Schur stable");
    // vec(A' P A) = (A' kron A') vec(P)
    Eigen::MatrixXd at = a.transpose();
    Eigen::MatrixXd lhs = kron(at, at) - Eigen::MatrixXd::Identity(n * n, n * n);
    Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(q.data(), n * n);
    Eigen::VectorXd vp = lhs.partialPivLu().solve(rhs);
    Eigen::MatrixXd p = Eigen::Map<const Eigen::MatrixXd>(vp.data(), n, n);
    return symmetrize(p);
}

}  // namespace mmhe
