#include "mmhe/linmodel.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "mmhe/matutil.hpp"
#include "mmhe/rng.hpp"

namespace mmhe {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Rank of the Krylov stack [B0; B0 A; ...] or its dual, by singular values
// with threshold n * eps * sigma_max.
bool full_rank_stack(const Eigen::MatrixXd& stack, Eigen::Index n) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack);
    const Eigen::VectorXd sv = svd.singularValues();
    if (sv.size() == 0) return n == 0;
    const double thresh = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * sv[0];
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > thresh) ++rank;
    return rank == n;
}

}  // namespace

LinearPlant::LinearPlant(Eigen::MatrixXd a, Eigen::MatrixXd g, Eigen::MatrixXd c)
    : A(std::move(a)), G(std::move(g)), C(std::move(c)) {
    require(A.rows() >= 1 && A.rows() == A.cols(), "LinearPlant: A must be square, n >= 1");
    require(G.rows() == A.rows() && G.cols() >= 1, "LinearPlant: G must be n x m");
    require(C.cols() == A.rows() && C.rows() >= 1, "LinearPlant: C must be p x n");
}

LinearPlant::LinearPlant(Eigen::MatrixXd a, Eigen::MatrixXd g, Eigen::MatrixXd b, Eigen::MatrixXd c)
    : LinearPlant(std::move(a), std::move(g), std::move(c)) {
    B = std::move(b);
    if (B.size() > 0) require(B.rows() == A.rows(), "LinearPlant: B must be n x q");
}

NoiseWeights::NoiseWeights(Eigen::MatrixXd q, Eigen::MatrixXd r) : Q(std::move(q)), R(std::move(r)) {
    if (!is_symmetric(Q) || min_eigenvalue_sym(Q) <= 0.0)
        throw std::invalid_argument("NoiseWeights: Q must be symmetric positive definite");
    if (!is_symmetric(R) || min_eigenvalue_sym(R) <= 0.0)
        throw std::invalid_argument("NoiseWeights: R must be symmetric positive definite");
}

ObserverGain::ObserverGain(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c, Eigen::MatrixXd l)
    : L(std::move(l)) {
    require(a.rows() == a.cols(), "ObserverGain: A must be square");
    require(c.cols() == a.rows(), "ObserverGain: C must be p x n");
    require(L.rows() == a.rows() && L.cols() == c.rows(), "ObserverGain: L must be n x p");
    A_L = a - L * c;
    rho = spectral_radius(A_L);
    if (rho >= 1.0)
        throw std::invalid_argument("ObserverGain: A - L C is not Schur stable (spectral radius " +
                                    std::to_string(rho) + ")");
}

bool check_observable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c) {
    const Eigen::Index n = a.rows();
    require(a.cols() == n, "check_observable: A must be square");
    require(c.cols() == n, "check_observable: C column count must match A");
    const Eigen::Index p = c.rows();
    Eigen::MatrixXd stack(n * p, n);
    Eigen::MatrixXd block = c;
    for (Eigen::Index i = 0; i < n; ++i) {
        stack.middleRows(i * p, p) = block;
        if (i + 1 < n) block = block * a;
    }
    return full_rank_stack(stack, n);
}

bool check_controllable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& bc) {
    const Eigen::Index n = a.rows();
    require(a.cols() == n, "check_controllable: A must be square");
    require(bc.rows() == n, "check_controllable: input matrix row count must match A");
    const Eigen::Index r = bc.cols();
    Eigen::MatrixXd stack(n, n * r);
    Eigen::MatrixXd block = bc;
    for (Eigen::Index i = 0; i < n; ++i) {
        stack.middleCols(i * r, r) = block;
        if (i + 1 < n) block = a * block;
    }
    return full_rank_stack(stack, n);
}

SchurResult check_schur(const Eigen::MatrixXd& a) {
    const double rho = spectral_radius(a);
    return {rho, rho < 1.0};
}

std::vector<std::complex<double>> sorted_eigenvalues(const Eigen::MatrixXd& a) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
    if (es.info() != Eigen::Success) throw std::runtime_error("sorted_eigenvalues: eigensolver failed");
    std::vector<std::complex<double>> ev(es.eigenvalues().data(), es.eigenvalues().data() + a.rows());
    std::sort(ev.begin(), ev.end(), [](const auto& x, const auto& y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
    return ev;
}

ObserverGain place_poles(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                         const std::vector<std::complex<double>>& targets) {
    const Eigen::Index n = a.rows();
    const Eigen::Index p = c.rows();
    require(a.cols() == n, "place_poles: A must be square");
    require(c.cols() == n, "place_poles: C must be p x n");
    require(static_cast<Eigen::Index>(targets.size()) == n, "place_poles: need n target eigenvalues");
    if (!check_observable(a, c)) throw std::invalid_argument("place_poles: (A, C) is not observable");

    // Check conjugate symmetry and moduli; build the sorted target list.
    std::vector<std::complex<double>> want = targets;
    std::sort(want.begin(), want.end(), [](const auto& x, const auto& y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
    for (const auto& t : want) {
        if (std::abs(t) >= 1.0) throw std::invalid_argument("place_poles: target modulus must be < 1");
        if (std::abs(t.imag()) > 0) {
            const std::complex<double> conj_t(t.real(), -t.imag());
            if (std::none_of(want.begin(), want.end(), [&](const auto& u) {
                    return std::abs(u - conj_t) < 1e-12 * (1.0 + std::abs(t));
                }))
                throw std::invalid_argument("place_poles: targets not closed under conjugation");
        }
    }

    // Real block-diagonal matrix F with the requested spectrum.
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, n);
    {
        std::vector<std::complex<double>> pool = want;
        Eigen::Index pos = 0;
        while (!pool.empty()) {
            std::complex<double> t = pool.front();
            pool.erase(pool.begin());
            if (std::abs(t.imag()) < 1e-14) {
                f(pos, pos) = t.real();
                pos += 1;
            } else {
                auto it = std::min_element(pool.begin(), pool.end(), [&](const auto& x, const auto& y) {
                    return std::abs(x - std::conj(t)) < std::abs(y - std::conj(t));
                });
                pool.erase(it);
                f(pos, pos) = t.real();
                f(pos, pos + 1) = t.imag();
                f(pos + 1, pos) = -t.imag();
                f(pos + 1, pos + 1) = t.real();
                pos += 2;
            }
        }
    }

    // Sylvester approach on the dual pair (A', C'): pick a seed matrix Gm,
    // solve A' X - X F = C' Gm, then L = (Gm X^{-1})'. The Kronecker solve is
    // fine at the desk scales this toolkit targets.
    SplitMix64 rng(0x5eed5eedULL);
    const Eigen::MatrixXd at = a.transpose();
    const Eigen::MatrixXd ct = c.transpose();
    const Eigen::MatrixXd eye_n = Eigen::MatrixXd::Identity(n, n);
    for (int attempt = 0; attempt < 24; ++attempt) {
        Eigen::MatrixXd gm(p, n);
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = 0; j < n; ++j) gm(i, j) = rng.normal();
        // vec(A' X) - vec(X F) = (I kron A' - F' kron I) vec(X)
        Eigen::MatrixXd lhs = kron(eye_n, at) - kron(f.transpose(), eye_n);
        Eigen::MatrixXd rhs_mat = ct * gm;
        Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(rhs_mat.data(), n * n);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
        if (!lu.isInvertible()) continue;  // target spectrum intersects eig(A); perturb seed
        Eigen::VectorXd vx = lu.solve(rhs);
        Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(vx.data(), n, n);
        Eigen::FullPivLU<Eigen::MatrixXd> lux(x);
        if (!lux.isInvertible()) continue;
        Eigen::MatrixXd k = gm * lux.inverse();
        Eigen::MatrixXd l = k.transpose();

        Eigen::MatrixXd a_l = a - l * c;
        auto got = sorted_eigenvalues(a_l);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
        if (worst <= 1e-6) return ObserverGain(a, c, l);
    }

    throw std::runtime_error("place_poles: placement failed to reach requested spectrum within 1e-6");
}

AugmentedPlant augment(const LinearPlant& plant, const ObserverGain& obs) {
    const Eigen::Index n = plant.n();
    const Eigen::Index m = plant.m();
    const Eigen::Index p = plant.p();
    require(obs.L.rows() == n && obs.L.cols() == p, "augment: observer dimensions do not match plant");

    AugmentedPlant aug;
    aug.n = n;
    aug.m = m;
    aug.p = p;
    aug.A_e = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    aug.A_e.topLeftCorner(n, n) = plant.A;
    aug.A_e.topRightCorner(n, n) = obs.L * plant.C;
    aug.A_e.bottomRightCorner(n, n) = obs.A_L;

    aug.G_e = Eigen::MatrixXd::Zero(2 * n, m + p);
    aug.G_e.topRightCorner(n, p) = obs.L;
    aug.G_e.bottomLeftCorner(n, m) = plant.G;
    aug.G_e.bottomRightCorner(n, p) = -obs.L;

    aug.C_e = Eigen::MatrixXd::Zero(p, 2 * n);
    aug.C_e.leftCols(n) = plant.C;
    aug.C_e.rightCols(n) = plant.C;
    return aug;
}

bool check_augmented_observability(const AugmentedPlant& aug) {
    return check_observable(aug.A_e, aug.C_e);
}

}  // namespace mmhe
