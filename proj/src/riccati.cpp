#include "mmhe/riccati.hpp"

#include <sstream>
#include <stdexcept>

#include "mmhe/matutil.hpp"

namespace mmhe {

RiccatiIterate::RiccatiIterate(Eigen::MatrixXd v, long t) : value(std::move(v)), step(t) {
    if (value.rows() != value.cols()) throw std::invalid_argument("RiccatiIterate: matrix must be square");
    if (!is_symmetric(value, 1e-10)) throw std::invalid_argument("RiccatiIterate: matrix not symmetric");
    value = symmetrize(value);
    const double lo = min_eigenvalue_sym(value);
    if (lo < -1e-10 * (1.0 + value.norm()))
        throw std::invalid_argument("RiccatiIterate: matrix not positive semidefinite (min eig " +
                                    std::to_string(lo) + ")");
}

namespace {

// (R + C P C')^{-1} with a condition report on failure.
Eigen::MatrixXd innovation_inverse(const Eigen::MatrixXd& r, const Eigen::MatrixXd& c,
                                   const Eigen::MatrixXd& p) {
    Eigen::MatrixXd s = symmetrize(r + c * p * c.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e14) {
        std::ostringstream msg;
        msg << "are_step: innovation covariance singular or ill-conditioned (min eig " << lo
            << ", condition " << (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) << ")";
        throw std::runtime_error(msg.str());
    }
    return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

RiccatiIterate are_step(const RiccatiIterate& p, const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                        const Eigen::MatrixXd& g, const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
    const Eigen::MatrixXd& pv = p.value;
    Eigen::MatrixXd sinv = innovation_inverse(r, c, pv);
    Eigen::MatrixXd apct = a * pv * c.transpose();
    Eigen::MatrixXd next = g * q * g.transpose() + a * pv * a.transpose() - apct * sinv * apct.transpose();
    return RiccatiIterate(symmetrize(next), p.step + 1);
}

MetamorphicWeights qe_weights(double lambda, const Eigen::MatrixXd& m, const Eigen::MatrixXd& q) {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("qe_weights: lambda must lie in (0, 1); the endpoints have dedicated handling");
    if (!is_symmetric(m) || min_eigenvalue_sym(m) <= 0.0)
        throw std::invalid_argument("qe_weights: M must be symmetric positive definite");
    if (!is_symmetric(q) || min_eigenvalue_sym(q) <= 0.0)
        throw std::invalid_argument("qe_weights: Q must be symmetric positive definite");
    const Eigen::Index mq = q.rows();
    const Eigen::Index mp = m.rows();
    if (mp <= mq) throw std::invalid_argument("qe_weights: M must be (m+p) x (m+p) with p >= 1");

    MetamorphicWeights w;
    w.lambda = lambda;
    w.M = m;
    w.Q = q;
    w.Qe_inv = ((1.0 - lambda) / lambda) * m;
    w.Qe_inv.topLeftCorner(mq, mq) += spd_inverse(q, "qe_weights: Q");
    w.Qe_inv = symmetrize(w.Qe_inv);
    w.Qe = spd_inverse(w.Qe_inv, "qe_weights: Qe_inv");
    w.Qe = symmetrize(w.Qe);
    const double resid = (w.Qe * w.Qe_inv - Eigen::MatrixXd::Identity(mp, mp)).norm();
    if (resid > 1e-10 * (1.0 + w.Qe_inv.norm()))
        throw std::runtime_error("qe_weights: inverse residual too large (" + std::to_string(resid) + ")");
    return w;
}

Eigen::MatrixXd derivative_qe_inv(double lambda, const Eigen::MatrixXd& m) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("derivative_qe_inv: lambda must lie in (0, 1)");
    return -m / (lambda * lambda);
}

Eigen::MatrixXd derivative_qe(const MetamorphicWeights& weights) {
    return symmetrize(weights.Qe * weights.M * weights.Qe / (weights.lambda * weights.lambda));
}

RiccatiIterate are_step_augmented(const RiccatiIterate& p, const AugmentedPlant& aug,
                                  const MetamorphicWeights& weights, const Eigen::MatrixXd& r) {
    return are_step(p, aug.A_e, aug.C_e, aug.G_e, weights.Qe, r);
}

SteadyStateResult steady_state(const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& step_fn,
                               const Eigen::MatrixXd& p0, double tol, long max_iter) {
    Eigen::MatrixXd p = symmetrize(p0);
    for (long k = 1; k <= max_iter; ++k) {
        Eigen::MatrixXd next = step_fn(p);
        const double delta = (next - p).norm();
        p = next;
        if (delta <= tol) return {RiccatiIterate(p, k), k};
    }
    throw std::runtime_error("steady_state: no fixed point within " + std::to_string(max_iter) + " iterations");
}

Eigen::MatrixXd metamorphic_kalman_gain(const RiccatiIterate& p, const AugmentedPlant& aug,
                                        const Eigen::MatrixXd& r) {
    Eigen::MatrixXd sinv = innovation_inverse(r, aug.C_e, p.value);
    return aug.A_e * p.value * aug.C_e.transpose() * sinv;
}

std::string PhiMonotonicityReport::to_csv() const {
    std::ostringstream out;
    out << "lambda_low,lambda_high,k,min_eig_diff,pass\n";
    out.precision(17);
    for (const auto& row : rows)
        out << row.lambda_low << ',' << row.lambda_high << ',' << row.k << ',' << row.min_eig_diff << ','
            << (row.pass ? 1 : 0) << '\n';
    return out.str();
}

PhiMonotonicityReport phi_monotonicity_report(const LinearPlant& plant, const ObserverGain& obs,
                                              const Eigen::MatrixXd& m, const Eigen::MatrixXd& q,
                                              const Eigen::MatrixXd& r, const Eigen::MatrixXd& phi0,
                                              const std::vector<double>& lambdas, long k_max) {
    if (lambdas.size() < 2) throw std::invalid_argument("phi_monotonicity_report: need at least two lambdas");
    AugmentedPlant aug = augment(plant, obs);

    // Phi trajectories per lambda, all from the shared Phi0.
    std::vector<std::vector<Eigen::MatrixXd>> traj(lambdas.size());
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        MetamorphicWeights w = qe_weights(lambdas[i], m, q);
        RiccatiIterate it(phi0, 0);
        traj[i].push_back(it.value);
        for (long k = 1; k <= k_max; ++k) {
            it = are_step_augmented(it, aug, w, r);
            traj[i].push_back(it.value);
        }
    }

    PhiMonotonicityReport report;
    for (std::size_t i = 0; i + 1 < lambdas.size(); ++i) {
        for (long k = 0; k <= k_max; ++k) {
            const Eigen::MatrixXd& hi = traj[i + 1][static_cast<std::size_t>(k)];
            const Eigen::MatrixXd& lo = traj[i][static_cast<std::size_t>(k)];
            const double min_eig = min_eigenvalue_sym(hi - lo);
            const bool pass = min_eig >= -1e-9 * (1.0 + hi.norm());
            report.rows.push_back({lambdas[i], lambdas[i + 1], k, min_eig, pass});
            report.pass = report.pass && pass;
        }
    }
    return report;
}

PhiMonotonicityReport phi_steady_monotonicity_report(const LinearPlant& plant, const ObserverGain& obs,
                                                     const Eigen::MatrixXd& m, const Eigen::MatrixXd& q,
                                                     const Eigen::MatrixXd& r,
                                                     const std::vector<double>& lambdas, double ss_tol,
                                                     long ss_max_iter) {
    if (lambdas.size() < 2)
        throw std::invalid_argument("phi_steady_monotonicity_report: need at least two lambdas");
    AugmentedPlant aug = augment(plant, obs);
    const Eigen::Index d = 2 * aug.n;

    std::vector<Eigen::MatrixXd> phis;
    phis.reserve(lambdas.size());
    for (double lambda : lambdas) {
        MetamorphicWeights w = qe_weights(lambda, m, q);
        auto step_fn = [&](const Eigen::MatrixXd& p) {
            return are_step_augmented(RiccatiIterate(p), aug, w, r).value;
        };
        SteadyStateResult ss = steady_state(step_fn, Eigen::MatrixXd::Identity(d, d), ss_tol, ss_max_iter);
        phis.push_back(ss.value.value);
    }

    PhiMonotonicityReport report;
    for (std::size_t i = 0; i + 1 < lambdas.size(); ++i) {
        const double min_eig = min_eigenvalue_sym(phis[i + 1] - phis[i]);
        const bool pass = min_eig >= 1e-12;
        report.rows.push_back({lambdas[i], lambdas[i + 1], -1, min_eig, pass});
        report.pass = report.pass && pass;
    }
    return report;
}

}  // namespace mmhe
