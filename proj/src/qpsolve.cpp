#include "mmhe/qpsolve.hpp"

#include <json.hpp>
#include <stdexcept>
#include <vector>

#include "mmhe/matutil.hpp"

namespace mmhe {

namespace {

void validate_convex(const Eigen::MatrixXd& h) {
    if (!is_symmetric(h, 1e-10)) throw std::invalid_argument("QpProblem: H must be symmetric");
    const Eigen::Index d = h.rows();
    const double floor_eig = 1e-12 * h.trace() / static_cast<double>(d);
    if (min_eigenvalue_sym(h) < floor_eig)
        throw std::invalid_argument("QpProblem: H is not safely positive definite");
    if (!h.allFinite()) throw std::invalid_argument("QpProblem: H has non-finite entries");
}

}  // namespace

QpProblem::QpProblem(Eigen::MatrixXd h, Eigen::VectorXd gv) : H(std::move(h)), g(std::move(gv)) {
    if (H.rows() != g.size()) throw std::invalid_argument("QpProblem: H and g dimensions differ");
    validate_convex(H);
    A_in.resize(0, g.size());
    b_in.resize(0);
}

QpProblem::QpProblem(Eigen::MatrixXd h, Eigen::VectorXd gv, Eigen::MatrixXd a, Eigen::VectorXd b)
    : H(std::move(h)), g(std::move(gv)), A_in(std::move(a)), b_in(std::move(b)) {
    if (H.rows() != g.size()) throw std::invalid_argument("QpProblem: H and g dimensions differ");
    if (A_in.rows() != b_in.size() || (A_in.rows() > 0 && A_in.cols() != g.size()))
        throw std::invalid_argument("QpProblem: constraint dimensions inconsistent");
    if (!g.allFinite() || !A_in.allFinite() || !b_in.allFinite())
        throw std::invalid_argument("QpProblem: constraints must be finite");
    validate_convex(H);
}

const char* to_string(QpStatus status) {
    switch (status) {
        case QpStatus::optimal: return "optimal";
        case QpStatus::infeasible: return "infeasible";
        case QpStatus::iteration_limit: return "iteration-limit";
    }
    return "unknown";
}

namespace {

struct KktMetrics {
    double residual;
    double violation;
};

KktMetrics kkt_metrics(const QpProblem& qp, const Eigen::VectorXd& z, const Eigen::VectorXd& duals) {
    const double stat = (qp.H * z + qp.g + qp.A_in.transpose() * duals).cwiseAbs().maxCoeff();
    double viol = 0.0;
    double comp = 0.0;
    if (qp.n_constraints() > 0) {
        Eigen::VectorXd slack = qp.A_in * z - qp.b_in;
        viol = std::max(0.0, slack.maxCoeff());
        comp = std::abs(duals.dot(slack));
    }
    return {std::max({stat, viol, comp}), viol};
}

}  // namespace

QpSolution solve(const QpProblem& qp, double tol, long max_iter) {
    const Eigen::Index d = qp.dim();
    const Eigen::Index c = qp.n_constraints();
    if (max_iter <= 0) max_iter = 10 * (d + c) * (d + c);

    Eigen::LLT<Eigen::MatrixXd> hllt(symmetrize(qp.H));
    if (hllt.info() != Eigen::Success)
        throw std::invalid_argument("solve: H factorization failed; H must be positive definite");

    // Unconstrained optimum is the dual-feasible start.
    Eigen::VectorXd z = hllt.solve(-qp.g);
    std::vector<Eigen::Index> active;
    Eigen::VectorXd u_active(0);

    auto finish = [&](QpStatus status) {
        QpSolution sol;
        sol.z = z;
        sol.duals = Eigen::VectorXd::Zero(c);
        for (std::size_t i = 0; i < active.size(); ++i)
            sol.duals[active[i]] = std::max(0.0, u_active[static_cast<Eigen::Index>(i)]);
        sol.status = status;
        KktMetrics km = kkt_metrics(qp, z, sol.duals);
        sol.kkt_residual = km.residual;
        sol.max_violation = km.violation;
        sol.objective = 0.5 * z.dot(qp.H * z) + qp.g.dot(z);
        return sol;
    };

    if (c == 0) return finish(QpStatus::optimal);

    long iter = 0;
    while (true) {
        // Most violated inactive constraint.
        Eigen::VectorXd slack = qp.A_in * z - qp.b_in;
        Eigen::Index p = -1;
        double worst = tol;
        for (Eigen::Index i = 0; i < c; ++i) {
            const bool in_active = std::find(active.begin(), active.end(), i) != active.end();
            if (!in_active && slack[i] > worst) {
                worst = slack[i];
                p = i;
            }
        }
        if (p < 0) return finish(QpStatus::optimal);

        const Eigen::VectorXd a_p = qp.A_in.row(p).transpose();
        double u_p = 0.0;

        while (true) {
            if (++iter > max_iter) return finish(QpStatus::iteration_limit);

            const Eigen::Index na = static_cast<Eigen::Index>(active.size());
            Eigen::VectorXd d_z;      // primal direction per unit of the incoming dual
            Eigen::VectorXd udot(na); // active dual rates
            if (na == 0) {
                d_z = -hllt.solve(a_p);
            } else {
                Eigen::MatrixXd at(d, na);
                for (Eigen::Index i = 0; i < na; ++i) at.col(i) = qp.A_in.row(active[i]).transpose();
                Eigen::MatrixXd hi_at = hllt.solve(at);
                Eigen::VectorXd hi_ap = hllt.solve(a_p);
                Eigen::MatrixXd schur = at.transpose() * hi_at;
                udot = -schur.ldlt().solve(at.transpose() * hi_ap);
                d_z = -(hi_ap + hi_at * udot);
            }

            const double curvature = d_z.dot(qp.H * d_z);
            const double s_p = a_p.dot(z) - qp.b_in[p];
            const bool primal_blocked = curvature <= 1e-14 * (1.0 + a_p.squaredNorm());

            // Dual blocking step among active constraints with decreasing duals.
            double t2 = std::numeric_limits<double>::infinity();
            Eigen::Index blocker = -1;
            for (Eigen::Index i = 0; i < na; ++i) {
                if (udot[i] < -1e-14) {
                    const double cand = -u_active[i] / udot[i];
                    if (cand < t2) {
                        t2 = cand;
                        blocker = i;
                    }
                }
            }

            if (primal_blocked) {
                if (blocker < 0) {
                    // Constraint normal lies in the active span with no dual to
                    // trade off: the feasible set is empty. Emit a Farkas ray.
                    QpSolution sol = finish(QpStatus::infeasible);
                    Eigen::VectorXd ray = Eigen::VectorXd::Zero(c);
                    ray[p] = 1.0;
                    for (Eigen::Index i = 0; i < na; ++i)
                        ray[active[i]] = std::max(0.0, udot[i]);
                    sol.infeasibility_ray = ray;
                    sol.status = QpStatus::infeasible;
                    return sol;
                }
                // Pure dual step.
                u_active += t2 * udot;
                u_p += t2;
                active.erase(active.begin() + blocker);
                Eigen::VectorXd trimmed(na - 1);
                Eigen::Index w = 0;
                for (Eigen::Index i = 0; i < na; ++i)
                    if (i != blocker) trimmed[w++] = u_active[i];
                u_active = trimmed;
                continue;
            }

            const double t1 = s_p / curvature;
            const double t = std::min(t1, t2);
            z += t * d_z;
            if (na > 0) u_active += t * udot;
            u_p += t;

            if (t1 <= t2) {
                // Incoming constraint reaches its bound: activate it.
                active.push_back(p);
                Eigen::VectorXd grown(na + 1);
                grown.head(na) = u_active;
                grown[na] = u_p;
                u_active = grown;
                break;
            }
            // Otherwise drop the blocking constraint and keep driving p.
            active.erase(active.begin() + blocker);
            Eigen::VectorXd trimmed(na - 1);
            Eigen::Index w = 0;
            for (Eigen::Index i = 0; i < na; ++i)
                if (i != blocker) trimmed[w++] = u_active[i];
            u_active = trimmed;
        }
    }
}

std::string qp_to_json(const QpProblem& qp) {
    nlohmann::json j;
    auto mat = [](const Eigen::MatrixXd& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
            rows.push_back(row);
        }
        return rows;
    };
    j["H"] = mat(qp.H);
    j["g"] = std::vector<double>(qp.g.data(), qp.g.data() + qp.g.size());
    j["A_in"] = mat(qp.A_in);
    j["b_in"] = std::vector<double>(qp.b_in.data(), qp.b_in.data() + qp.b_in.size());
    return j.dump(2);
}

}  // namespace mmhe
