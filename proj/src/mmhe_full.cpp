#include "mmhe/mmhe_full.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mmhe/matutil.hpp"

namespace mmhe {

void MmheConfig::validate() const {
    const Eigen::Index n = plant.n();
    const Eigen::Index m = plant.m();
    const Eigen::Index p = plant.p();
    if (lambda < 0.0 || lambda >= 1.0)
        throw std::invalid_argument("MmheConfig: lambda must lie in [0, 1); lambda = 1 is not well posed");
    if (horizon < 1) throw std::invalid_argument("MmheConfig: horizon must be >= 1");
    if (M.rows() != m + p || M.cols() != m + p) throw std::invalid_argument("MmheConfig: M must be (m+p) x (m+p)");
    if (Q.rows() != m || Q.cols() != m) throw std::invalid_argument("MmheConfig: Q must be m x m");
    if (R.rows() != p || R.cols() != p) throw std::invalid_argument("MmheConfig: R must be p x p");
    if (state_box.dim() != 2 * n) throw std::invalid_argument("MmheConfig: state box must have dimension 2n");
    if (noise_box.dim() != m + p) throw std::invalid_argument("MmheConfig: noise box must have dimension m+p");
    if (output_noise_box.dim() != p) throw std::invalid_argument("MmheConfig: output noise box must have dimension p");
    if (!noise_box.contains(Eigen::VectorXd::Zero(m + p)))
        throw std::invalid_argument("MmheConfig: noise box must contain zero");
    if (prior0.size() != 2 * n) throw std::invalid_argument("MmheConfig: prior must have dimension 2n");
    if (Phi0.rows() != 2 * n || Phi0.cols() != 2 * n || !is_spd(Phi0))
        throw std::invalid_argument("MmheConfig: Phi0 must be 2n x 2n symmetric positive definite");
}

void HorizonWindow::push(const Eigen::VectorXd& y, long t) {
    if (!data_.empty() && t != t_tail_ + static_cast<long>(data_.size()))
        throw std::invalid_argument("HorizonWindow: non-contiguous time index");
    if (data_.empty()) t_tail_ = t;
    if (size() == capacity_) throw std::logic_error("HorizonWindow: window already full");
    data_.push_back(y);
}

void HorizonWindow::pop_front() {
    data_.pop_front();
    ++t_tail_;
}

std::string mmhe_log_header(Eigen::Index p, Eigen::Index n) {
    std::ostringstream out;
    out << "t";
    for (Eigen::Index i = 0; i < p; ++i) out << ",y" << i;
    for (Eigen::Index i = 0; i < n; ++i) out << ",xhat" << i;
    for (Eigen::Index i = 0; i < 2 * n; ++i) out << ",chi" << i;
    out << ",objective,status,active_constraints";
    return out.str();
}

std::string mmhe_log_row(const MmheLogRecord& rec) {
    std::ostringstream out;
    out.precision(17);
    out << rec.time;
    for (Eigen::Index i = 0; i < rec.y.size(); ++i) out << ',' << rec.y[i];
    for (Eigen::Index i = 0; i < rec.x_hat.size(); ++i) out << ',' << rec.x_hat[i];
    for (Eigen::Index i = 0; i < rec.chi_head.size(); ++i) out << ',' << rec.chi_head[i];
    out << ',' << rec.objective << ',' << to_string(rec.status) << ',' << rec.active_constraints;
    return out.str();
}

namespace {

// Append the rows  sel <= upper, -sel <= -lower  for every finite bound.
void append_box_rows(std::vector<Eigen::VectorXd>& rows, std::vector<double>& bounds,
                     const Eigen::MatrixXd& sel, const Box& box, const Eigen::VectorXd& offset) {
    for (Eigen::Index i = 0; i < box.dim(); ++i) {
        if (std::isfinite(box.upper[i])) {
            rows.push_back(sel.row(i).transpose());
            bounds.push_back(box.upper[i] - offset[i]);
        }
        if (std::isfinite(box.lower[i])) {
            rows.push_back(-sel.row(i).transpose());
            bounds.push_back(offset[i] - box.lower[i]);
        }
    }
}

struct Condensed {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    Eigen::MatrixXd A_in;
    Eigen::VectorXd b_in;
    double cost_constant;
    std::vector<Eigen::MatrixXd> prop;
};

// Condense the window cost and box constraints onto
// z = [chi_tail, omega_0, ..., omega_{k-1}].
Condensed condense(const HorizonWindow& window, const MmheState& state, const MmheConfig& config,
                   const MetamorphicWeights& weights) {
    const Eigen::Index ns = 2 * config.plant.n();
    const Eigen::Index nw = config.plant.m() + config.plant.p();
    const Eigen::Index p = config.plant.p();
    const Eigen::Index k = window.size();
    const Eigen::Index dim = ns + k * nw;

    const Eigen::MatrixXd r_inv = spd_inverse(config.R, "condense: R");
    const Eigen::MatrixXd phi_inv = spd_inverse(state.Phi.value, "condense: Phi");

    Condensed out;
    out.H = Eigen::MatrixXd::Zero(dim, dim);
    out.g = Eigen::VectorXd::Zero(dim);
    out.cost_constant = 0.0;

    // Arrival term (chi_tail - prior)' Phi^{-1} (chi_tail - prior).
    out.H.topLeftCorner(ns, ns) += 2.0 * phi_inv;
    out.g.head(ns) += -2.0 * phi_inv * state.prior;
    out.cost_constant += state.prior.dot(phi_inv * state.prior);

    // Propagation maps chi_{tail+i} = prop[i] z.
    out.prop.reserve(static_cast<std::size_t>(k) + 1);
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(ns, dim);
    t.leftCols(ns) = Eigen::MatrixXd::Identity(ns, ns);
    out.prop.push_back(t);
    for (Eigen::Index i = 0; i < k; ++i) {
        Eigen::MatrixXd next = config.aug.A_e * out.prop.back();
        next.middleCols(ns + i * nw, nw) += config.aug.G_e;
        out.prop.push_back(next);
    }

    // Noise weight omega' Qe^{-1} omega and residual (y - C_e chi)' R^{-1} (...).
    for (Eigen::Index i = 0; i < k; ++i) {
        out.H.block(ns + i * nw, ns + i * nw, nw, nw) += 2.0 * weights.Qe_inv;
        const Eigen::MatrixXd ct = config.aug.C_e * out.prop[static_cast<std::size_t>(i)];
        const Eigen::VectorXd& y = window.at(i);
        out.H += 2.0 * ct.transpose() * r_inv * ct;
        out.g += -2.0 * ct.transpose() * r_inv * y;
        out.cost_constant += y.dot(r_inv * y);
    }
    out.H = symmetrize(out.H);

    // Box constraints: states over 0..k, noises and output residuals over 0..k-1.
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> bounds;
    for (Eigen::Index i = 0; i <= k; ++i)
        append_box_rows(rows, bounds, out.prop[static_cast<std::size_t>(i)], config.state_box,
                        Eigen::VectorXd::Zero(ns));
    for (Eigen::Index i = 0; i < k; ++i) {
        Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(nw, dim);
        sel.middleCols(ns + i * nw, nw) = Eigen::MatrixXd::Identity(nw, nw);
        append_box_rows(rows, bounds, sel, config.noise_box, Eigen::VectorXd::Zero(nw));
    }
    for (Eigen::Index i = 0; i < k; ++i) {
        // v_i = y_i - C_e chi_i inside the output noise box.
        const Eigen::MatrixXd ct = config.aug.C_e * out.prop[static_cast<std::size_t>(i)];
        const Eigen::VectorXd& y = window.at(i);
        for (Eigen::Index j = 0; j < p; ++j) {
            if (std::isfinite(config.output_noise_box.lower[j])) {
                rows.push_back(ct.row(j).transpose());
                bounds.push_back(y[j] - config.output_noise_box.lower[j]);
            }
            if (std::isfinite(config.output_noise_box.upper[j])) {
                rows.push_back(-ct.row(j).transpose());
                bounds.push_back(config.output_noise_box.upper[j] - y[j]);
            }
        }
    }

    out.A_in.resize(static_cast<Eigen::Index>(rows.size()), dim);
    out.b_in.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.A_in.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        out.b_in[static_cast<Eigen::Index>(i)] = bounds[i];
    }
    return out;
}

}  // namespace

CondensedQp build_condensed_qp(const HorizonWindow& window, const MmheState& state, const MmheConfig& config) {
    if (!window.full()) throw std::invalid_argument("build_condensed_qp: window not full");
    if (!(config.lambda > 0.0 && config.lambda < 1.0))
        throw std::invalid_argument("build_condensed_qp: lambda must lie in (0, 1)");
    MetamorphicWeights weights = qe_weights(config.lambda, config.M, config.Q);
    Condensed c = condense(window, state, config, weights);
    CondensedQp out{QpProblem(std::move(c.H), std::move(c.g), std::move(c.A_in), std::move(c.b_in)),
                    2 * config.plant.n(), config.plant.m() + config.plant.p(), window.size(),
                    c.cost_constant, std::move(c.prop)};
    return out;
}

MmheEstimator::MmheEstimator(MmheConfig config)
    : config_(std::move(config)), window_(config_.horizon) {
    config_.validate();
    if (config_.lambda > 0.0) weights_ = qe_weights(config_.lambda, config_.M, config_.Q);
    state_.prior = config_.prior0;
    state_.Phi = RiccatiIterate(config_.Phi0, 0);
    state_.carried_cost = 0.0;
}

MmheStepResult MmheEstimator::step(const Eigen::VectorXd& y_new) {
    if (y_new.size() != config_.plant.p()) throw std::invalid_argument("MmheEstimator: measurement size mismatch");

    // Slide: absorb the measurement leaving the window into the prior so the
    // arrival cost keeps summarizing exactly the data before the window.
    Eigen::VectorXd prior_backup = state_.prior;
    RiccatiIterate phi_backup = state_.Phi;
    HorizonWindow window_backup = window_;
    bool slid = false;
    if (window_.full()) {
        const Eigen::VectorXd& y_tail = window_.at(0);
        if (config_.lambda > 0.0) {
            Eigen::MatrixXd gain = metamorphic_kalman_gain(state_.Phi, config_.aug, config_.R);
            state_.prior = config_.aug.A_e * state_.prior + gain * (y_tail - config_.aug.C_e * state_.prior);
            state_.Phi = are_step_augmented(state_.Phi, config_.aug, weights_, config_.R);
        } else {
            // Pre-estimator recursion: the injection [L; 0] reproduces the
            // observer in the first block and propagates the error block.
            Eigen::VectorXd innov = y_tail - config_.aug.C_e * state_.prior;
            state_.prior.head(config_.plant.n()) =
                config_.plant.A * state_.prior.head(config_.plant.n()) +
                config_.obs.L * config_.plant.C * state_.prior.tail(config_.plant.n()) + config_.obs.L * innov;
            state_.prior.tail(config_.plant.n()) = config_.obs.A_L * prior_backup.tail(config_.plant.n());
        }
        window_.pop_front();
        slid = true;
    }
    window_.push(y_new, t_);
    ++t_;

    try {
        MmheStepResult result = config_.lambda > 0.0 ? solve_window() : lambda_zero_window();
        result.time = t_;
        return result;
    } catch (...) {
        // Failed solves must not advance the estimator.
        if (slid) {
            state_.prior = prior_backup;
            state_.Phi = phi_backup;
        }
        window_ = window_backup;
        --t_;
        throw;
    }
}

MmheStepResult MmheEstimator::solve_window() {
    Condensed c = condense(window_, state_, config_, weights_);
    const double constant = c.cost_constant;
    QpProblem problem(std::move(c.H), std::move(c.g), std::move(c.A_in), std::move(c.b_in));
    QpSolution sol = solve(problem);
    if (sol.status == QpStatus::infeasible) {
        std::ostringstream msg;
        msg << "MmheEstimator: window QP infeasible (max violation " << sol.max_violation << ")";
        throw std::runtime_error(msg.str());
    }
    if (sol.status == QpStatus::iteration_limit)
        throw std::runtime_error("MmheEstimator: window QP hit the iteration limit (KKT residual " +
                                 std::to_string(sol.kkt_residual) + ")");

    MmheStepResult result;
    result.chi_head = c.prop.back() * sol.z;
    result.x_hat = result.chi_head.head(config_.plant.n()) + result.chi_head.tail(config_.plant.n());
    result.objective = sol.objective + constant;
    result.status = sol.status;
    result.active_constraints = static_cast<int>((sol.duals.array() > 1e-10).count());
    state_.carried_cost = config_.lambda * result.objective + state_.carried_cost;
    return result;
}

MmheStepResult MmheEstimator::lambda_zero_window() {
    // Deterministic pre-estimator propagation through the window data. The
    // window noise estimates are zero (the cost has no data term), so the QP
    // objective is exactly zero and the estimate follows the observer.
    const Eigen::Index n = config_.plant.n();
    Eigen::VectorXd chi = state_.prior;
    int violations = 0;
    if (!config_.state_box.contains(chi, 1e-12)) ++violations;
    for (Eigen::Index i = 0; i < window_.size(); ++i) {
        const Eigen::VectorXd innov = window_.at(i) - config_.aug.C_e * chi;
        Eigen::VectorXd next(2 * n);
        next.head(n) = config_.plant.A * chi.head(n) + config_.obs.L * config_.plant.C * chi.tail(n) +
                       config_.obs.L * innov;
        next.tail(n) = config_.obs.A_L * chi.tail(n);
        chi = next;
        if (!config_.state_box.contains(chi, 1e-12)) ++violations;
    }

    MmheStepResult result;
    result.chi_head = chi;
    result.x_hat = chi.head(n) + chi.tail(n);
    result.objective = 0.0;
    result.status = QpStatus::optimal;
    result.active_constraints = violations;
    return result;
}

}  // namespace mmhe
