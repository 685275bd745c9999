#include "mmhe/mhe_init.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mmhe/matutil.hpp"
#include "mmhe/qpsolve.hpp"

namespace mmhe {

namespace {

// Shared stacker: Lambda rows C A^i, and the causal block-Toeplitz map with
// blocks C A^{i-j-1} B_in for i > j.
Eigen::MatrixXd stack_powers(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c, Eigen::Index n_horizon) {
    const Eigen::Index n = a.rows();
    const Eigen::Index p = c.rows();
    Eigen::MatrixXd lambda((n_horizon + 1) * p, n);
    Eigen::MatrixXd block = c;
    for (Eigen::Index i = 0; i <= n_horizon; ++i) {
        lambda.middleRows(i * p, p) = block;
        if (i < n_horizon) block = block * a;
    }
    return lambda;
}

Eigen::MatrixXd stack_causal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                             const Eigen::MatrixXd& b_in, Eigen::Index n_horizon) {
    const Eigen::Index p = c.rows();
    const Eigen::Index w = b_in.cols();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero((n_horizon + 1) * p, n_horizon * w);
    if (w == 0) return out;
    // diagonal d = i - j - 1 holds C A^d B_in
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    for (Eigen::Index d = 0; d < n_horizon; ++d) {
        Eigen::MatrixXd blockv = c * power * b_in;
        for (Eigen::Index j = 0; j + d + 1 <= n_horizon; ++j) {
            const Eigen::Index i = j + d + 1;
            out.block(i * p, j * w, p, w) = blockv;
        }
        power = a * power;
    }
    return out;
}

}  // namespace

OpenLoopMaps build_open_loop_maps(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                  const Eigen::MatrixXd& c, Eigen::Index n_horizon) {
    if (n_horizon < 1) throw std::invalid_argument("build_open_loop_maps: horizon must be >= 1");
    if (a.rows() != a.cols() || c.cols() != a.rows())
        throw std::invalid_argument("build_open_loop_maps: dimension mismatch");
    if (b.size() > 0 && b.rows() != a.rows())
        throw std::invalid_argument("build_open_loop_maps: B row count must match A");
    OpenLoopMaps maps;
    maps.Lambda = stack_powers(a, c, n_horizon);
    maps.Gamma = stack_causal(a, c, b.size() > 0 ? b : Eigen::MatrixXd(a.rows(), 0), n_horizon);
    maps.Phi_w = stack_causal(a, c, Eigen::MatrixXd::Identity(a.rows(), a.cols()), n_horizon);
    return maps;
}

ObserverMaps build_observer_maps(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                 const Eigen::MatrixXd& c, const Eigen::MatrixXd& l,
                                 Eigen::Index n_horizon) {
    if (l.rows() != a.rows() || l.cols() != c.rows())
        throw std::invalid_argument("build_observer_maps: L must be n x p");
    const Eigen::MatrixXd a_l = a - l * c;
    ObserverMaps maps;
    maps.Lambda_bar = stack_powers(a_l, c, n_horizon);
    maps.Gamma_bar = stack_causal(a_l, c, b.size() > 0 ? b : Eigen::MatrixXd(a.rows(), 0), n_horizon);
    maps.L_N = stack_causal(a_l, c, l, n_horizon);
    maps.Phi_bar = maps.L_N;
    maps.Psi = Eigen::MatrixXd::Identity(maps.L_N.rows(), maps.L_N.cols()) - maps.L_N;
    maps.Phi_w_obs = stack_causal(a_l, c, Eigen::MatrixXd::Identity(a.rows(), a.cols()), n_horizon);
    return maps;
}

BatchMaps build_batch_maps(const LinearPlant& plant, const Eigen::MatrixXd& l, Eigen::Index n_horizon) {
    BatchMaps maps;
    const Eigen::MatrixXd b = plant.has_control() ? plant.B : Eigen::MatrixXd(plant.n(), 0);
    maps.open = build_open_loop_maps(plant.A, b, plant.C, n_horizon);
    maps.obs = build_observer_maps(plant.A, b, plant.C, l, n_horizon);
    maps.N = n_horizon;
    maps.n = plant.n();
    maps.p = plant.p();
    maps.q = b.cols();
    return maps;
}

WeightRatio weight_ratio(double lambda, double mu, double mu_bar) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("weight_ratio: lambda must lie in (0, 1)");
    const double lambda_bar = lambda * mu + (1.0 - lambda) * mu_bar;
    if (lambda_bar <= 0.0) throw std::invalid_argument("weight_ratio: lambda_bar is zero; ratio undefined");
    WeightRatio out;
    out.lambda_bar = lambda_bar;
    out.ratio = lambda_bar / lambda;
    out.d_ratio_dlambda = -mu_bar / (lambda * lambda);
    const bool labeled = mu > 0.0 && mu_bar > 0.0 && mu != mu_bar;
    if (!labeled) {
        out.case_label = 0;
    } else {
        const double lhs = (1.0 - lambda) * mu_bar;
        const double rhs = lambda * (1.0 - mu);
        if (lhs == rhs)
            out.case_label = 1;
        else
            out.case_label = lhs > rhs ? 2 : 3;
    }
    return out;
}

void InitMheConfig::validate() const {
    if (horizon < plant.n())
        throw std::invalid_argument("InitMheConfig: horizon must be at least the state dimension");
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("InitMheConfig: lambda must lie in [0, 1]");
    if (mu < 0.0 || mu_bar < 0.0) throw std::invalid_argument("InitMheConfig: mu and mu_bar must be nonnegative");
    if (L.rows() != plant.n() || L.cols() != plant.p())
        throw std::invalid_argument("InitMheConfig: L must be n x p");
}

double InitMheConfig::prior_ratio() const {
    if (lambda == 0.0) throw std::logic_error("InitMheConfig: prior_ratio undefined at lambda = 0");
    if (lambda == 1.0) return mu;  // the prior term keeps weight mu when the (1-lambda) part vanishes
    return lambda_bar() / lambda;
}

double InitMheConfig::lambda_tilde() const {
    const double lb = lambda == 1.0 ? mu : lambda_bar();
    if (lb <= 0.0) throw std::logic_error("InitMheConfig: lambda_tilde undefined (lambda_bar = 0)");
    return (lambda == 1.0 ? 1.0 : lambda) / lb;
}

Eigen::VectorXd solve_initial_state(const Eigen::VectorXd& y_stack, const Eigen::VectorXd& u_stack,
                                    const Eigen::VectorXd& prior, const BatchMaps& maps,
                                    const InitMheConfig& config) {
    if (config.lambda == 0.0) return prior;
    const Eigen::Index rows = (maps.N + 1) * maps.p;
    if (y_stack.size() != rows) throw std::invalid_argument("solve_initial_state: y-stack size mismatch");
    if (u_stack.size() != maps.N * maps.q) throw std::invalid_argument("solve_initial_state: u-stack size mismatch");
    if (prior.size() != maps.n) throw std::invalid_argument("solve_initial_state: prior size mismatch");

    const double ratio = config.prior_ratio();
    const Eigen::MatrixXd& lb = maps.obs.Lambda_bar;
    Eigen::VectorXd data = maps.obs.Psi * y_stack;
    if (maps.q > 0) data -= maps.obs.Gamma_bar * u_stack;
    Eigen::MatrixXd s_bar = ratio * Eigen::MatrixXd::Identity(maps.n, maps.n) + lb.transpose() * lb;
    Eigen::VectorXd rhs = ratio * prior + lb.transpose() * data;
    return solve_spd(s_bar, rhs, "solve_initial_state: S_bar");
}

Eigen::VectorXd solve_initial_state_constrained(const Eigen::VectorXd& y_stack,
                                                const Eigen::VectorXd& u_stack,
                                                const Eigen::VectorXd& prior, const BatchMaps& maps,
                                                const InitMheConfig& config, const Box& state_box) {
    if (state_box.dim() != maps.n)
        throw std::invalid_argument("solve_initial_state_constrained: box dimension mismatch");
    if (config.lambda == 0.0) {
        if (!state_box.contains(prior))
            throw std::runtime_error("solve_initial_state_constrained: prior violates the state box at lambda = 0");
        return prior;
    }
    const double ratio = config.prior_ratio();
    const Eigen::MatrixXd& lb = maps.obs.Lambda_bar;
    Eigen::VectorXd data = maps.obs.Psi * y_stack;
    if (maps.q > 0) data -= maps.obs.Gamma_bar * u_stack;

    Eigen::MatrixXd h = 2.0 * (ratio * Eigen::MatrixXd::Identity(maps.n, maps.n) + lb.transpose() * lb);
    Eigen::VectorXd g = -2.0 * (ratio * prior + lb.transpose() * data);
    Eigen::MatrixXd a(2 * maps.n, maps.n);
    a.topRows(maps.n) = Eigen::MatrixXd::Identity(maps.n, maps.n);
    a.bottomRows(maps.n) = -Eigen::MatrixXd::Identity(maps.n, maps.n);
    Eigen::VectorXd b(2 * maps.n);
    b.head(maps.n) = state_box.upper;
    b.tail(maps.n) = -state_box.lower;

    QpSolution sol = solve(QpProblem(std::move(h), std::move(g), std::move(a), std::move(b)));
    if (sol.status != QpStatus::optimal)
        throw std::runtime_error(std::string("solve_initial_state_constrained: QP ") + to_string(sol.status));
    return sol.z;
}

Eigen::VectorXd prior_update(const Eigen::VectorXd& x_opt, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& y, const LinearPlant& plant,
                             const Eigen::MatrixXd& l) {
    Eigen::VectorXd next = plant.A * x_opt + l * (y - plant.C * x_opt);
    if (plant.has_control() && u.size() > 0) next += plant.B * u;
    return next;
}

ErrorDynamics error_dynamics(const BatchMaps& maps, const InitMheConfig& config, const Eigen::MatrixXd& l) {
    if (!(config.lambda > 0.0 && config.lambda <= 1.0))
        throw std::invalid_argument("error_dynamics: lambda must lie in (0, 1]");
    const double ratio = config.prior_ratio();
    const Eigen::MatrixXd& lb = maps.obs.Lambda_bar;

    ErrorDynamics dyn;
    dyn.S_bar = ratio * Eigen::MatrixXd::Identity(maps.n, maps.n) + lb.transpose() * lb;
    const Eigen::MatrixXd a_l_mat = config.plant.A - l * config.plant.C;
    dyn.A_L_bar = ratio * solve_spd(dyn.S_bar, a_l_mat, "error_dynamics: S_bar");
    dyn.S1.resize(maps.n, (maps.N + 1) * maps.n);
    dyn.S1.leftCols(maps.n) = ratio * Eigen::MatrixXd::Identity(maps.n, maps.n);
    dyn.S1.rightCols(maps.N * maps.n) = -lb.transpose() * maps.obs.Phi_w_obs;
    dyn.S2.resize(maps.n, (maps.N + 2) * maps.p);
    dyn.S2.leftCols(maps.p) = -ratio * l;
    dyn.S2.rightCols((maps.N + 1) * maps.p) = -lb.transpose() * maps.obs.Psi;
    return dyn;
}

std::string DecayReport::to_csv() const {
    std::ostringstream out;
    out << "lambda_low,lambda_high,min_eig_diff,pass\n";
    out.precision(17);
    for (const auto& row : rows)
        out << row.lambda_low << ',' << row.lambda_high << ',' << row.min_eig_diff << ',' << (row.pass ? 1 : 0)
            << '\n';
    return out.str();
}

DecayReport decay_monotonicity_report(const LinearPlant& plant, const Eigen::MatrixXd& l,
                                      Eigen::Index n_horizon, double mu, double mu_bar,
                                      const std::vector<double>& lambdas, const Eigen::MatrixXd& q_l_in) {
    if (lambdas.size() < 2) throw std::invalid_argument("decay_monotonicity_report: need at least two lambdas");
    const Eigen::Index n = plant.n();
    Eigen::MatrixXd q_l = q_l_in.size() > 0 ? q_l_in : Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd a_l = plant.A - l * plant.C;
    Eigen::MatrixXd p_l = solve_discrete_lyapunov(a_l, q_l);

    BatchMaps maps = build_batch_maps(plant, l, n_horizon);
    const Eigen::MatrixXd gram = maps.obs.Lambda_bar.transpose() * maps.obs.Lambda_bar;

    auto qbar = [&](double lambda) {
        InitMheConfig cfg{plant, l, n_horizon, lambda, mu, mu_bar};
        const double lt = cfg.lambda_tilde();
        Eigen::MatrixXd t1 = lt * (p_l * gram + gram * p_l);
        Eigen::MatrixXd t2 = lt * lt * gram * p_l * gram;
        return symmetrize(t1 + t2 + q_l);
    };

    DecayReport report;
    report.lambdas = lambdas;
    std::vector<Eigen::MatrixXd> qbars;
    for (double lambda : lambdas) {
        Eigen::MatrixXd qb = qbar(lambda);
        qbars.push_back(qb);
        report.min_eig_qbar.push_back(min_eigenvalue_sym(qb));
    }
    for (std::size_t i = 0; i + 1 < lambdas.size(); ++i) {
        const double min_eig = min_eigenvalue_sym(qbars[i + 1] - qbars[i]);
        const bool pass = min_eig > 0.0;
        report.rows.push_back({lambdas[i], lambdas[i + 1], min_eig, pass});
        report.pass = report.pass && pass;
    }

    // Central-difference check of the lambda_tilde derivatives.
    const double delta = 1e-6;
    for (double lambda : lambdas) {
        if (lambda - delta <= 0.0 || lambda + delta >= 1.0) continue;
        auto lt = [&](double lam) {
            InitMheConfig cfg{plant, l, n_horizon, lam, mu, mu_bar};
            return cfg.lambda_tilde();
        };
        const double lb = lambda * mu + (1.0 - lambda) * mu_bar;
        const double want1 = mu_bar / (lb * lb);
        const double want2 = 2.0 * lambda * mu_bar / (lb * lb * lb);
        const double got1 = (lt(lambda + delta) - lt(lambda - delta)) / (2.0 * delta);
        const double lt_hi = lt(lambda + delta);
        const double lt_lo = lt(lambda - delta);
        const double got2 = (lt_hi * lt_hi - lt_lo * lt_lo) / (2.0 * delta);
        report.max_fd_error_ltilde = std::max(report.max_fd_error_ltilde,
                                              std::abs(got1 - want1) / (1.0 + std::abs(want1)));
        report.max_fd_error_ltilde_sq = std::max(report.max_fd_error_ltilde_sq,
                                                 std::abs(got2 - want2) / (1.0 + std::abs(want2)));
    }
    report.pass = report.pass && report.max_fd_error_ltilde <= 1e-6 && report.max_fd_error_ltilde_sq <= 1e-6;
    return report;
}

BoundSequence bound_sequence(const BatchMaps& maps, const InitMheConfig& config, double z_w, double z_v,
                             double x0_norm, double xbar0_norm, int steps) {
    if (!(config.lambda > 0.0 && config.lambda < 1.0))
        throw std::invalid_argument("bound_sequence: lambda must lie in (0, 1)");
    if (steps < 0) throw std::invalid_argument("bound_sequence: steps must be nonnegative");

    const double ratio = config.prior_ratio();
    const Eigen::MatrixXd& lb = maps.obs.Lambda_bar;
    const Eigen::MatrixXd gram = lb.transpose() * lb;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(maps.n, maps.n);
    const Eigen::MatrixXd s_bar = ratio * eye + gram;
    const Eigen::MatrixXd s_inv = spd_inverse(s_bar, "bound_sequence: S_bar");
    const Eigen::MatrixXd a_l = config.plant.A - config.L * config.plant.C;

    BoundSequence out;
    BoundParams& prm = out.params;
    prm.n = maps.n;
    prm.z_w = z_w;
    prm.z_v = z_v;
    prm.a_l = a_l.norm();
    prm.l = config.L.norm();
    prm.theta1 = (lb.transpose() * maps.obs.Phi_w_obs).norm();
    prm.theta2 = (lb.transpose() * maps.obs.Psi).norm();
    prm.z_bar = z_w + prm.l * z_v;
    prm.theta_bar = prm.theta1 * std::sqrt(static_cast<double>(maps.N)) * z_w +
                    prm.theta2 * std::sqrt(static_cast<double>(maps.N + 1)) * z_v;
    prm.eta = min_eigenvalue_sym(gram);

    const double ratio_sinv_norm = (ratio * s_inv).norm();
    const double sinv_norm = s_inv.norm();
    prm.a = prm.a_l * ratio_sinv_norm;
    prm.b = ratio_sinv_norm * prm.z_bar + sinv_norm * prm.theta_bar;
    prm.b0 = (eye - s_inv * gram).norm() * x0_norm + ratio_sinv_norm * xbar0_norm + sinv_norm * prm.theta_bar;

    out.a_less_than_one = prm.a < 1.0;
    out.condition_a = prm.a_l * std::sqrt(static_cast<double>(maps.n)) /
                          (1.0 + config.lambda_tilde() * prm.eta) <
                      1.0;
    out.zeta.resize(static_cast<std::size_t>(steps) + 1);
    out.zeta[0] = prm.b0;
    for (int t = 1; t <= steps; ++t) out.zeta[static_cast<std::size_t>(t)] = prm.a * out.zeta[t - 1] + prm.b;
    out.zeta_bar.resize(out.zeta.size());
    for (std::size_t i = 0; i < out.zeta.size(); ++i) out.zeta_bar[i] = prm.b > 0.0 ? out.zeta[i] / prm.b : 0.0;
    if (out.a_less_than_one) {
        out.zeta_inf = prm.b / (1.0 - prm.a);
        out.zeta_bar_inf = 1.0 / (1.0 - prm.a);
    } else {
        out.zeta_inf = std::numeric_limits<double>::infinity();
        out.zeta_bar_inf = std::numeric_limits<double>::infinity();
    }
    return out;
}

InitMheEstimator::InitMheEstimator(InitMheConfig config, Eigen::VectorXd prior0, std::optional<Box> state_box)
    : config_(std::move(config)), state_box_(std::move(state_box)), prior_(std::move(prior0)) {
    config_.validate();
    if (prior_.size() != config_.plant.n())
        throw std::invalid_argument("InitMheEstimator: prior dimension mismatch");
    maps_ = build_batch_maps(config_.plant, config_.L, config_.horizon);
}

std::optional<Eigen::VectorXd> InitMheEstimator::step(const Eigen::VectorXd& y_t, const Eigen::VectorXd& u_t) {
    if (y_t.size() != config_.plant.p()) throw std::invalid_argument("InitMheEstimator: measurement size mismatch");
    if (config_.plant.has_control() && u_t.size() != config_.plant.q())
        throw std::invalid_argument("InitMheEstimator: input size mismatch");

    y_buf_.push_back(y_t);
    u_buf_.push_back(u_t);
    ++t_;
    const Eigen::Index window = config_.horizon + 1;
    if (static_cast<Eigen::Index>(y_buf_.size()) < window) return std::nullopt;

    Eigen::VectorXd y_stack(window * config_.plant.p());
    for (Eigen::Index i = 0; i < window; ++i)
        y_stack.segment(i * config_.plant.p(), config_.plant.p()) = y_buf_[static_cast<std::size_t>(i)];
    Eigen::VectorXd u_stack(config_.horizon * maps_.q);
    for (Eigen::Index i = 0; i < config_.horizon; ++i) {
        if (maps_.q > 0) u_stack.segment(i * maps_.q, maps_.q) = u_buf_[static_cast<std::size_t>(i)];
    }

    Eigen::VectorXd estimate =
        state_box_ ? solve_initial_state_constrained(y_stack, u_stack, prior_, maps_, config_, *state_box_)
                   : solve_initial_state(y_stack, u_stack, prior_, maps_, config_);

    // Advance the prior with the measurement and input leaving the window.
    prior_ = prior_update(estimate, maps_.q > 0 ? u_buf_.front() : Eigen::VectorXd(), y_buf_.front(),
                          config_.plant, config_.L);
    y_buf_.pop_front();
    u_buf_.pop_front();
    return estimate;
}

}  // namespace mmhe
