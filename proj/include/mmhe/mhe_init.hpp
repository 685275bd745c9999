#pragma once

#include <Eigen/Dense>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "mmhe/linmodel.hpp"
#include "mmhe/setops.hpp"

namespace mmhe {

// Stacked horizon maps for the window [t-N, t] of the initial-state
// framework: y-stack = Lambda x_{t-N} + Gamma u-stack + Phi_w w-stack + v-stack
// for the open-loop plant, and the observer-loop counterparts obtained by
// replacing A with A_L. L_N collects the in-window observer injections and
// Psi = I - L_N.
struct OpenLoopMaps {
    Eigen::MatrixXd Lambda;   // (N+1)p x n
    Eigen::MatrixXd Gamma;    // (N+1)p x Nq
    Eigen::MatrixXd Phi_w;    // (N+1)p x Nn
};

struct ObserverMaps {
    Eigen::MatrixXd Lambda_bar;  // (N+1)p x n
    Eigen::MatrixXd Gamma_bar;   // (N+1)p x Nq
    Eigen::MatrixXd Phi_bar;     // alias of L_N: maps the y-stack
    Eigen::MatrixXd L_N;         // (N+1)p x (N+1)p, strictly block lower triangular
    Eigen::MatrixXd Psi;         // I - L_N
    Eigen::MatrixXd Phi_w_obs;   // (N+1)p x Nn observer-loop noise-to-output map
};

struct BatchMaps {
    OpenLoopMaps open;
    ObserverMaps obs;
    Eigen::Index N = 0;
    Eigen::Index n = 0;
    Eigen::Index p = 0;
    Eigen::Index q = 0;
};

OpenLoopMaps build_open_loop_maps(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                  const Eigen::MatrixXd& c, Eigen::Index n_horizon);

ObserverMaps build_observer_maps(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                 const Eigen::MatrixXd& c, const Eigen::MatrixXd& l,
                                 Eigen::Index n_horizon);

BatchMaps build_batch_maps(const LinearPlant& plant, const Eigen::MatrixXd& l, Eigen::Index n_horizon);

// Scalar weight bookkeeping: lambda_bar = lambda mu + (1 - lambda) mu_bar and
// ratio = lambda_bar / lambda (the prior weight of the normalized cost).
struct WeightRatio {
    double lambda_bar;
    double ratio;
    int case_label;           // 1: ratio == 1, 2: ratio > 1, 3: ratio < 1, 0: unlabeled regime
    double d_ratio_dlambda;   // -mu_bar / lambda^2
};

WeightRatio weight_ratio(double lambda, double mu, double mu_bar);

struct InitMheConfig {
    LinearPlant plant;
    Eigen::MatrixXd L;
    Eigen::Index horizon = 0;
    double lambda = 0.0;
    double mu = 0.0;
    double mu_bar = 0.0;

    void validate() const;
    double lambda_bar() const { return lambda * mu + (1.0 - lambda) * mu_bar; }
    // Prior weight of the normalized cost; handles the lambda = 1 endpoint.
    double prior_ratio() const;
    double lambda_tilde() const;
};

// Closed-form minimizer of the normalized window cost
//   ratio ||x - prior||^2 + ||Psi y-stack - Gamma_bar u-stack - Lambda_bar x||^2.
// At lambda = 0 the cost degenerates to the prior term and the prior is
// returned unchanged.
Eigen::VectorXd solve_initial_state(const Eigen::VectorXd& y_stack, const Eigen::VectorXd& u_stack,
                                    const Eigen::VectorXd& prior, const BatchMaps& maps,
                                    const InitMheConfig& config);

// Same cost with box bounds on the window-initial state, routed through the
// QP layer.
Eigen::VectorXd solve_initial_state_constrained(const Eigen::VectorXd& y_stack,
                                                const Eigen::VectorXd& u_stack,
                                                const Eigen::VectorXd& prior, const BatchMaps& maps,
                                                const InitMheConfig& config, const Box& state_box);

// One observer step on the previous optimum: A x + B u + L (y - C x).
Eigen::VectorXd prior_update(const Eigen::VectorXd& x_opt, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& y, const LinearPlant& plant,
                             const Eigen::MatrixXd& l);

// Error dynamics e <- A_L_bar e + S_bar^{-1} S1 w-stack + S_bar^{-1} S2 v-stack
// with w-stack = [w_{t-N-1}, ..., w_{t-1}] and v-stack = [v_{t-N-1}, ..., v_t].
struct ErrorDynamics {
    Eigen::MatrixXd A_L_bar;  // n x n
    Eigen::MatrixXd S_bar;    // n x n SPD
    Eigen::MatrixXd S1;       // n x (N+1)n
    Eigen::MatrixXd S2;       // n x (N+2)p
};

ErrorDynamics error_dynamics(const BatchMaps& maps, const InitMheConfig& config, const Eigen::MatrixXd& l);

struct DecayRow {
    double lambda_low;
    double lambda_high;
    double min_eig_diff;
    bool pass;
};

struct DecayReport {
    std::vector<DecayRow> rows;
    std::vector<double> lambdas;
    std::vector<double> min_eig_qbar;   // positive definiteness of Q_bar_L per grid point
    double max_fd_error_ltilde = 0.0;   // finite differences vs mu_bar / lambda_bar^2
    double max_fd_error_ltilde_sq = 0.0;
    bool pass = true;

    std::string to_csv() const;
};

// Lyapunov-based decay-rate monotonicity: Q_bar_L(lambda) differences over the
// grid must be positive definite, with P_L solving A_L' P A_L - P + Q_L = 0.
DecayReport decay_monotonicity_report(const LinearPlant& plant, const Eigen::MatrixXd& l,
                                      Eigen::Index n_horizon, double mu, double mu_bar,
                                      const std::vector<double>& lambdas,
                                      const Eigen::MatrixXd& q_l = Eigen::MatrixXd());

// Scalar constants of the disturbance bound sequence zeta_t = a zeta_{t-1} + b
// and its normalized variant. Norms are Frobenius for matrices, Euclidean for
// vectors.
struct BoundParams {
    double a = 0.0;
    double b = 0.0;
    double b0 = 0.0;
    double a_l = 0.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    double l = 0.0;
    double z_w = 0.0;
    double z_v = 0.0;
    double z_bar = 0.0;
    double theta_bar = 0.0;
    double eta = 0.0;
    Eigen::Index n = 0;
};

struct BoundSequence {
    BoundParams params;
    std::vector<double> zeta;
    std::vector<double> zeta_bar;
    double zeta_inf = 0.0;       // b / (1 - a) when a < 1, else +inf
    double zeta_bar_inf = 0.0;   // 1 / (1 - a) when a < 1, else +inf
    bool a_less_than_one = false;
    bool condition_a = false;    // a_l sqrt(n) / (1 + lambda_tilde eta) < 1
};

BoundSequence bound_sequence(const BatchMaps& maps, const InitMheConfig& config, double z_w, double z_v,
                             double x0_norm, double xbar0_norm, int steps);

// Rolling estimator for the initial-state framework. Feed one measurement
// (and the input applied over the following sample) per step; once the window
// holds N+1 measurements every further step yields the window-initial
// estimate and advances the prior by one observer step.
class InitMheEstimator {
public:
    InitMheEstimator(InitMheConfig config, Eigen::VectorXd prior0,
                     std::optional<Box> state_box = std::nullopt);

    // y_t is the measurement at the current instant, u_t the input applied on
    // [t, t+1) (empty when the plant has no control channel). Returns the
    // estimate of x_{t-N} when the window is full, nothing during warmup.
    std::optional<Eigen::VectorXd> step(const Eigen::VectorXd& y_t, const Eigen::VectorXd& u_t);

    const BatchMaps& maps() const { return maps_; }
    const Eigen::VectorXd& prior() const { return prior_; }
    long time() const { return t_; }

private:
    InitMheConfig config_;
    BatchMaps maps_;
    std::optional<Box> state_box_;
    Eigen::VectorXd prior_;
    std::deque<Eigen::VectorXd> y_buf_;
    std::deque<Eigen::VectorXd> u_buf_;
    long t_ = 0;
};

}  // namespace mmhe
