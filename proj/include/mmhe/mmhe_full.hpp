#pragma once

#include <Eigen/Dense>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "mmhe/linmodel.hpp"
#include "mmhe/qpsolve.hpp"
#include "mmhe/riccati.hpp"
#include "mmhe/setops.hpp"

namespace mmhe {

// Rolling-horizon configuration for the full (state + noise sequence)
// framework on the observer-augmented model. The state box is the product of
// the plant state set and an invariant box for the observer error; the noise
// box is the product of the process and measurement noise sets.
struct MmheConfig {
    LinearPlant plant;
    ObserverGain obs;
    AugmentedPlant aug;
    double lambda = 0.5;
    Eigen::MatrixXd M;  // (m+p) x (m+p)
    Eigen::MatrixXd Q;  // m x m
    Eigen::MatrixXd R;  // p x p
    Eigen::Index horizon = 1;
    Box state_box;         // dimension 2n
    Box noise_box;         // dimension m+p
    Box output_noise_box;  // dimension p
    Eigen::VectorXd prior0;  // 2n
    Eigen::MatrixXd Phi0;    // 2n x 2n SPD

    void validate() const;
};

// Rolling window of the most recent measurements with contiguous indices.
class HorizonWindow {
public:
    explicit HorizonWindow(Eigen::Index capacity) : capacity_(capacity) {}

    void push(const Eigen::VectorXd& y, long t);
    void pop_front();
    Eigen::Index size() const { return static_cast<Eigen::Index>(data_.size()); }
    bool full() const { return size() == capacity_; }
    const Eigen::VectorXd& at(Eigen::Index i) const { return data_[static_cast<std::size_t>(i)]; }
    long tail_time() const { return t_tail_; }

private:
    Eigen::Index capacity_;
    std::deque<Eigen::VectorXd> data_;
    long t_tail_ = 0;
};

struct MmheState {
    Eigen::VectorXd prior;      // prediction of the window-tail augmented state
    RiccatiIterate Phi;         // arrival weight at the window tail
    double carried_cost = 0.0;  // optimal-cost constant, bookkeeping only
};

struct CondensedQp {
    QpProblem qp;
    // Decision layout: z = [chi_tail (2n), omega_0, ..., omega_{k-1} (m+p each)].
    Eigen::Index n_state;
    Eigen::Index n_noise;
    Eigen::Index steps;
    double cost_constant;                 // completes the objective to the full quadratic value
    std::vector<Eigen::MatrixXd> prop;    // prop[i] maps z to chi_{tail+i}, i = 0..steps
};

struct MmheStepResult {
    Eigen::VectorXd x_hat;        // plant-state estimate at the head time
    Eigen::VectorXd chi_head;     // augmented-state estimate at the head time
    double objective = 0.0;       // window QP objective (normalized cost scale)
    QpStatus status = QpStatus::optimal;
    int active_constraints = 0;
    long time = 0;
};

// Per-step log record shared with the benchmark CSV output.
struct MmheLogRecord {
    long time;
    Eigen::VectorXd y;
    Eigen::VectorXd x_hat;
    Eigen::VectorXd chi_head;
    double objective;
    QpStatus status;
    int active_constraints;
};

std::string mmhe_log_header(Eigen::Index p, Eigen::Index n);
std::string mmhe_log_row(const MmheLogRecord& rec);

class MmheEstimator {
public:
    explicit MmheEstimator(MmheConfig config);

    // Consumes the measurement taken at the current head time and returns the
    // estimate for the next instant (the window cost runs over measurements
    // strictly before the estimated instant).
    MmheStepResult step(const Eigen::VectorXd& y_new);

    const MmheState& state() const { return state_; }
    const MmheConfig& config() const { return config_; }
    long time() const { return t_; }

private:
    MmheStepResult solve_window();
    MmheStepResult lambda_zero_window();

    MmheConfig config_;
    MetamorphicWeights weights_;  // lambda in (0, 1) only
    MmheState state_;
    HorizonWindow window_;
    long t_ = 0;
};

// Condensed QP over the current window; requires a full window and
// lambda in (0, 1). Exposed for inspection and tests.
CondensedQp build_condensed_qp(const HorizonWindow& window, const MmheState& state, const MmheConfig& config);

}  // namespace mmhe
