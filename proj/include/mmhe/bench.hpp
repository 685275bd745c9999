#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "mmhe/linmodel.hpp"
#include "mmhe/mhe_init.hpp"
#include "mmhe/mmhe_full.hpp"
#include "mmhe/setops.hpp"

namespace mmhe {

enum class Framework { section2, section3, fir };

const char* to_string(Framework fw);
Framework framework_from_string(const std::string& s);

// Complete description of one Monte Carlo experiment: model, estimator
// selection, noise sets and the evaluation protocol. Serializes to JSON so a
// run is reproducible from the document alone.
struct ExperimentSpec {
    Framework framework = Framework::section3;
    LinearPlant plant;
    Eigen::MatrixXd L;

    // Full-framework weights (section2).
    Eigen::MatrixXd M;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
    // Initial-state framework weights (section3).
    double mu = 0.15;
    double mu_bar = 0.1;

    double lambda = 0.5;
    Eigen::Index horizon = 20;

    Box w_box;  // process noise set
    Box v_box;  // measurement noise set
    // Constraint boxes for section2 (non-binding bounds may be infinite).
    Box state_box;
    Box noise_box;
    Box output_noise_box;

    int t_sim = 120;
    int scenarios = 200;
    std::uint64_t base_seed = 1;
    int eval_start = 20;  // time instant at which errors start being recorded
    int eval_len = 100;

    // Fixed truths; empty vectors mean "draw from the scenario stream".
    Eigen::VectorXd x0_true;      // plant initial state (section3 / fir)
    Eigen::VectorXd aug_true0;    // [observer state, error] initial truth (section2)
    Eigen::VectorXd xbar0;        // fixed section3 prior guess (drawn when empty)

    void validate() const;
};

nlohmann::json experiment_to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_from_json(const nlohmann::json& j);

struct TrajectoryLog {
    std::vector<Eigen::VectorXd> x;  // length t_sim + 1
    std::vector<Eigen::VectorXd> y;  // length t_sim
    std::vector<Eigen::VectorXd> w;
    std::vector<Eigen::VectorXd> v;
};

// Seeded plant simulation with componentwise-uniform noise over the boxes.
// The generator is SplitMix64; each step draws the measurement noise
// components first, then the process noise components, so logs reproduce
// bit-identically across platforms.
TrajectoryLog simulate(const LinearPlant& plant, const Box& w_box, const Box& v_box, int t_sim,
                       std::uint64_t seed, const Eigen::VectorXd& x0);

// Kinematic vehicle surrogate: two positions and two velocities at a 0.5 s
// sample, three measured outputs, pre-estimator placed at the reference
// eigenvalue set {0.1519, 0.6015, 0.1419 +/- 0.0236i}.
ExperimentSpec vehicle_scenario();

// Same model configured for the initial-state framework; noise_case selects
// the +/-0.01 (1) or +/-0.025 (2) componentwise noise bound.
ExperimentSpec vehicle_scenario_section3(int noise_case = 2);

// Reference pre-estimator gain published for the original vehicle model; kept
// as a documented constant. The surrogate output map used here pairs with a
// re-derived gain that realizes the same closed-loop eigenvalues.
Eigen::MatrixXd reference_vehicle_gain();

struct ArmseReport {
    double armse = 0.0;
    std::vector<double> per_scenario_rmse;
    int failures = 0;
    std::uint64_t base_seed = 0;
    std::string spec_hash;
};

ArmseReport run_monte_carlo(const ExperimentSpec& spec);

struct SweepRow {
    double lambda;
    double armse;
    int failures;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double fir_armse = 0.0;
    int fir_failures = 0;
    bool monotone_decreasing = false;
    // True when the FIR value lies between the lambda = 0.25 and 0.5 rows
    // (reported, never asserted).
    bool fir_bracketed = false;

    std::string to_csv() const;
};

SweepResult sweep_lambda(const ExperimentSpec& spec, const std::vector<double>& lambdas);

// Single-scenario trace for the `run` subcommand: per-step truth, data,
// estimate and error norm.
std::string run_single_csv(const ExperimentSpec& spec, std::uint64_t seed);

// FNV-1a of the canonical JSON dump; identifies a spec in reports.
std::string spec_hash(const ExperimentSpec& spec);

}  // namespace mmhe
