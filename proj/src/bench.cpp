#include "mmhe/bench.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mmhe/fir_baseline.hpp"
#include "mmhe/json_io.hpp"
#include "mmhe/matutil.hpp"
#include "mmhe/rng.hpp"

namespace mmhe {

const char* to_string(Framework fw) {
    switch (fw) {
        case Framework::section2: return "section2";
        case Framework::section3: return "section3";
        case Framework::fir: return "fir";
    }
    return "unknown";
}

Framework framework_from_string(const std::string& s) {
    if (s == "section2") return Framework::section2;
    if (s == "section3") return Framework::section3;
    if (s == "fir") return Framework::fir;
    throw std::invalid_argument("framework_from_string: unknown framework '" + s + "'");
}

void ExperimentSpec::validate() const {
    if (scenarios < 1) throw std::invalid_argument("ExperimentSpec: scenario count must be >= 1");
    if (horizon < 1) throw std::invalid_argument("ExperimentSpec: horizon must be >= 1");
    if (t_sim < eval_start + eval_len)
        throw std::invalid_argument("ExperimentSpec: t_sim too short for the evaluation window");
    if (w_box.dim() != plant.m()) throw std::invalid_argument("ExperimentSpec: w box dimension mismatch");
    if (v_box.dim() != plant.p()) throw std::invalid_argument("ExperimentSpec: v box dimension mismatch");
    if (!w_box.contains(Eigen::VectorXd::Zero(plant.m())) || !v_box.contains(Eigen::VectorXd::Zero(plant.p())))
        throw std::invalid_argument("ExperimentSpec: noise boxes must contain the origin");
    if (L.rows() != plant.n() || L.cols() != plant.p())
        throw std::invalid_argument("ExperimentSpec: L must be n x p");
    if (framework == Framework::section2) {
        if (lambda < 0.0 || lambda >= 1.0)
            throw std::invalid_argument("ExperimentSpec: section2 lambda must lie in [0, 1)");
        if (eval_start < 1) throw std::invalid_argument("ExperimentSpec: eval_start must be >= 1 for section2");
    } else {
        if (lambda < 0.0 || lambda > 1.0)
            throw std::invalid_argument("ExperimentSpec: section3 lambda must lie in [0, 1]");
        if (eval_start < horizon)
            throw std::invalid_argument("ExperimentSpec: evaluation cannot start before the first full window");
    }
}

nlohmann::json experiment_to_json(const ExperimentSpec& spec) {
    nlohmann::json j;
    j["framework"] = to_string(spec.framework);
    j["A"] = matrix_to_json(spec.plant.A);
    j["G"] = matrix_to_json(spec.plant.G);
    if (spec.plant.has_control()) j["B"] = matrix_to_json(spec.plant.B);
    j["C"] = matrix_to_json(spec.plant.C);
    j["L"] = matrix_to_json(spec.L);
    j["M"] = matrix_to_json(spec.M);
    j["Q"] = matrix_to_json(spec.Q);
    j["R"] = matrix_to_json(spec.R);
    j["mu"] = spec.mu;
    j["mu_bar"] = spec.mu_bar;
    j["lambda"] = spec.lambda;
    j["horizon"] = spec.horizon;
    j["w_box"] = box_to_json(spec.w_box);
    j["v_box"] = box_to_json(spec.v_box);
    j["state_box"] = box_to_json(spec.state_box);
    j["noise_box"] = box_to_json(spec.noise_box);
    j["output_noise_box"] = box_to_json(spec.output_noise_box);
    j["t_sim"] = spec.t_sim;
    j["scenarios"] = spec.scenarios;
    j["base_seed"] = spec.base_seed;
    j["eval_start"] = spec.eval_start;
    j["eval_len"] = spec.eval_len;
    if (spec.x0_true.size() > 0) j["x0_true"] = vector_to_json(spec.x0_true);
    if (spec.aug_true0.size() > 0) j["aug_true0"] = vector_to_json(spec.aug_true0);
    if (spec.xbar0.size() > 0) j["xbar0"] = vector_to_json(spec.xbar0);
    return j;
}

ExperimentSpec experiment_from_json(const nlohmann::json& j) {
    ExperimentSpec spec;
    spec.framework = framework_from_string(j.at("framework").get<std::string>());
    Eigen::MatrixXd a = matrix_from_json(j.at("A"));
    Eigen::MatrixXd g = matrix_from_json(j.at("G"));
    Eigen::MatrixXd c = matrix_from_json(j.at("C"));
    if (j.contains("B"))
        spec.plant = LinearPlant(a, g, matrix_from_json(j.at("B")), c);
    else
        spec.plant = LinearPlant(a, g, c);
    spec.L = matrix_from_json(j.at("L"));
    spec.M = matrix_from_json(j.at("M"));
    spec.Q = matrix_from_json(j.at("Q"));
    spec.R = matrix_from_json(j.at("R"));
    spec.mu = j.at("mu").get<double>();
    spec.mu_bar = j.at("mu_bar").get<double>();
    spec.lambda = j.at("lambda").get<double>();
    spec.horizon = j.at("horizon").get<Eigen::Index>();
    spec.w_box = box_from_json(j.at("w_box"));
    spec.v_box = box_from_json(j.at("v_box"));
    spec.state_box = box_from_json(j.at("state_box"));
    spec.noise_box = box_from_json(j.at("noise_box"));
    spec.output_noise_box = box_from_json(j.at("output_noise_box"));
    spec.t_sim = j.at("t_sim").get<int>();
    spec.scenarios = j.at("scenarios").get<int>();
    spec.base_seed = j.at("base_seed").get<std::uint64_t>();
    spec.eval_start = j.at("eval_start").get<int>();
    spec.eval_len = j.at("eval_len").get<int>();
    if (j.contains("x0_true")) spec.x0_true = vector_from_json(j.at("x0_true"));
    if (j.contains("aug_true0")) spec.aug_true0 = vector_from_json(j.at("aug_true0"));
    if (j.contains("xbar0")) spec.xbar0 = vector_from_json(j.at("xbar0"));
    return spec;
}

std::string spec_hash(const ExperimentSpec& spec) {
    const std::string dump = experiment_to_json(spec).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

TrajectoryLog simulate(const LinearPlant& plant, const Box& w_box, const Box& v_box, int t_sim,
                       std::uint64_t seed, const Eigen::VectorXd& x0) {
    if (!w_box.contains(Eigen::VectorXd::Zero(plant.m())) || !v_box.contains(Eigen::VectorXd::Zero(plant.p())))
        throw std::invalid_argument("simulate: noise boxes must contain the origin");
    if (x0.size() != plant.n()) throw std::invalid_argument("simulate: x0 dimension mismatch");
    SplitMix64 rng(seed);
    TrajectoryLog log;
    log.x.reserve(static_cast<std::size_t>(t_sim) + 1);
    log.x.push_back(x0);
    Eigen::VectorXd x = x0;
    for (int t = 0; t < t_sim; ++t) {
        Eigen::VectorXd v(plant.p());
        for (Eigen::Index i = 0; i < plant.p(); ++i) v[i] = rng.uniform(v_box.lower[i], v_box.upper[i]);
        Eigen::VectorXd w(plant.m());
        for (Eigen::Index i = 0; i < plant.m(); ++i) w[i] = rng.uniform(w_box.lower[i], w_box.upper[i]);
        log.y.push_back(plant.C * x + v);
        log.v.push_back(v);
        log.w.push_back(w);
        x = plant.A * x + plant.G * w;
        log.x.push_back(x);
    }
    return log;
}

Eigen::MatrixXd reference_vehicle_gain() {
    Eigen::MatrixXd l(4, 3);
    l << 1.2466, 0.0, 0.0,
         0.0, 0.8627, 0.4358,
         0.6759, 0.0, 0.0,
         0.0, 0.0090, 0.8535;
    return l;
}

namespace {

LinearPlant vehicle_plant() {
    Eigen::MatrixXd a(4, 4);
    a << 1, 0, 0.5, 0,
         0, 1, 0, 0.5,
         0, 0, 1, 0,
         0, 0, 0, 1;
    Eigen::MatrixXd c(3, 4);
    c << 1, 0, 0, 0,
         0, 1, 0, 0,
         0, 0, 1, 0;
    return LinearPlant(a, Eigen::MatrixXd::Identity(4, 4), c);
}

Eigen::MatrixXd vehicle_gain(const LinearPlant& plant) {
    const std::vector<std::complex<double>> targets = {
        {0.1519, 0.0}, {0.6015, 0.0}, {0.1419, 0.0236}, {0.1419, -0.0236}};
    return place_poles(plant.A, plant.C, targets).L;
}

Box unbounded_box(Eigen::Index d) {
    const double inf = std::numeric_limits<double>::infinity();
    return Box(Eigen::VectorXd::Constant(d, -inf), Eigen::VectorXd::Constant(d, inf));
}

}  // namespace

ExperimentSpec vehicle_scenario() {
    ExperimentSpec spec;
    spec.framework = Framework::section2;
    spec.plant = vehicle_plant();
    spec.L = vehicle_gain(spec.plant);
    spec.M = 10.0 * Eigen::MatrixXd::Identity(7, 7);
    spec.Q = Eigen::MatrixXd::Identity(4, 4);
    spec.R = 0.5 * Eigen::MatrixXd::Identity(3, 3);
    spec.lambda = 0.5;
    spec.horizon = 20;
    spec.w_box = Box::cube(4, 0.1);
    spec.v_box = Box::cube(3, 0.25);
    spec.state_box = unbounded_box(8);
    spec.noise_box = unbounded_box(7);
    spec.output_noise_box = unbounded_box(3);
    spec.t_sim = 120;
    spec.scenarios = 200;
    spec.base_seed = 1;
    spec.eval_start = 20;
    spec.eval_len = 100;
    Eigen::VectorXd aug0(8);
    aug0 << 5, 5, 5, 5, 10, 10, 10, 10;
    spec.aug_true0 = aug0;
    return spec;
}

ExperimentSpec vehicle_scenario_section3(int noise_case) {
    ExperimentSpec spec = vehicle_scenario();
    spec.framework = Framework::section3;
    spec.mu = 0.15;
    spec.mu_bar = 0.1;
    const double bound = noise_case == 1 ? 0.01 : 0.025;
    spec.w_box = Box::cube(4, bound);
    spec.v_box = Box::cube(3, bound);
    spec.aug_true0 = Eigen::VectorXd();
    spec.x0_true = Eigen::VectorXd();  // drawn per scenario
    return spec;
}

namespace {

// Per-scenario error sequences over the evaluation window.
std::vector<double> scenario_sq_errors_section3(const ExperimentSpec& spec, std::uint64_t seed,
                                                bool fir_mode) {
    SplitMix64 rng(seed);
    const Eigen::Index n = spec.plant.n();
    Eigen::VectorXd x0 = spec.x0_true.size() > 0 ? spec.x0_true : rng.normal_vector(n);
    Eigen::VectorXd xbar0 = spec.xbar0.size() > 0 ? spec.xbar0 : rng.normal_vector(n);

    TrajectoryLog log = simulate(spec.plant, spec.w_box, spec.v_box, spec.t_sim, rng.next_u64(), x0);

    InitMheConfig cfg{spec.plant, spec.L, spec.horizon, spec.lambda, spec.mu, spec.mu_bar};
    cfg.validate();
    BatchMaps maps = build_batch_maps(spec.plant, spec.L, spec.horizon);
    const Eigen::Index window = spec.horizon + 1;

    std::vector<double> sq;
    Eigen::VectorXd prior = xbar0;
    for (int t = static_cast<int>(spec.horizon); t < spec.t_sim; ++t) {
        Eigen::VectorXd y_stack(window * spec.plant.p());
        for (Eigen::Index i = 0; i < window; ++i)
            y_stack.segment(i * spec.plant.p(), spec.plant.p()) = log.y[static_cast<std::size_t>(t - spec.horizon + i)];
        Eigen::VectorXd u_stack(0);

        Eigen::VectorXd estimate;
        if (fir_mode) {
            estimate = ufir_estimate(y_stack, u_stack, maps.open, spec.plant, spec.horizon).x_tail;
        } else {
            estimate = solve_initial_state(y_stack, u_stack, prior, maps, cfg);
            prior = prior_update(estimate, Eigen::VectorXd(), log.y[static_cast<std::size_t>(t - spec.horizon)],
                                 spec.plant, spec.L);
        }
        if (t >= spec.eval_start && t < spec.eval_start + spec.eval_len) {
            const Eigen::VectorXd err = log.x[static_cast<std::size_t>(t - spec.horizon)] - estimate;
            sq.push_back(err.squaredNorm());
        }
    }
    return sq;
}

std::vector<double> scenario_sq_errors_section2(const ExperimentSpec& spec, std::uint64_t seed) {
    SplitMix64 rng(seed);
    const Eigen::Index n = spec.plant.n();
    Eigen::VectorXd aug0 = spec.aug_true0.size() > 0 ? spec.aug_true0 : rng.normal_vector(2 * n);
    Eigen::VectorXd prior0 = rng.normal_vector(2 * n);

    const Eigen::VectorXd x0 = aug0.head(n) + aug0.tail(n);
    TrajectoryLog log = simulate(spec.plant, spec.w_box, spec.v_box, spec.t_sim, rng.next_u64(), x0);

    MmheConfig cfg;
    cfg.plant = spec.plant;
    cfg.obs = ObserverGain(spec.plant.A, spec.plant.C, spec.L);
    cfg.aug = augment(spec.plant, cfg.obs);
    cfg.lambda = spec.lambda;
    cfg.M = spec.M;
    cfg.Q = spec.Q;
    cfg.R = spec.R;
    cfg.horizon = spec.horizon;
    cfg.state_box = spec.state_box;
    cfg.noise_box = spec.noise_box;
    cfg.output_noise_box = spec.output_noise_box;
    cfg.prior0 = prior0;
    if (spec.lambda > 0.0) {
        MetamorphicWeights w = qe_weights(spec.lambda, spec.M, spec.Q);
        auto step_fn = [&](const Eigen::MatrixXd& p) {
            return are_step_augmented(RiccatiIterate(p), cfg.aug, w, spec.R).value;
        };
        cfg.Phi0 = steady_state(step_fn, Eigen::MatrixXd::Identity(2 * n, 2 * n), 1e-12, 100000).value.value;
    } else {
        cfg.Phi0 = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    }
    MmheEstimator estimator(cfg);

    std::vector<double> sq;
    for (int t = 0; t < spec.t_sim; ++t) {
        MmheStepResult res = estimator.step(log.y[static_cast<std::size_t>(t)]);
        const int head = t + 1;  // estimate refers to the instant after the data
        if (head >= spec.eval_start && head < spec.eval_start + spec.eval_len && head <= spec.t_sim) {
            const Eigen::VectorXd err = log.x[static_cast<std::size_t>(head)] - res.x_hat;
            sq.push_back(err.squaredNorm());
        }
    }
    return sq;
}

}  // namespace

ArmseReport run_monte_carlo(const ExperimentSpec& spec) {
    spec.validate();
    ArmseReport report;
    report.base_seed = spec.base_seed;
    report.spec_hash = spec_hash(spec);
    double sum = 0.0;
    for (int i = 0; i < spec.scenarios; ++i) {
        const std::uint64_t seed = spec.base_seed + static_cast<std::uint64_t>(i);
        try {
            std::vector<double> sq;
            switch (spec.framework) {
                case Framework::section2: sq = scenario_sq_errors_section2(spec, seed); break;
                case Framework::section3: sq = scenario_sq_errors_section3(spec, seed, false); break;
                case Framework::fir: sq = scenario_sq_errors_section3(spec, seed, true); break;
            }
            if (sq.empty()) throw std::runtime_error("empty evaluation window");
            double mean_sq = 0.0;
            for (double s : sq) mean_sq += s;
            mean_sq /= static_cast<double>(sq.size());
            const double rmse = std::sqrt(mean_sq);
            report.per_scenario_rmse.push_back(rmse);
            sum += rmse;
        } catch (const std::exception&) {
            ++report.failures;
        }
    }
    if (report.per_scenario_rmse.empty())
        throw std::runtime_error("run_monte_carlo: every scenario failed");
    report.armse = sum / static_cast<double>(report.per_scenario_rmse.size());
    return report;
}

std::string SweepResult::to_csv() const {
    std::ostringstream out;
    out << "estimator,lambda,armse,failures\n";
    out.precision(17);
    for (const auto& row : rows) out << "mhe," << row.lambda << ',' << row.armse << ',' << row.failures << '\n';
    out << "fir,," << fir_armse << ',' << fir_failures << '\n';
    return out.str();
}

SweepResult sweep_lambda(const ExperimentSpec& spec, const std::vector<double>& lambdas) {
    SweepResult result;
    for (double lambda : lambdas) {
        ExperimentSpec s = spec;
        s.lambda = lambda;
        ArmseReport rep = run_monte_carlo(s);
        result.rows.push_back({lambda, rep.armse, rep.failures});
    }
    ExperimentSpec fir_spec = spec;
    fir_spec.framework = Framework::fir;
    ArmseReport fir_rep = run_monte_carlo(fir_spec);
    result.fir_armse = fir_rep.armse;
    result.fir_failures = fir_rep.failures;

    result.monotone_decreasing = true;
    for (std::size_t i = 0; i + 1 < result.rows.size(); ++i)
        result.monotone_decreasing = result.monotone_decreasing && result.rows[i + 1].armse < result.rows[i].armse;

    double lo = std::numeric_limits<double>::quiet_NaN();
    double hi = std::numeric_limits<double>::quiet_NaN();
    for (const auto& row : result.rows) {
        if (row.lambda == 0.25) hi = row.armse;
        if (row.lambda == 0.5) lo = row.armse;
    }
    result.fir_bracketed = std::isfinite(lo) && std::isfinite(hi) &&
                           result.fir_armse >= std::min(lo, hi) && result.fir_armse <= std::max(lo, hi);
    return result;
}

std::string run_single_csv(const ExperimentSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::ostringstream out;
    out.precision(17);
    const Eigen::Index n = spec.plant.n();
    const Eigen::Index p = spec.plant.p();

    out << "t";
    for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
    for (Eigen::Index i = 0; i < p; ++i) out << ",y" << i;
    for (Eigen::Index i = 0; i < n; ++i) out << ",xhat" << i;
    out << ",err_norm\n";

    auto emit = [&](int t, const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& xhat) {
        out << t;
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << x[i];
        for (Eigen::Index i = 0; i < p; ++i) out << ',' << y[i];
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << xhat[i];
        out << ',' << (x - xhat).norm() << '\n';
    };

    SplitMix64 rng(seed);
    if (spec.framework == Framework::section2) {
        Eigen::VectorXd aug0 = spec.aug_true0.size() > 0 ? spec.aug_true0 : rng.normal_vector(2 * n);
        Eigen::VectorXd prior0 = rng.normal_vector(2 * n);
        const Eigen::VectorXd x0 = aug0.head(n) + aug0.tail(n);
        TrajectoryLog log = simulate(spec.plant, spec.w_box, spec.v_box, spec.t_sim, rng.next_u64(), x0);

        MmheConfig cfg;
        cfg.plant = spec.plant;
        cfg.obs = ObserverGain(spec.plant.A, spec.plant.C, spec.L);
        cfg.aug = augment(spec.plant, cfg.obs);
        cfg.lambda = spec.lambda;
        cfg.M = spec.M;
        cfg.Q = spec.Q;
        cfg.R = spec.R;
        cfg.horizon = spec.horizon;
        cfg.state_box = spec.state_box;
        cfg.noise_box = spec.noise_box;
        cfg.output_noise_box = spec.output_noise_box;
        cfg.prior0 = prior0;
        cfg.Phi0 = Eigen::MatrixXd::Identity(2 * n, 2 * n);
        MmheEstimator estimator(cfg);
        for (int t = 0; t < spec.t_sim; ++t) {
            MmheStepResult res = estimator.step(log.y[static_cast<std::size_t>(t)]);
            emit(t + 1, log.x[static_cast<std::size_t>(t + 1)], log.y[static_cast<std::size_t>(t)], res.x_hat);
        }
        return out.str();
    }

    Eigen::VectorXd x0 = spec.x0_true.size() > 0 ? spec.x0_true : rng.normal_vector(n);
    Eigen::VectorXd xbar0 = spec.xbar0.size() > 0 ? spec.xbar0 : rng.normal_vector(n);
    TrajectoryLog log = simulate(spec.plant, spec.w_box, spec.v_box, spec.t_sim, rng.next_u64(), x0);
    BatchMaps maps = build_batch_maps(spec.plant, spec.L, spec.horizon);
    InitMheConfig cfg{spec.plant, spec.L, spec.horizon, spec.lambda, spec.mu, spec.mu_bar};
    cfg.validate();
    const Eigen::Index window = spec.horizon + 1;
    Eigen::VectorXd prior = xbar0;
    for (int t = static_cast<int>(spec.horizon); t < spec.t_sim; ++t) {
        Eigen::VectorXd y_stack(window * p);
        for (Eigen::Index i = 0; i < window; ++i)
            y_stack.segment(i * p, p) = log.y[static_cast<std::size_t>(t - spec.horizon + i)];
        Eigen::VectorXd u_stack(0);
        Eigen::VectorXd estimate;
        if (spec.framework == Framework::fir) {
            estimate = ufir_estimate(y_stack, u_stack, maps.open, spec.plant, spec.horizon).x_tail;
        } else {
            estimate = solve_initial_state(y_stack, u_stack, prior, maps, cfg);
            prior = prior_update(estimate, Eigen::VectorXd(), log.y[static_cast<std::size_t>(t - spec.horizon)],
                                 spec.plant, spec.L);
        }
        emit(t, log.x[static_cast<std::size_t>(t - spec.horizon)], log.y[static_cast<std::size_t>(t)], estimate);
    }
    return out.str();
}

}  // namespace mmhe
