#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "mmhe/bench.hpp"
#include "mmhe/linmodel.hpp"
#include "mmhe/matutil.hpp"
#include "mmhe/riccati.hpp"
#include "mmhe/rng.hpp"

using namespace mmhe;

namespace {

Eigen::MatrixXd mat1(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }

// Scalar seed plant used across the suite: n = m = p = 1.
struct ScalarSeed {
    LinearPlant plant;
    ObserverGain obs;
    AugmentedPlant aug;
    Eigen::MatrixXd M, Q, R;

    ScalarSeed()
        : plant(mat1(0.9), mat1(1.0), mat1(1.0)),
          obs(plant.A, plant.C, mat1(0.5)),
          aug(augment(plant, obs)),
          M(Eigen::MatrixXd::Identity(2, 2)),
          Q(mat1(1.0)),
          R(mat1(1.0)) {}
};

Eigen::MatrixXd random_spd(SplitMix64& rng, Eigen::Index d, double bump = 0.2) {
    Eigen::MatrixXd m(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.normal();
    return symmetrize(m * m.transpose()) + bump * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST_SUITE("riccati") {

TEST_CASE("are_step scalar closed form") {
    RiccatiIterate p(mat1(1.0));
    RiccatiIterate next = are_step(p, mat1(1.0), mat1(1.0), mat1(1.0), mat1(1.0), mat1(1.0));
    CHECK(std::abs(next.value(0, 0) - 1.5) < 1e-12);
    CHECK(next.step == 1);
}

TEST_CASE("are_step degenerate maps") {
    RiccatiIterate p(Eigen::MatrixXd::Identity(2, 2));
    Eigen::MatrixXd a(2, 2);
    a << 0.3, 0.1, 0.0, 0.5;
    Eigen::MatrixXd g = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd q = 2.0 * Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(1, 1);

    // Zero output map: no measurement update term.
    RiccatiIterate open = are_step(p, a, Eigen::MatrixXd::Zero(1, 2), g, q, r);
    CHECK((open.value - (g * q * g.transpose() + a * p.value * a.transpose())).norm() < 1e-12);

    // Memoryless plant.
    RiccatiIterate memoryless = are_step(p, Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd{{1.0, 0.0}}, g, q, r);
    CHECK((memoryless.value - g * q * g.transpose()).norm() < 1e-12);
}

TEST_CASE("qe_weights direct substitution") {
    MetamorphicWeights w = qe_weights(0.5, Eigen::MatrixXd::Identity(2, 2), mat1(1.0));
    Eigen::MatrixXd want_inv(2, 2);
    want_inv << 2, 0, 0, 1;
    CHECK((w.Qe_inv - want_inv).norm() < 1e-12);
    Eigen::MatrixXd want(2, 2);
    want << 0.5, 0, 0, 1;
    CHECK((w.Qe - want).norm() < 1e-12);
}

TEST_CASE("qe_weights monotone in lambda") {
    SplitMix64 rng(3);
    Eigen::MatrixXd m = random_spd(rng, 3);
    Eigen::MatrixXd q = random_spd(rng, 2);
    MetamorphicWeights lo = qe_weights(0.25, m, q);
    MetamorphicWeights hi = qe_weights(0.75, m, q);
    CHECK(min_eigenvalue_sym(hi.Qe - lo.Qe) > 0.0);
}

TEST_CASE("qe_weights vehicle sizing and endpoint rejection") {
    MetamorphicWeights w = qe_weights(0.5, 10.0 * Eigen::MatrixXd::Identity(7, 7),
                                      Eigen::MatrixXd::Identity(4, 4));
    CHECK(w.Qe_inv.rows() == 7);
    CHECK(w.Qe_inv.cols() == 7);
    CHECK_THROWS(qe_weights(1.0, Eigen::MatrixXd::Identity(2, 2), mat1(1.0)));
    CHECK_THROWS(qe_weights(0.0, Eigen::MatrixXd::Identity(2, 2), mat1(1.0)));
}

TEST_CASE("derivative_qe_inv") {
    Eigen::MatrixXd d = derivative_qe_inv(0.5, Eigen::MatrixXd::Identity(2, 2));
    CHECK((d + 4.0 * Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-14);

    // Central difference oracle.
    SplitMix64 rng(11);
    Eigen::MatrixXd m = random_spd(rng, 3);
    Eigen::MatrixXd q = random_spd(rng, 2);
    const double delta = 1e-5;
    Eigen::MatrixXd fd =
        (qe_weights(0.5 + delta, m, q).Qe_inv - qe_weights(0.5 - delta, m, q).Qe_inv) / (2.0 * delta);
    Eigen::MatrixXd exact = derivative_qe_inv(0.5, m);
    CHECK((fd - exact).norm() / exact.norm() < 1e-6);
    CHECK(max_eigenvalue_sym(exact) < 0.0);
}

TEST_CASE("derivative_qe") {
    MetamorphicWeights w = qe_weights(0.5, Eigen::MatrixXd::Identity(2, 2), mat1(1.0));
    Eigen::MatrixXd d = derivative_qe(w);
    Eigen::MatrixXd want = 4.0 * w.Qe * w.Qe;  // M = I
    CHECK((d - want).norm() < 1e-12);

    SplitMix64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const double lambda = rng.uniform(0.05, 0.95);
        Eigen::MatrixXd m = random_spd(rng, 3);
        Eigen::MatrixXd q = random_spd(rng, 2);
        MetamorphicWeights wt = qe_weights(lambda, m, q);
        CHECK(min_eigenvalue_sym(derivative_qe(wt)) > 0.0);
    }

    const double delta = 1e-5;
    Eigen::MatrixXd m = random_spd(rng, 3);
    Eigen::MatrixXd q = random_spd(rng, 2);
    Eigen::MatrixXd fd = (qe_weights(0.5 + delta, m, q).Qe - qe_weights(0.5 - delta, m, q).Qe) / (2.0 * delta);
    Eigen::MatrixXd exact = derivative_qe(qe_weights(0.5, m, q));
    CHECK((fd - exact).norm() / exact.norm() < 1e-6);
}

TEST_CASE("are_step_augmented against a hand assembly") {
    ScalarSeed seed;
    MetamorphicWeights w = qe_weights(0.5, seed.M, seed.Q);
    RiccatiIterate phi(Eigen::MatrixXd::Identity(2, 2));
    RiccatiIterate next = are_step_augmented(phi, seed.aug, w, seed.R);

    // Dense evaluation of the augmented ARE with explicit blocks.
    const Eigen::MatrixXd& ae = seed.aug.A_e;
    const Eigen::MatrixXd& ge = seed.aug.G_e;
    const Eigen::MatrixXd& ce = seed.aug.C_e;
    Eigen::MatrixXd s = seed.R + ce * phi.value * ce.transpose();
    Eigen::MatrixXd want = ge * w.Qe * ge.transpose() + ae * phi.value * ae.transpose() -
                           ae * phi.value * ce.transpose() * s.inverse() * ce * phi.value * ae.transpose();
    CHECK((next.value - want).norm() < 1e-12);

    RiccatiIterate zero(Eigen::MatrixXd::Zero(2, 2));
    RiccatiIterate from_zero = are_step_augmented(zero, seed.aug, w, seed.R);
    CHECK((from_zero.value - ge * w.Qe * ge.transpose()).norm() < 1e-12);
    CHECK((next.value - next.value.transpose()).norm() < 1e-12);
}

TEST_CASE("steady_state scalar golden ratio") {
    auto step_fn = [](const Eigen::MatrixXd& p) {
        return are_step(RiccatiIterate(p), mat1(1.0), mat1(1.0), mat1(1.0), mat1(1.0), mat1(1.0)).value;
    };
    SteadyStateResult ss = steady_state(step_fn, mat1(1.0), 1e-14);
    const double golden = 0.5 * (1.0 + std::sqrt(5.0));
    CHECK(std::abs(ss.value.value(0, 0) - golden) < 1e-10);

    // One further step moves the fixed point by at most 10 tol.
    CHECK(std::abs(step_fn(ss.value.value)(0, 0) - ss.value.value(0, 0)) < 1e-13);
}

TEST_CASE("steady_state memoryless convergence") {
    auto step_fn = [](const Eigen::MatrixXd& p) {
        return are_step(RiccatiIterate(p), mat1(0.0), mat1(1.0), mat1(1.0), mat1(2.0), mat1(1.0)).value;
    };
    SteadyStateResult ss = steady_state(step_fn, mat1(5.0), 1e-14);
    CHECK(std::abs(ss.value.value(0, 0) - 2.0) < 1e-13);
    CHECK(ss.iterations <= 2);
}

TEST_CASE("steady_state augmented vehicle residual") {
    ExperimentSpec vehicle = vehicle_scenario();
    ObserverGain obs(vehicle.plant.A, vehicle.plant.C, vehicle.L);
    AugmentedPlant aug = augment(vehicle.plant, obs);
    MetamorphicWeights w = qe_weights(0.5, vehicle.M, vehicle.Q);
    auto step_fn = [&](const Eigen::MatrixXd& p) {
        return are_step_augmented(RiccatiIterate(p), aug, w, vehicle.R).value;
    };
    SteadyStateResult ss = steady_state(step_fn, Eigen::MatrixXd::Identity(8, 8), 1e-13);
    CHECK((step_fn(ss.value.value) - ss.value.value).norm() < 1e-9);
}

TEST_CASE("metamorphic_kalman_gain") {
    ScalarSeed seed;
    RiccatiIterate zero(Eigen::MatrixXd::Zero(2, 2));
    CHECK(metamorphic_kalman_gain(zero, seed.aug, seed.R).isZero(0.0));

    RiccatiIterate phi(Eigen::MatrixXd::Identity(2, 2));
    Eigen::MatrixXd gain = metamorphic_kalman_gain(phi, seed.aug, seed.R);
    Eigen::MatrixXd s = seed.R + seed.aug.C_e * phi.value * seed.aug.C_e.transpose();
    Eigen::MatrixXd want = seed.aug.A_e * phi.value * seed.aug.C_e.transpose() * s.inverse();
    CHECK((gain - want).norm() < 1e-14);

    // Stationary gain closes the loop.
    MetamorphicWeights w = qe_weights(0.5, seed.M, seed.Q);
    auto step_fn = [&](const Eigen::MatrixXd& p) {
        return are_step_augmented(RiccatiIterate(p), seed.aug, w, seed.R).value;
    };
    SteadyStateResult ss = steady_state(step_fn, Eigen::MatrixXd::Identity(2, 2), 1e-13);
    Eigen::MatrixXd le = metamorphic_kalman_gain(ss.value, seed.aug, seed.R);
    CHECK(check_schur(seed.aug.A_e - le * seed.aug.C_e).is_schur);
}

TEST_CASE("phi monotonicity report on the scalar seed plant") {
    ScalarSeed seed;
    std::vector<double> grid;
    for (int i = 1; i <= 9; ++i) grid.push_back(0.1 * i);
    PhiMonotonicityReport report = phi_monotonicity_report(
        seed.plant, seed.obs, seed.M, seed.Q, seed.R, 10.0 * Eigen::MatrixXd::Identity(2, 2), grid, 50);
    CHECK(report.pass);
    for (const auto& row : report.rows)
        if (row.k == 0) CHECK(row.min_eig_diff == 0.0);

    const std::string csv = report.to_csv();
    CHECK(csv.rfind("lambda_low,lambda_high,k,min_eig_diff,pass\n", 0) == 0);
}

TEST_CASE("phi monotonicity corollary mode is strict") {
    // 2-state system with square nonsingular G and L.
    Eigen::MatrixXd a(2, 2);
    a << 0.8, 0.2, -0.1, 0.6;
    Eigen::MatrixXd g(2, 2);
    g << 1.0, 0.2, 0.0, 0.9;
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(2, 2);
    LinearPlant plant(a, g, c);
    Eigen::MatrixXd l(2, 2);
    l << 0.4, 0.1, 0.05, 0.3;
    ObserverGain obs(a, c, l);

    PhiMonotonicityReport report = phi_steady_monotonicity_report(
        plant, obs, Eigen::MatrixXd::Identity(4, 4), Eigen::MatrixXd::Identity(2, 2),
        Eigen::MatrixXd::Identity(2, 2), {0.2, 0.4, 0.6, 0.8});
    CHECK(report.pass);
    for (const auto& row : report.rows) CHECK(row.min_eig_diff >= 1e-12);
}

TEST_CASE("first-step derivative identity") {
    // dPhi_1/dlambda equals G_e dQe/dlambda G_e' when Phi_0 is lambda free.
    ScalarSeed seed;
    const double lambda = 0.5, delta = 1e-5;
    Eigen::MatrixXd phi0 = 10.0 * Eigen::MatrixXd::Identity(2, 2);
    auto phi1 = [&](double lam) {
        MetamorphicWeights w = qe_weights(lam, seed.M, seed.Q);
        return are_step_augmented(RiccatiIterate(phi0), seed.aug, w, seed.R).value;
    };
    Eigen::MatrixXd fd = (phi1(lambda + delta) - phi1(lambda - delta)) / (2.0 * delta);
    Eigen::MatrixXd want =
        seed.aug.G_e * derivative_qe(qe_weights(lambda, seed.M, seed.Q)) * seed.aug.G_e.transpose();
    CHECK((fd - want).norm() / want.norm() < 1e-5);
}

TEST_CASE("iterates stay positive under the invertibility conditions") {
    SplitMix64 rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index n = 2;
        Eigen::MatrixXd a(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.normal();
        a *= 0.8 / std::max(1e-9, spectral_radius(a));
        Eigen::MatrixXd g = random_spd(rng, n, 0.5);  // nonsingular G
        Eigen::MatrixXd c = Eigen::MatrixXd::Identity(n, n);
        Eigen::MatrixXd l = 0.2 * random_spd(rng, n, 0.5);  // nonsingular L
        if (!check_schur(a - l * c).is_schur) continue;
        LinearPlant plant(a, g, c);
        ObserverGain obs(a, c, l);
        AugmentedPlant aug = augment(plant, obs);
        const double lambda = rng.uniform(0.1, 0.9);
        MetamorphicWeights w = qe_weights(lambda, random_spd(rng, 2 * n, 0.5), random_spd(rng, n, 0.5));
        Eigen::MatrixXd r = random_spd(rng, n, 0.5);

        RiccatiIterate phi(random_spd(rng, 2 * n, 0.5));
        for (int k = 0; k < 200; ++k) {
            phi = are_step_augmented(phi, aug, w, r);
            REQUIRE(min_eigenvalue_sym(phi.value) > 0.0);
        }
    }
}

TEST_CASE("iterates stay symmetric PSD for any lambda") {
    ScalarSeed seed;
    SplitMix64 rng(31);
    for (double lambda : {0.05, 0.3, 0.6, 0.95}) {
        MetamorphicWeights w = qe_weights(lambda, seed.M, seed.Q);
        RiccatiIterate phi(random_spd(rng, 2, 0.1));
        for (int k = 0; k < 100; ++k) {
            phi = are_step_augmented(phi, seed.aug, w, seed.R);
            REQUIRE((phi.value - phi.value.transpose()).norm() < 1e-12);
            REQUIRE(min_eigenvalue_sym(phi.value) > -1e-12);
        }
    }
}

TEST_CASE("are_step reports singular innovation") {
    // R = 0 and C = 0 makes the innovation covariance singular.
    RiccatiIterate p(mat1(1.0));
    CHECK_THROWS(are_step(p, mat1(1.0), mat1(0.0), mat1(1.0), mat1(1.0), mat1(0.0)));
}

}  // TEST_SUITE
