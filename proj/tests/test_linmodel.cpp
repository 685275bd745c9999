#include <doctest.h>

#include <Eigen/Dense>

#include "mmhe/bench.hpp"
#include "mmhe/json_io.hpp"
#include "mmhe/linmodel.hpp"
#include "mmhe/matutil.hpp"
#include "mmhe/riccati.hpp"
#include "mmhe/rng.hpp"

using namespace mmhe;

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
    Eigen::MatrixXd m(2, 2);
    m << a, b, c, d;
    return m;
}

// Random system with observable (A, C) and a Schur-stabilizing L. A is drawn
// Schur already, so a small random L keeps the loop stable.
struct RandomSystem {
    Eigen::MatrixXd A, C, L;
};

RandomSystem random_observable_system(SplitMix64& rng, Eigen::Index n, Eigen::Index p) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        Eigen::MatrixXd a(n, n), c(p, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.normal();
        const double rho = spectral_radius(a);
        if (rho > 0.0) a *= 0.9 / rho;
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = 0; j < n; ++j) c(i, j) = rng.normal();
        if (!check_observable(a, c)) continue;
        Eigen::MatrixXd l(n, p);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < p; ++j) l(i, j) = rng.normal();
        double scale = 0.2;
        for (int shrink = 0; shrink < 30; ++shrink, scale *= 0.5) {
            if (check_schur(a - scale * l * c).is_schur) return {a, c, scale * l};
        }
    }
    FAIL("could not draw a random observable system");
    return {};
}

}  // namespace

TEST_SUITE("linmodel") {

TEST_CASE("check_observable basic examples") {
    CHECK(check_observable(mat2(1, 1, 0, 1), Eigen::MatrixXd{{1.0, 0.0}}));
    CHECK_FALSE(check_observable(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd{{1.0, 0.0}}));

    ExperimentSpec vehicle = vehicle_scenario();
    CHECK(check_observable(vehicle.plant.A, vehicle.plant.C));
}

TEST_CASE("check_controllable basic examples") {
    CHECK(check_controllable(mat2(1, 1, 0, 1), Eigen::MatrixXd{{0.0}, {1.0}}));
    CHECK_FALSE(check_controllable(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd{{1.0}, {0.0}}));
}

TEST_CASE("check_controllable on the augmented pair") {
    // Proposition-style property: controllability of (A, G Q^{-1/2}) carries
    // over to (A_e, G_e Qe^{-1/2}) for lambda in (0, 1).
    SplitMix64 rng(42);
    const Eigen::Index n = 3, p = 2, m = 3;
    RandomSystem sys = random_observable_system(rng, n, p);
    Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, m);
    LinearPlant plant(sys.A, g, sys.C);
    REQUIRE(check_controllable(sys.A, g));
    ObserverGain obs(sys.A, sys.C, sys.L);
    AugmentedPlant aug = augment(plant, obs);

    Eigen::MatrixXd mw = Eigen::MatrixXd::Identity(m + p, m + p);
    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(m, m);
    for (double lambda : {0.1, 0.5, 0.9}) {
        MetamorphicWeights w = qe_weights(lambda, mw, q);
        CHECK(check_controllable(aug.A_e, aug.G_e * spd_inv_sqrt(w.Qe)));
    }
}

TEST_CASE("check_schur examples") {
    auto scalar = check_schur(Eigen::MatrixXd::Constant(1, 1, 0.5));
    CHECK(scalar.rho == doctest::Approx(0.5));
    CHECK(scalar.is_schur);

    auto rotation = check_schur(mat2(0, 1, -1, 0));
    CHECK(rotation.rho == doctest::Approx(1.0));
    CHECK_FALSE(rotation.is_schur);
}

TEST_CASE("vehicle pre-estimator matches the reference eigenvalue set") {
    ExperimentSpec vehicle = vehicle_scenario();
    ObserverGain obs(vehicle.plant.A, vehicle.plant.C, vehicle.L);
    auto eigs = sorted_eigenvalues(obs.A_L);
    std::vector<std::complex<double>> want = {
        {0.1419, -0.0236}, {0.1419, 0.0236}, {0.1519, 0.0}, {0.6015, 0.0}};
    std::sort(want.begin(), want.end(), [](auto x, auto y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
    REQUIRE(eigs.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(eigs[i] - want[i]) < 1e-3);
    CHECK(obs.rho == doctest::Approx(0.6015).epsilon(1e-3));
}

TEST_CASE("place_poles scalar and chain examples") {
    ObserverGain scalar = place_poles(Eigen::MatrixXd::Constant(1, 1, 1.0),
                                      Eigen::MatrixXd::Constant(1, 1, 1.0), {{0.5, 0.0}});
    CHECK(scalar.L(0, 0) == doctest::Approx(0.5).epsilon(1e-9));

    ObserverGain chain = place_poles(mat2(1, 1, 0, 1), Eigen::MatrixXd{{1.0, 0.0}},
                                     {{0.5, 0.0}, {0.4, 0.0}});
    auto eigs = sorted_eigenvalues(chain.A_L);
    CHECK(std::abs(eigs[0] - std::complex<double>(0.4, 0.0)) < 1e-6);
    CHECK(std::abs(eigs[1] - std::complex<double>(0.5, 0.0)) < 1e-6);
}

TEST_CASE("place_poles rejects bad inputs") {
    CHECK_THROWS(place_poles(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd{{1.0, 0.0}},
                             {{0.5, 0.0}, {0.4, 0.0}}));  // unobservable pair
    CHECK_THROWS(place_poles(mat2(1, 1, 0, 1), Eigen::MatrixXd{{1.0, 0.0}},
                             {{1.5, 0.0}, {0.4, 0.0}}));  // modulus >= 1
}

TEST_CASE("place_poles reproduces random spectra") {
    SplitMix64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.next_u64() % 3);
        RandomSystem sys = random_observable_system(rng, n, 2);
        std::vector<std::complex<double>> targets;
        Eigen::Index left = n;
        while (left > 0) {
            if (left >= 2 && rng.uniform01() < 0.4) {
                const double re = rng.uniform(-0.6, 0.6);
                const double im = rng.uniform(0.05, 0.5);
                targets.push_back({re, im});
                targets.push_back({re, -im});
                left -= 2;
            } else {
                targets.push_back({rng.uniform(-0.8, 0.8), 0.0});
                left -= 1;
            }
        }
        ObserverGain obs = place_poles(sys.A, sys.C, targets);
        auto got = sorted_eigenvalues(obs.A_L);
        std::sort(targets.begin(), targets.end(), [](auto x, auto y) {
            if (x.real() != y.real()) return x.real() < y.real();
            return x.imag() < y.imag();
        });
        for (Eigen::Index i = 0; i < n; ++i)
            CHECK(std::abs(got[static_cast<std::size_t>(i)] - targets[static_cast<std::size_t>(i)]) < 1e-6);
    }
}

TEST_CASE("augment block structure") {
    ExperimentSpec vehicle = vehicle_scenario();
    ObserverGain obs(vehicle.plant.A, vehicle.plant.C, vehicle.L);
    AugmentedPlant aug = augment(vehicle.plant, obs);

    CHECK(aug.A_e.rows() == 8);
    CHECK(aug.A_e.cols() == 8);
    CHECK(aug.G_e.rows() == 8);
    CHECK(aug.G_e.cols() == 7);
    CHECK(aug.C_e.rows() == 3);
    CHECK(aug.C_e.cols() == 8);

    CHECK(aug.A_e.bottomLeftCorner(4, 4).isZero(0.0));
    CHECK(aug.A_e.topLeftCorner(4, 4) == vehicle.plant.A);
    CHECK(aug.A_e.bottomRightCorner(4, 4) == obs.A_L);
    CHECK(aug.C_e.leftCols(4) == vehicle.plant.C);
    CHECK(aug.C_e.rightCols(4) == vehicle.plant.C);

    // Block triangularity: spectrum of A_e is the union of the diagonal blocks'.
    auto eig_ae = sorted_eigenvalues(aug.A_e);
    auto eig_a = sorted_eigenvalues(vehicle.plant.A);
    auto eig_al = sorted_eigenvalues(obs.A_L);
    std::vector<std::complex<double>> joined = eig_a;
    joined.insert(joined.end(), eig_al.begin(), eig_al.end());
    std::sort(joined.begin(), joined.end(), [](auto x, auto y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
    for (std::size_t i = 0; i < joined.size(); ++i) CHECK(std::abs(eig_ae[i] - joined[i]) < 1e-8);
}

TEST_CASE("augment is pure") {
    ExperimentSpec vehicle = vehicle_scenario();
    ObserverGain obs(vehicle.plant.A, vehicle.plant.C, vehicle.L);
    AugmentedPlant a1 = augment(vehicle.plant, obs);
    AugmentedPlant a2 = augment(vehicle.plant, obs);
    CHECK(a1.A_e == a2.A_e);
    CHECK(a1.G_e == a2.G_e);
    CHECK(a1.C_e == a2.C_e);
}

TEST_CASE("augmented observability") {
    LinearPlant scalar(Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Constant(1, 1, 1.0),
                       Eigen::MatrixXd::Constant(1, 1, 1.0));
    ObserverGain obs(scalar.A, scalar.C, Eigen::MatrixXd::Constant(1, 1, 0.5));
    CHECK(check_augmented_observability(augment(scalar, obs)));

    ExperimentSpec vehicle = vehicle_scenario();
    ObserverGain vobs(vehicle.plant.A, vehicle.plant.C, vehicle.L);
    CHECK(check_augmented_observability(augment(vehicle.plant, vobs)));

    // Zero output map on a stable plant: nothing is observable.
    LinearPlant blind(0.5 * Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2),
                      Eigen::MatrixXd::Zero(1, 2));
    ObserverGain blind_obs(blind.A, blind.C, Eigen::MatrixXd::Zero(2, 1));
    CHECK_FALSE(check_augmented_observability(augment(blind, blind_obs)));
}

TEST_CASE("augmented observability holds across random stabilized systems") {
    SplitMix64 rng(1234);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.next_u64() % 6);
        const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.next_u64() % 2);
        RandomSystem sys = random_observable_system(rng, n, p);
        LinearPlant plant(sys.A, Eigen::MatrixXd::Identity(n, n), sys.C);
        ObserverGain obs(sys.A, sys.C, sys.L);
        CHECK(check_augmented_observability(augment(plant, obs)));
    }
}

TEST_CASE("observer gain construction rejects unstable loops") {
    CHECK_THROWS(ObserverGain(mat2(1.2, 0, 0, 1.2), Eigen::MatrixXd{{1.0, 0.0}}, Eigen::MatrixXd::Zero(2, 1)));
}

TEST_CASE("model JSON round trip") {
    ExperimentSpec vehicle = vehicle_scenario();
    ModelDocument doc;
    doc.plant = vehicle.plant;
    doc.weights = NoiseWeights(vehicle.Q, vehicle.R);
    doc.L = vehicle.L;

    nlohmann::json j = nlohmann::json::parse(model_to_json(doc).dump());
    ModelDocument back = model_from_json(j);
    CHECK(back.plant.A == doc.plant.A);
    CHECK(back.plant.G == doc.plant.G);
    CHECK(back.plant.C == doc.plant.C);
    CHECK_FALSE(back.plant.has_control());
    CHECK(back.weights->Q == doc.weights->Q);
    CHECK(back.weights->R == doc.weights->R);
    CHECK(*back.L == *doc.L);
}

}  // TEST_SUITE
