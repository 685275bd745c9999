#include <doctest.h>

#include <Eigen/Dense>

#include "mmhe/json_io.hpp"
#include "mmhe/rng.hpp"
#include "mmhe/setops.hpp"

using namespace mmhe;

namespace {

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }

}  // namespace

TEST_SUITE("setops") {

TEST_CASE("box construction and invariants") {
    CHECK_THROWS(Box(vec1(1.0), vec1(-1.0)));
    Box b = Box::cube(2, 1.0);
    CHECK(b.is_cset());
    CHECK(b.contains(Eigen::VectorXd::Zero(2)));
    CHECK_FALSE(Box(Eigen::VectorXd::Zero(1), vec1(1.0)).is_cset());
}

TEST_CASE("linear_image examples") {
    Box square = Box::cube(2, 1.0);
    Box sum = linear_image(Eigen::MatrixXd{{1.0, 1.0}}, square);
    CHECK(sum.lower[0] == doctest::Approx(-2.0));
    CHECK(sum.upper[0] == doctest::Approx(2.0));

    Box same = linear_image(Eigen::MatrixXd::Identity(2, 2), square);
    CHECK(same.lower == square.lower);
    CHECK(same.upper == square.upper);

    Eigen::MatrixXd scale(2, 2);
    scale << 2, 0, 0, -3;
    Box scaled = linear_image(scale, square);
    CHECK(scaled.lower[0] == doctest::Approx(-2.0));
    CHECK(scaled.upper[0] == doctest::Approx(2.0));
    CHECK(scaled.lower[1] == doctest::Approx(-3.0));
    CHECK(scaled.upper[1] == doctest::Approx(3.0));
}

TEST_CASE("linear_image is the tight interval hull") {
    // Vertex enumeration oracle on random 2x2 maps.
    SplitMix64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::MatrixXd m(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) m(i, j) = rng.uniform(-2.0, 2.0);
        Box b(Eigen::Vector2d(rng.uniform(-2.0, -0.1), rng.uniform(-2.0, -0.1)),
              Eigen::Vector2d(rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)));
        Box img = linear_image(m, b);
        Eigen::Vector2d lo = Eigen::Vector2d::Constant(1e100), hi = Eigen::Vector2d::Constant(-1e100);
        for (int mask = 0; mask < 4; ++mask) {
            Eigen::Vector2d v((mask & 1) ? b.upper[0] : b.lower[0], (mask & 2) ? b.upper[1] : b.lower[1]);
            Eigen::Vector2d y = m * v;
            lo = lo.cwiseMin(y);
            hi = hi.cwiseMax(y);
        }
        CHECK((img.lower - lo).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((img.upper - hi).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("minkowski_sum examples") {
    Box a = Box::cube(1, 1.0);
    Box b = Box::cube(1, 2.0);
    Box s = minkowski_sum(a, b);
    CHECK(s.lower[0] == doctest::Approx(-3.0));
    CHECK(s.upper[0] == doctest::Approx(3.0));

    Box zero(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
    Box same = minkowski_sum(a, zero);
    CHECK(same.lower == a.lower);
    CHECK(same.upper == a.upper);

    // Disturbance set of the scalar pre-estimator error dynamics.
    Box w = Box::cube(1, 0.1);
    Box v = Box::cube(1, 0.25);
    Box q = minkowski_sum(linear_image(Eigen::MatrixXd::Constant(1, 1, 1.0), w),
                          linear_image(Eigen::MatrixXd::Constant(1, 1, -0.5), v));
    CHECK(q.lower[0] == doctest::Approx(-0.225));
    CHECK(q.upper[0] == doctest::Approx(0.225));
}

TEST_CASE("rpi_box_outer scalar geometric series") {
    Box e = rpi_box_outer(Eigen::MatrixXd::Constant(1, 1, 0.5), Box::cube(1, 1.0), 1e-6);
    CHECK(e.upper[0] >= 2.0);
    CHECK(e.upper[0] <= 2.0 + 1e-5);
    CHECK(e.lower[0] <= -2.0);
    CHECK(e.lower[0] >= -2.0 - 1e-5);
}

TEST_CASE("rpi_box_outer nilpotent map returns the disturbance box") {
    Box q = Box(Eigen::Vector2d(-1.0, -0.5), Eigen::Vector2d(2.0, 0.5));
    Box e = rpi_box_outer(Eigen::MatrixXd::Zero(2, 2), q, 1e-9);
    CHECK((e.lower - q.lower).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((e.upper - q.upper).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rpi_box_outer diagonal case") {
    Eigen::MatrixXd a(2, 2);
    a << 0.5, 0, 0, 0.25;
    Box e = rpi_box_outer(a, Box::cube(2, 1.0), 1e-9);
    CHECK(e.upper[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(e.upper[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("rpi_box_outer rejects unstable maps") {
    CHECK_THROWS(rpi_box_outer(Eigen::MatrixXd::Constant(1, 1, 1.0), Box::cube(1, 1.0), 1e-9));
}

TEST_CASE("rpi invariance certificate and monotonicity") {
    SplitMix64 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.next_u64() % 3);
        Eigen::MatrixXd a(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.uniform(-0.5, 0.5);
        // keep the componentwise iteration contractive
        const double rowsum = a.cwiseAbs().rowwise().sum().maxCoeff();
        if (rowsum >= 0.95) a *= 0.9 / rowsum;
        Eigen::VectorXd radius(n);
        for (Eigen::Index i = 0; i < n; ++i) radius[i] = rng.uniform(0.1, 2.0);
        Box q = Box::centered(radius);

        Box e = rpi_box_outer(a, q, 1e-10);
        Box image = minkowski_sum(linear_image(a, e), q);
        CHECK(e.contains_box(image, 1e-12));

        Box q_bigger = Box::centered(radius * 1.5);
        Box e_bigger = rpi_box_outer(a, q_bigger, 1e-10);
        CHECK(e_bigger.contains_box(e, 1e-9));
    }
}

TEST_CASE("C-set closure under sums and full-row-rank images") {
    SplitMix64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        Eigen::VectorXd r1(2), r2(2);
        for (int i = 0; i < 2; ++i) {
            r1[i] = rng.uniform(0.1, 1.0);
            r2[i] = rng.uniform(0.1, 1.0);
        }
        Box a = Box::centered(r1);
        Box b = Box::centered(r2);
        CHECK(minkowski_sum(a, b).is_cset());

        Eigen::MatrixXd m(1, 2);  // full row rank almost surely
        m << rng.uniform(0.2, 1.0), rng.uniform(-1.0, -0.2);
        CHECK(linear_image(m, a).is_cset());
    }
}

TEST_CASE("box JSON round trip") {
    Box b(Eigen::Vector2d(-1.5, -2.0), Eigen::Vector2d(0.5, 3.0));
    Box back = box_from_json(nlohmann::json::parse(box_to_json(b).dump()));
    CHECK(back.lower == b.lower);
    CHECK(back.upper == b.upper);
}

}  // TEST_SUITE
