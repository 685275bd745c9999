#pragma once

#include <Eigen/Dense>

namespace mmhe {

// Axis-aligned interval set [lower, upper]. Stands in for the compact convex
// sets the estimators constrain against; a C-set additionally contains the
// origin in the interior of every component interval.
struct Box {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    Box() = default;
    Box(Eigen::VectorXd lo, Eigen::VectorXd hi);

    Eigen::Index dim() const { return lower.size(); }

    // Symmetric box [-radius, radius] componentwise.
    static Box centered(const Eigen::VectorXd& radius);
    // Cube [-r, r]^d.
    static Box cube(Eigen::Index d, double r);

    Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
    Eigen::VectorXd halfwidth() const { return 0.5 * (upper - lower); }

    bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
    bool contains_box(const Box& other, double tol = 0.0) const;
    // Origin strictly inside every component interval.
    bool is_cset() const;

    Box cartesian_product(const Box& other) const;
};

// Interval hull of {M x : x in box}; tight componentwise.
Box linear_image(const Eigen::MatrixXd& m, const Box& box);

Box minkowski_sum(const Box& a, const Box& b);

// Outer box approximation of the minimal robust positively invariant set of
// e+ = A_L e + q, q in q_box: iterates S <- hull(A_L S) (+) q_box from {0}
// until the per-iteration growth drops below tol, then inflates by the
// geometric tail bound. The returned box E satisfies
// linear_image(A_L, E) (+) q_box  subset of  E (verified before returning).
Box rpi_box_outer(const Eigen::MatrixXd& a_l, const Box& q_box, double tol = 1e-9,
                  int max_iter = 10000);

}  // namespace mmhe
