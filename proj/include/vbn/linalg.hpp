#pragma once

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <utility>

#include "vbn/bundle.hpp"
#include "vbn/connection.hpp"
#include "vbn/tangent_basis.hpp"
#include "vbn/types.hpp"

namespace vbn {

/// Condition number beyond which the reduced Newton matrix is treated as
/// singular. This is the point where the invertibility assumption of the
/// local convergence theory has failed numerically.
inline constexpr double kSingularCondition = 1e12;

/// Newton operator Q_{F(x)} o F'(x), materialized as a dense matrix on
/// orthonormal tangent/fibre bases. The factorization is retained so the
/// simplified Newton direction at the same x reuses it.
struct NewtonOperator {
    Point x;
    TangentBasis basis;        // of T_x(domain)
    TangentBasis fibre_basis;  // of the fibre over y(x); unused for trivial kind
    Matrix reduced;
    double condition = std::numeric_limits<double>::infinity();
    Eigen::PartialPivLU<Matrix> lu;  // valid when reduced is square

    [[nodiscard]] int dim() const { return static_cast<int>(reduced.cols()); }
};

/// Coordinates of a canonical fibre value over y(x) in the operator's fibre
/// basis.
inline Vector reduce_fibre(const NewtonProblem& pb, const NewtonOperator& op,
                           const Vector& value) {
    if (pb.kind == BundleKind::Trivial) return value;
    return Vector(op.fibre_basis.columns.transpose() * value);
}

/// The Newton equation in reduced coordinates: matrix z = rhs, with
/// matrix[i][j] the pairing of fibre basis vector i against the operator
/// applied to tangent basis vector j.
struct ReducedSystem {
    Matrix matrix;
    Vector rhs;
    double condition_estimate = std::numeric_limits<double>::infinity();
};

inline ReducedSystem reduced_system(const NewtonProblem& pb, const NewtonOperator& op,
                                    const FibreElement& b) {
    return ReducedSystem{op.reduced, Vector(-reduce_fibre(pb, op, b.value)), op.condition};
}

inline TangentVector expand_direction(const NewtonOperator& op, const Vector& reduced_coords) {
    return TangentVector(op.x, Vector(op.basis.columns * reduced_coords));
}

/// Assembles the reduced Newton matrix at x. Column j is the covariant
/// derivative of F along the j-th tangent basis vector.
inline NewtonOperator newton_operator(const NewtonProblem& pb, const ConnectionMap& q,
                                      const Point& x) {
    NewtonOperator op;
    op.x = x;
    op.basis = tangent_basis(pb.domain, x);
    const Point y = base_point(pb, x);
    const Vector e = pb.fibre_value(x.coords);

    const int d = op.basis.dim();
    Matrix columns(pb.fibre_dim, d);
    for (int j = 0; j < d; ++j) {
        const TangentVector dir(x, Vector(op.basis.columns.col(j)));
        const Vector fd = pb.ambient_derivative(x.coords, dir.vec);
        columns.col(j) = connection_apply(q, pb, x, dir, fd, &e).value;
    }

    if (pb.kind == BundleKind::Trivial) {
        op.reduced = columns;
    } else {
        op.fibre_basis = same_point(y, x) ? op.basis : tangent_basis(pb.base, y);
        op.reduced = op.fibre_basis.columns.transpose() * columns;
    }

    Eigen::JacobiSVD<Matrix> svd(op.reduced);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    op.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (op.reduced.rows() == op.reduced.cols()) op.lu.compute(op.reduced);
    return op;
}

/// Solves reduced * z = rhs with the stored factorization plus iterative
/// refinement; the relative residual must reach 1e-10.
inline Vector solve_reduced(const NewtonOperator& op, const Vector& rhs) {
    if (op.reduced.rows() != op.reduced.cols())
        throw SingularNewtonOperator("reduced Newton system is not square");
    if (!std::isfinite(op.condition) || op.condition > kSingularCondition)
        throw SingularNewtonOperator("reduced Newton matrix condition " +
                                     std::to_string(op.condition));
    const double nb = rhs.norm();
    Vector z = op.lu.solve(rhs);
    if (nb == 0.0) return z;
    for (int sweep = 0; sweep < 3; ++sweep) {
        const Vector r = rhs - op.reduced * z;
        if (r.norm() <= 1e-10 * nb) return z;
        z += op.lu.solve(r);
    }
    if ((rhs - op.reduced * z).norm() <= 1e-10 * nb) return z;
    throw SingularNewtonOperator("reduced solve residual did not reach 1e-10 relative");
}

/// Newton direction from op(dx) + b = 0 for a fibre element b over y(x).
inline TangentVector solve_newton_system(const NewtonProblem& pb, const NewtonOperator& op,
                                         const FibreElement& b) {
    return expand_direction(op, solve_reduced(op, reduced_system(pb, op, b).rhs));
}

}  // namespace vbn
