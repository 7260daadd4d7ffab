#pragma once

#include <vector>

#include "vbn/bundle.hpp"
#include "vbn/connection.hpp"
#include "vbn/linalg.hpp"
#include "vbn/solver.hpp"
#include "vbn/types.hpp"

namespace vbn {

/// Residual of the Newton path equation at damping lambda:
///   | V^{-1}_{y(x0)}(y(x)) F(x) - (1 - lambda) F(x0) |.
/// Zero exactly when x solves the path problem at lambda.
inline double newton_path_residual(const NewtonProblem& pb, TransportKind transport,
                                   const Point& x0, const Point& x, double lambda) {
    const FibreElement f0 = evaluate(pb, x0);
    const FibreElement fx = evaluate(pb, x);
    const Vector pulled = back_transport_fibre(pb, f0.base_y, fx.base_y, fx.value, transport);
    return (pulled - (1.0 - lambda) * f0.value).norm();
}

/// First Newton direction of the path problem at x0: the operator is the
/// derivative of the back-transported section (the connection consistent
/// with the transport), the right-hand side is lambda F(x0). With a
/// consistent solver pairing this equals lambda times the Newton direction.
inline TangentVector path_first_direction(const NewtonProblem& pb, TransportKind transport,
                                          const Point& x0, double lambda) {
    const ConnectionMap q = consistent_connection(transport, pb.kind);
    const NewtonOperator op = newton_operator(pb, q, x0);
    const FibreElement f0 = evaluate(pb, x0);
    const Vector rhs = -lambda * reduce_fibre(pb, op, f0.value);
    return expand_direction(op, solve_reduced(op, rhs));
}

namespace detail {

/// Operator of the path problem anchored at y0: the derivative of the
/// back-transported section z -> V^{-1}_{y0}(y(z)) F(z), assembled by
/// central differences on the tangent basis at z. At z = x0 this is the
/// transport-consistent Newton operator; away from x0 it is the linearized
/// path equation itself.
inline Matrix anchored_path_operator(const NewtonProblem& pb, TransportKind transport,
                                     const Point& y0, const TangentBasis& fibre_basis0,
                                     const Point& z, const TangentBasis& basis_z,
                                     double h = 1e-6) {
    const int d = basis_z.dim();
    Matrix out(fibre_basis0.dim() > 0 ? fibre_basis0.dim() : pb.fibre_dim, d);
    for (int j = 0; j < d; ++j) {
        auto pulled = [&](double t) {
            const Vector step = t * basis_z.columns.col(j);
            const Point xi = retract(pb.domain, z, TangentVector(z, step));
            const FibreElement fe = evaluate(pb, xi);
            return back_transport_fibre(pb, y0, fe.base_y, fe.value, transport);
        };
        const Vector col = (pulled(h) - pulled(-h)) / (2.0 * h);
        out.col(j) = pb.kind == BundleKind::Trivial
                         ? col
                         : Vector(fibre_basis0.columns.transpose() * col);
    }
    return out;
}

}  // namespace detail

/// Integrates the differential equation of the Newton path: the trajectory
/// along which the back-transported residual decays linearly to zero,
///   d/dlambda [ V^{-1}_{y(x0)} F(x(lambda)) ] = -F(x0),  x(0) = x0.
/// The operator is fully determined by the back-transport (see
/// anchored_path_operator), so no connection argument appears. Each step
/// runs classical RK4 in the tangent chart at the current point (state
/// updates through the retraction), which keeps the fourth order of the
/// scheme on the manifold. The endpoint approximates a zero of F; for
/// affine problems it reproduces the one-shot Newton solution up to
/// integrator error.
inline std::vector<Point> integrate_differential_newton_path(const NewtonProblem& pb,
                                                             TransportKind transport,
                                                             const Point& x0, int steps) {
    if (steps < 1) throw InvalidConfig("integrate_differential_newton_path: steps must be >= 1");
    check_point(pb.domain, x0, "path integration start");
    const FibreElement f0 = evaluate(pb, x0);
    const Point y0 = f0.base_y;
    const TangentBasis fibre_basis0 =
        pb.kind == BundleKind::Trivial ? TangentBasis{} : tangent_basis(pb.base, y0);
    const Vector rhs0 = pb.kind == BundleKind::Trivial
                            ? Vector(-f0.value)
                            : Vector(-(fibre_basis0.columns.transpose() * f0.value));

    std::vector<Point> trajectory;
    trajectory.reserve(static_cast<size_t>(steps) + 1);
    trajectory.push_back(x0);
    Point x = x0;
    const double h = 1.0 / steps;
    for (int s = 0; s < steps; ++s) {
        const TangentBasis basis = tangent_basis(pb.domain, x);
        const int d = basis.dim();
        // chart vector field: u in T_x (reduced), du/dlambda from the path
        // equation at z = R_x(u), mapped back through the chart derivative
        auto field = [&](const Vector& u) {
            const Vector ambient_u = basis.columns * u;
            const Point z = retract(pb.domain, x, TangentVector(x, ambient_u));
            const TangentBasis basis_z = tangent_basis(pb.domain, z);
            const Matrix m =
                detail::anchored_path_operator(pb, transport, y0, fibre_basis0, z, basis_z);
            if (m.rows() != m.cols())
                throw SingularNewtonOperator("path operator is not square");
            Eigen::JacobiSVD<Matrix> svd(m);
            const double smin = svd.singularValues().minCoeff();
            if (!(smin > 0.0) || svd.singularValues().maxCoeff() / smin > kSingularCondition)
                throw SingularNewtonOperator("path operator singular along the trajectory");
            const Vector xdot_red = m.partialPivLu().solve(rhs0);
            const Vector xdot = basis_z.columns * xdot_red;
            // chart derivative: solve (B_z' J B) udot = B_z' xdot
            const Matrix jac = pb.domain.retraction_jacobian(x.coords, ambient_u);
            const Matrix chart = basis_z.columns.transpose() * jac * basis.columns;
            return Vector(chart.partialPivLu().solve(Vector(basis_z.columns.transpose() * xdot)));
        };
        const Vector zero = Vector::Zero(d);
        const Vector k1 = field(zero);
        const Vector k2 = field(Vector(0.5 * h * k1));
        const Vector k3 = field(Vector(0.5 * h * k2));
        const Vector k4 = field(Vector(h * k3));
        const Vector increment =
            basis.columns * Vector((h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
        x = retract(pb.domain, x, TangentVector(x, increment));
        trajectory.push_back(x);
    }
    return trajectory;
}

}  // namespace vbn
