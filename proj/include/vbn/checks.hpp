#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "vbn/bundle.hpp"
#include "vbn/connection.hpp"
#include "vbn/newton_path.hpp"
#include "vbn/problems.hpp"
#include "vbn/random.hpp"
#include "vbn/solver.hpp"
#include "vbn/types.hpp"

namespace vbn {

struct CheckResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double bound = 0.0;
};

/// Central finite difference of the back-transported section along a
/// retraction curve: the literal consistency statement the connection must
/// reproduce.
inline Vector fd_covariant_derivative(const NewtonProblem& pb, TransportKind transport,
                                      const Point& x, const TangentVector& dir,
                                      double h = 1e-5) {
    auto pulled = [&](double t) {
        const Vector step = t * dir.vec;
        const Point xi = retract(pb.domain, x, TangentVector(x, step));
        const FibreElement fe = evaluate(pb, xi);
        return back_transport_fibre_from(pb, base_point(pb, x), step, fe.base_y, fe.value,
                                         transport);
    };
    return (pulled(h) - pulled(-h)) / (2.0 * h);
}

/// Relative tangency deviation |path_first_direction - lambda dx| / |lambda dx|.
inline double tangency_deviation(const NewtonProblem& pb, const ConnectionMap& q,
                                 TransportKind transport, const Point& x, double lambda) {
    const TangentVector dx = newton_direction(pb, q, x);
    const TangentVector first = path_first_direction(pb, transport, x, lambda);
    const double denom = lambda * dx.norm();
    if (denom == 0.0) return 0.0;
    return (first.vec - lambda * dx.vec).norm() / denom;
}

/// Property checks for a configured problem at a start point: geometry
/// axioms, fibre coherence, connection linearity, transport/connection
/// consistency, and tangency of the damped step.
inline std::vector<CheckResult> run_checks(const ProblemInstance& inst, const Point& x,
                                           unsigned seed = 11, int num_dirs = 5) {
    const NewtonProblem& pb = inst.problem;
    const Manifold& m = pb.domain;
    std::mt19937 rng(seed);
    std::vector<CheckResult> results;
    auto push = [&results](const std::string& name, double measured, double bound) {
        results.push_back(CheckResult{name, measured <= bound, measured, bound});
    };

    push("membership", m.membership(x.coords), m.membership_tol);

    const Matrix p = m.projector(x.coords);
    push("projector idempotent", (p * p - p).norm(), 1e-10);
    push("projector symmetric", (p - p.transpose()).norm(), 1e-10);
    push("projector rank (trace)", std::abs(p.trace() - m.intrinsic_dim), 1e-10);

    {
        const Vector zero = Vector::Zero(m.ambient_dim);
        const Vector back = m.retract(x.coords, zero);
        push("retraction fixes base", (back - x.coords).norm(), 0.0);
        double worst = 0.0;
        for (int i = 0; i < num_dirs; ++i) {
            const TangentVector v = random_tangent(rng, m, x);
            const double t = 1e-6;
            const Vector fd =
                (m.retract(x.coords, t * v.vec) - m.retract(x.coords, -t * v.vec)) / (2.0 * t);
            worst = std::max(worst, (fd - v.vec).norm());
        }
        push("retraction derivative is identity", worst, 1e-6);
    }

    {
        const FibreElement fe = evaluate(pb, x);
        push("base coherence", (fe.base_y.coords - base_point(pb, x).coords).norm(),
             m.membership_tol);
    }

    {
        // linearity of the covariant derivative in the direction
        const TangentVector u = random_tangent(rng, m, x);
        const TangentVector v = random_tangent(rng, m, x);
        const double alpha = 0.7, beta = -1.3;
        const Vector e = pb.fibre_value(x.coords);
        auto apply = [&](const Vector& d) {
            return connection_apply(inst.connection, pb, x, TangentVector(x, d),
                                    pb.ambient_derivative(x.coords, d), &e)
                .value;
        };
        const Vector lhs = apply(alpha * u.vec + beta * v.vec);
        const Vector rhs = alpha * apply(u.vec) + beta * apply(v.vec);
        const double scale = 1.0 + lhs.norm() + rhs.norm();
        push("connection linearity", (lhs - rhs).norm() / scale, 1e-12);
    }

    {
        double worst = 0.0;
        for (int i = 0; i < num_dirs; ++i) {
            const TangentVector dir = random_tangent(rng, m, x);
            const Vector fd = fd_covariant_derivative(pb, inst.transport, x, dir);
            const Vector qv = connection_apply(inst.connection, pb, x, dir,
                                               pb.ambient_derivative(x.coords, dir.vec))
                                  .value;
            worst = std::max(worst, (fd - qv).norm() / (1.0 + qv.norm()));
        }
        push("connection-transport consistency (fd)", worst, 1e-5);
    }

    {
        std::uniform_real_distribution<double> unif(0.05, 1.0);
        double worst = 0.0;
        for (int i = 0; i < 3; ++i)
            worst = std::max(worst,
                             tangency_deviation(pb, inst.connection, inst.transport, x, unif(rng)));
        push("damped step tangent to Newton path", worst, 1e-10);
    }

    return results;
}

}  // namespace vbn
