#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "vbn/manifold.hpp"
#include "vbn/transport.hpp"
#include "vbn/types.hpp"

namespace vbn {

enum class BundleKind { Tangent, Cotangent, Trivial };

inline const char* to_string(BundleKind k) {
    switch (k) {
        case BundleKind::Tangent: return "tangent";
        case BundleKind::Cotangent: return "cotangent";
        case BundleKind::Trivial: return "trivial";
    }
    return "?";
}

/// Value of the section in the fibre over its base point.
struct FibreElement {
    Point base_y;
    Vector value;  // canonical ambient representation
    BundleKind kind = BundleKind::Trivial;

    [[nodiscard]] double norm() const { return value.norm(); }
};

/// Constraint data for problems in Lagrange-Newton form:
/// minimize f_H on {c = 0}, stationarity via a pointwise multiplier.
struct LagrangeData {
    std::function<Vector(const Vector&)> objective_gradient;  // f_H'(x) as a vector
    std::function<Vector(const Vector&, const Vector&)> objective_hessian_action;
    std::function<Vector(const Vector&)> constraint;
    std::function<Matrix(const Vector&)> constraint_jacobian;
    /// (x, lambda, dx) -> (sum_i lambda_i c_i''(x)) dx
    std::function<Vector(const Vector&, const Vector&, const Vector&)> constraint_hessian_action;
};

/// The multiplier is fixed by the normal-space condition
/// (f_H'(x) + lambda c'(x)) w = 0 for all w normal to the manifold,
/// solved here in least-squares form.
inline Vector solve_multiplier(const LagrangeData& ld, const Vector& x) {
    const Matrix j = ld.constraint_jacobian(x);
    const Vector g = ld.objective_gradient(x);
    Eigen::LDLT<Matrix> ldlt(Matrix(j * j.transpose()));
    if (ldlt.info() != Eigen::Success)
        throw RankDeficiency("solve_multiplier: constraint Jacobian rank deficient");
    return Vector(-ldlt.solve(j * g));
}

/// A root-finding problem for a section F of a vector bundle over the
/// domain manifold. Providers must be pure; the solver never differentiates
/// F itself, so `ambient_derivative` may be any generalized (Newton)
/// derivative. The base map y = p o F is assumed locally Lipschitz; this is
/// a contract on the providers, not something the solver can verify.
struct NewtonProblem {
    Manifold domain;
    Manifold base;
    BundleKind kind = BundleKind::Trivial;
    /// Ambient representation of F(x) (for cotangent problems: the ambient
    /// covector field l_H(x), before canonicalization).
    std::function<Vector(const Vector&)> fibre_value;
    /// Base point y(x) of the fibre containing F(x).
    std::function<Point(const Vector&)> base_map;
    /// Directional derivative of the ambient representation at x.
    std::function<Vector(const Vector&, const Vector&)> ambient_derivative;
    std::optional<LagrangeData> lagrange;
    /// True when the bundle sits over the domain itself with y(x) = x.
    bool identity_base = false;
    int fibre_dim = 0;  // ambient dimension of fibre values
};

inline Point base_point(const NewtonProblem& pb, const Point& x) {
    if (pb.identity_base) return x;
    return pb.base_map(x.coords);
}

/// Evaluates the section and canonicalizes the fibre representation.
inline FibreElement evaluate(const NewtonProblem& pb, const Point& x) {
    check_point(pb.domain, x, "evaluate");
    Vector raw;
    try {
        raw = pb.fibre_value(x.coords);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw EvaluationFailure(std::string("evaluate: ") + e.what());
    }
    require_dim(raw, pb.fibre_dim, "evaluate fibre value");
    const Point y = base_point(pb, x);
    switch (pb.kind) {
        case BundleKind::Tangent: {
            const Vector tang = pb.base.projector(y.coords) * raw;
            const double drift = (raw - tang).norm();
            if (drift > pb.base.tangency_tol * (1.0 + raw.norm()))
                throw EvaluationFailure("evaluate: tangent-kind value leaves the tangent space "
                                        "(drift " + std::to_string(drift) + ")");
            return FibreElement{y, raw, pb.kind};
        }
        case BundleKind::Cotangent:
            return FibreElement{y, Vector(pb.base.projector(y.coords) * raw), pb.kind};
        case BundleKind::Trivial:
            return FibreElement{y, raw, pb.kind};
    }
    throw Error("unreachable bundle kind");
}

inline double residual_norm(const NewtonProblem& pb, const Point& x) {
    return evaluate(pb, x).norm();
}

/// Carries a canonical fibre value from the fibre over y_source into the
/// fibre over y_target.
inline Vector back_transport_fibre(const NewtonProblem& pb, const Point& y_target,
                                   const Point& y_source, const Vector& value,
                                   TransportKind kind) {
    if (same_point(y_target, y_source)) return value;
    switch (pb.kind) {
        case BundleKind::Trivial:
            return value;
        case BundleKind::Tangent:
            return tangent_back_transport_matrix(pb.base, y_target, y_source, kind) * value;
        case BundleKind::Cotangent:
            return covector_back_transport_matrix(pb.base, y_target, y_source, kind) * value;
    }
    throw Error("unreachable bundle kind");
}

/// Same, with the retraction preimage of y_source from y_target known.
inline Vector back_transport_fibre_from(const NewtonProblem& pb, const Point& y_target,
                                        const Vector& preimage, const Point& y_source,
                                        const Vector& value, TransportKind kind) {
    if (same_point(y_target, y_source)) return value;
    switch (pb.kind) {
        case BundleKind::Trivial:
            return value;
        case BundleKind::Tangent:
            return tangent_back_transport_matrix_from(pb.base, y_target, preimage, y_source, kind) *
                   value;
        case BundleKind::Cotangent:
            return covector_back_transport_matrix_from(pb.base, y_target, preimage, y_source,
                                                       kind) *
                   value;
    }
    throw Error("unreachable bundle kind");
}

}  // namespace vbn
