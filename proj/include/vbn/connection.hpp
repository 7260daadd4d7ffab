#pragma once

#include <functional>
#include <utility>

#include "vbn/bundle.hpp"
#include "vbn/manifold.hpp"
#include "vbn/transport.hpp"
#include "vbn/types.hpp"

namespace vbn {

enum class ConnectionKind { Tangential, RetractionDerived, DualTangential, DualRetraction, Trivial };

inline const char* to_string(ConnectionKind k) {
    switch (k) {
        case ConnectionKind::Tangential: return "tangential";
        case ConnectionKind::RetractionDerived: return "retraction";
        case ConnectionKind::DualTangential: return "dual-tangential";
        case ConnectionKind::DualRetraction: return "dual-retraction";
        case ConnectionKind::Trivial: return "trivial";
    }
    return "?";
}

/// Connection map in ambient coordinates: the covariant derivative of a
/// section along `dir` is P(x) (ambient derivative + christoffel_action).
/// The christoffel term is the bilinear correction B_y(e) dy the connection
/// adds on a curved manifold; it is zero for the tangential kind.
struct ConnectionMap {
    ConnectionKind kind = ConnectionKind::Trivial;
    std::function<Vector(const Manifold&, const Vector& x, const Vector& fibre_value,
                         const Vector& dir)>
        christoffel_action;
};

namespace detail {

/// d/dt M(t)|_0 by fourth-order central differences; M must be smooth.
template <class F>
Matrix matrix_curve_derivative(F&& f, double h) {
    return (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h);
}

inline Vector retraction_christoffel(const Manifold& m, const Vector& x, const Vector& e,
                                     const Vector& dir, bool dual) {
    const double nd = dir.norm();
    if (nd == 0.0 || e.size() == 0) return Vector::Zero(m.ambient_dim);
    const Vector g = dir / nd;
    const Point px(x);
    auto family = [&](double t) {
        const Vector v = t * g;
        const Point xi(m.retract(x, v));
        return dual ? covector_back_transport_matrix_from(m, px, v, xi, TransportKind::Retraction)
                    : tangent_back_transport_matrix_from(m, px, v, xi, TransportKind::Retraction);
    };
    const double h = 1e-3;
    return nd * (matrix_curve_derivative(family, h) * e);
}

}  // namespace detail

/// Connection with the standard christoffel term for its kind.
inline ConnectionMap make_connection(ConnectionKind kind) {
    ConnectionMap q;
    q.kind = kind;
    switch (kind) {
        case ConnectionKind::Tangential:
        case ConnectionKind::Trivial:
            q.christoffel_action = [](const Manifold& m, const Vector&, const Vector&,
                                      const Vector&) { return Vector(Vector::Zero(m.ambient_dim)); };
            break;
        case ConnectionKind::DualTangential:
            q.christoffel_action = [](const Manifold& m, const Vector& x, const Vector& e,
                                      const Vector& dir) {
                return Vector(m.projector_derivative(x, dir) * e);
            };
            break;
        case ConnectionKind::RetractionDerived:
            q.christoffel_action = [](const Manifold& m, const Vector& x, const Vector& e,
                                      const Vector& dir) {
                return detail::retraction_christoffel(m, x, e, dir, /*dual=*/false);
            };
            break;
        case ConnectionKind::DualRetraction:
            q.christoffel_action = [](const Manifold& m, const Vector& x, const Vector& e,
                                      const Vector& dir) {
                return detail::retraction_christoffel(m, x, e, dir, /*dual=*/true);
            };
            break;
    }
    return q;
}

/// Dual connection in constrained form: the correction l_H(x) P'(x) dx is
/// replaced by the equal-on-tangent-space term lambda(x) c''(x) dx.
inline ConnectionMap lagrange_connection(const LagrangeData& ld) {
    ConnectionMap q;
    q.kind = ConnectionKind::DualTangential;
    q.christoffel_action = [ld](const Manifold&, const Vector& x, const Vector&,
                                const Vector& dir) {
        const Vector lambda = solve_multiplier(ld, x);
        return ld.constraint_hessian_action(x, lambda, dir);
    };
    return q;
}

/// The connection derived from a given back-transport by differentiation.
inline ConnectionKind consistent_connection_kind(TransportKind t, BundleKind k) {
    if (k == BundleKind::Trivial) return ConnectionKind::Trivial;
    switch (t) {
        case TransportKind::Projection:
            return k == BundleKind::Tangent ? ConnectionKind::Tangential
                                            : ConnectionKind::DualTangential;
        case TransportKind::Retraction:
            return k == BundleKind::Tangent ? ConnectionKind::RetractionDerived
                                            : ConnectionKind::DualRetraction;
        case TransportKind::Identity:
            throw UnsupportedKind("identity transport only fits a trivial bundle");
    }
    throw Error("unreachable transport kind");
}

inline ConnectionMap consistent_connection(TransportKind t, BundleKind k) {
    return make_connection(consistent_connection_kind(t, k));
}

inline bool kind_compatible(ConnectionKind q, BundleKind k) {
    switch (q) {
        case ConnectionKind::Tangential:
        case ConnectionKind::RetractionDerived:
            return k == BundleKind::Tangent;
        case ConnectionKind::DualTangential:
        case ConnectionKind::DualRetraction:
            return k == BundleKind::Cotangent;
        case ConnectionKind::Trivial:
            return k == BundleKind::Trivial;
    }
    return false;
}

/// Applies Q_{F(x)} after F'(x)[dir]: the covariant derivative of the
/// section in the fibre over y(x). `fibre_derivative` is the caller-supplied
/// ambient directional derivative; `fibre_value_hint` avoids re-evaluating
/// F(x) during operator assembly.
inline FibreElement connection_apply(const ConnectionMap& q, const NewtonProblem& pb,
                                     const Point& x, const TangentVector& dir,
                                     const Vector& fibre_derivative,
                                     const Vector* fibre_value_hint = nullptr) {
    if (!kind_compatible(q.kind, pb.kind))
        throw UnsupportedKind(std::string("connection kind '") + to_string(q.kind) +
                              "' does not act on a " + to_string(pb.kind) + " bundle");
    if (!same_point(dir.base, x)) throw Error("connection_apply: direction based elsewhere");
    require_dim(fibre_derivative, pb.fibre_dim, "connection_apply fibre_derivative");

    if (pb.kind == BundleKind::Trivial)
        return FibreElement{base_point(pb, x), fibre_derivative, pb.kind};

    if (!pb.identity_base)
        throw UnsupportedKind("curvature corrections need the bundle to sit over its domain");

    const Vector e = fibre_value_hint ? *fibre_value_hint : pb.fibre_value(x.coords);
    const Vector corr = q.christoffel_action(pb.domain, x.coords, e, dir.vec);
    const Matrix p = pb.base.projector(x.coords);
    return FibreElement{x, Vector(p * (fibre_derivative + corr)), pb.kind};
}

}  // namespace vbn
