#pragma once

#include <Eigen/SVD>

#include "vbn/manifold.hpp"
#include "vbn/tangent_basis.hpp"
#include "vbn/types.hpp"

namespace vbn {

/// How fibre elements are carried between nearby fibres.
///  - Projection: orthogonal projection between embedded tangent spaces
///  - Retraction: derivative of the retraction (and its inverse / adjoint)
///  - Identity:   fixed fibre, no transport needed
enum class TransportKind { Projection, Retraction, Identity };

inline const char* to_string(TransportKind k) {
    switch (k) {
        case TransportKind::Projection: return "projection";
        case TransportKind::Retraction: return "retraction";
        case TransportKind::Identity: return "identity";
    }
    return "?";
}

namespace detail {

inline Matrix invert_on_tangent(const Matrix& bx, const Matrix& bxi, const Matrix& jac) {
    // reduced forward map T_x -> T_xi on the two bases, then inverted
    const Matrix red = bxi.transpose() * jac * bx;
    Eigen::JacobiSVD<Matrix> svd(red);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (!(smin > 0.0) || smax / smin > 1e12)
        throw SingularTransport("retraction transport: forward derivative not invertible "
                                "on the tangent space");
    return bx * red.partialPivLu().solve(Matrix(bxi.transpose()));
}

}  // namespace detail

/// Ambient matrix carrying representatives of T_xi X into T_x X, with the
/// preimage v = R_x^{-1}(xi) supplied by the caller.
inline Matrix tangent_back_transport_matrix_from(const Manifold& m, const Point& x,
                                                 const Vector& v, const Point& xi,
                                                 TransportKind kind) {
    switch (kind) {
        case TransportKind::Identity:
            return Matrix::Identity(m.ambient_dim, m.ambient_dim);
        case TransportKind::Projection:
            return m.projector(x.coords);
        case TransportKind::Retraction: {
            const Matrix jac = m.retraction_jacobian(x.coords, v);
            const TangentBasis bx = tangent_basis(m, x);
            const TangentBasis bxi = tangent_basis(m, xi);
            return detail::invert_on_tangent(bx.columns, bxi.columns, jac);
        }
    }
    throw Error("unreachable transport kind");
}

inline Matrix tangent_back_transport_matrix(const Manifold& m, const Point& x, const Point& xi,
                                            TransportKind kind) {
    if (kind == TransportKind::Retraction) {
        const TangentVector v = inverse_retract(m, x, xi);
        return tangent_back_transport_matrix_from(m, x, v.vec, xi, kind);
    }
    return tangent_back_transport_matrix_from(m, x, Vector(), xi, kind);
}

/// Forward transport T_x X -> T_xi X; the exact adjoint partner of the
/// covector back-transport below.
inline Matrix tangent_forward_transport_matrix_from(const Manifold& m, const Point& x,
                                                    const Vector& v, const Point& xi,
                                                    TransportKind kind) {
    switch (kind) {
        case TransportKind::Identity:
            return Matrix::Identity(m.ambient_dim, m.ambient_dim);
        case TransportKind::Projection:
            return Matrix(m.projector(xi.coords) * m.projector(x.coords));
        case TransportKind::Retraction:
            return Matrix(m.projector(xi.coords) * m.retraction_jacobian(x.coords, v) *
                          m.projector(x.coords));
    }
    throw Error("unreachable transport kind");
}

inline Matrix tangent_forward_transport_matrix(const Manifold& m, const Point& x, const Point& xi,
                                               TransportKind kind) {
    if (kind == TransportKind::Retraction) {
        const TangentVector v = inverse_retract(m, x, xi);
        return tangent_forward_transport_matrix_from(m, x, v.vec, xi, kind);
    }
    return tangent_forward_transport_matrix_from(m, x, Vector(), xi, kind);
}

/// Covector back-transport: adjoint of the forward tangent transport,
/// mapping canonical rows at xi to canonical rows at x.
inline Matrix covector_back_transport_matrix_from(const Manifold& m, const Point& x,
                                                  const Vector& v, const Point& xi,
                                                  TransportKind kind) {
    return tangent_forward_transport_matrix_from(m, x, v, xi, kind).transpose();
}

inline Matrix covector_back_transport_matrix(const Manifold& m, const Point& x, const Point& xi,
                                             TransportKind kind) {
    return tangent_forward_transport_matrix(m, x, xi, kind).transpose();
}

// ---------------------------------------------------------------------------
// Value-level wrappers
// ---------------------------------------------------------------------------

inline TangentVector back_transport_tangent(const Manifold& m, const Point& x, const Point& xi,
                                            const TangentVector& w, TransportKind kind) {
    if (!same_point(w.base, xi)) throw Error("back_transport_tangent: vector based elsewhere");
    require_dim(w.vec, m.ambient_dim, "back_transport_tangent");
    if (same_point(xi, x)) return TangentVector(x, w.vec);  // V_x^{-1}(x) = Id, exactly
    return TangentVector(x, tangent_back_transport_matrix(m, x, xi, kind) * w.vec);
}

inline Covector back_transport_covector(const Manifold& m, const Point& x, const Point& xi,
                                        const Covector& l, TransportKind kind) {
    if (!same_point(l.base, xi)) throw Error("back_transport_covector: covector based elsewhere");
    require_dim(l.row, m.ambient_dim, "back_transport_covector");
    if (same_point(xi, x)) return Covector(x, l.row);
    return Covector(x, covector_back_transport_matrix(m, x, xi, kind) * l.row);
}

}  // namespace vbn
