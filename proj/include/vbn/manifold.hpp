#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "vbn/types.hpp"

namespace vbn {

/// An embedded manifold described by providers in ambient coordinates.
///
/// All built-in factories fill every provider; user-defined manifolds may
/// leave the optional ones empty (inverse retraction, constraint data).
/// Instances are immutable after construction and safe to share.
struct Manifold {
    int ambient_dim = 0;
    int intrinsic_dim = 0;
    double membership_tol = 1e-10;
    double tangency_tol = 1e-10;

    /// Scalar residual of the defining equations, zero on the manifold.
    std::function<double(const Vector&)> membership;
    /// Orthogonal projector P(x) onto the tangent space.
    std::function<Matrix(const Vector&)> projector;
    /// Directional derivative P'(x)[dx] of the projector (matrix valued).
    std::function<Matrix(const Vector&, const Vector&)> projector_derivative;
    /// Retraction R_x(v).
    std::function<Vector(const Vector&, const Vector&)> retract;
    /// Ambient Jacobian of v -> R_x(v), acting on tangent representatives.
    std::function<Matrix(const Vector&, const Vector&)> retraction_jacobian;
    /// Inverse retraction R_x^{-1}(z); empty when not available.
    std::function<Vector(const Vector&, const Vector&)> inverse_retract;
    /// Projection of a nearby ambient point onto the manifold.
    std::function<Vector(const Vector&)> project;
    /// Constraint map c and Jacobian c' for constraint-defined manifolds.
    std::function<Vector(const Vector&)> constraint;
    std::function<Matrix(const Vector&)> constraint_jacobian;

    [[nodiscard]] bool has_inverse_retraction() const { return static_cast<bool>(inverse_retract); }
};

// ---------------------------------------------------------------------------
// Point / tangent helpers
// ---------------------------------------------------------------------------

inline bool on_manifold(const Manifold& m, const Point& x) {
    return x.dim() == m.ambient_dim && m.membership(x.coords) <= m.membership_tol;
}

inline void check_point(const Manifold& m, const Point& x, const char* what = "point") {
    require_dim(x.coords, m.ambient_dim, what);
    const double r = m.membership(x.coords);
    if (!(r <= m.membership_tol))
        throw Error(std::string(what) + ": membership residual " + std::to_string(r) +
                    " exceeds tolerance");
}

/// Projects an ambient point onto the manifold.
inline Point project_point(const Manifold& m, const Vector& ambient) {
    require_dim(ambient, m.ambient_dim, "project_point");
    if (m.membership(ambient) <= m.membership_tol) return Point(ambient);
    if (!m.project) throw Error("project_point: manifold has no projection provider");
    return Point(m.project(ambient));
}

inline TangentVector project_tangent(const Manifold& m, const Point& x, const Vector& v) {
    require_dim(v, m.ambient_dim, "project_tangent");
    check_point(m, x, "project_tangent base");
    return TangentVector(x, m.projector(x.coords) * v);
}

inline Covector make_covector(const Manifold& m, const Point& x, const Vector& row) {
    require_dim(row, m.ambient_dim, "make_covector");
    return Covector(x, m.projector(x.coords) * row);
}

inline Point retract(const Manifold& m, const Point& x, const TangentVector& v) {
    if (!same_point(v.base, x)) throw Error("retract: tangent vector based elsewhere");
    return Point(m.retract(x.coords, v.vec));
}

inline TangentVector inverse_retract(const Manifold& m, const Point& x, const Point& z) {
    if (!m.inverse_retract)
        throw OutOfInjectivityRegion("inverse_retract: no inverse retraction available");
    return TangentVector(x, m.inverse_retract(x.coords, z.coords));
}

// ---------------------------------------------------------------------------
// Unit sphere S^{n-1}
// ---------------------------------------------------------------------------

/// Unit sphere with the metric projection retraction R_x(v) = (x+v)/|x+v|.
inline Manifold sphere(int ambient_dim) {
    if (ambient_dim < 2) throw InvalidConfig("sphere: ambient dimension must be >= 2");
    Manifold m;
    m.ambient_dim = ambient_dim;
    m.intrinsic_dim = ambient_dim - 1;
    m.membership = [](const Vector& x) { return std::abs(x.squaredNorm() - 1.0); };
    m.projector = [ambient_dim](const Vector& x) {
        return Matrix(Matrix::Identity(ambient_dim, ambient_dim) -
                      (x * x.transpose()) / x.squaredNorm());
    };
    m.projector_derivative = [](const Vector& x, const Vector& dx) {
        return Matrix(-(dx * x.transpose() + x * dx.transpose()));
    };
    m.retract = [](const Vector& x, const Vector& v) {
        if (v.isZero(0.0)) return x;  // retraction axiom holds exactly
        const Vector s = x + v;
        const double ns = s.norm();
        if (ns < 1e-14) throw DegenerateRetraction("sphere retraction: x + v vanishes");
        return Vector(s / ns);
    };
    m.retraction_jacobian = [ambient_dim](const Vector& x, const Vector& v) {
        const Vector s = x + v;
        const double ns = s.norm();
        if (ns < 1e-14) throw DegenerateRetraction("sphere retraction: x + v vanishes");
        const Vector u = s / ns;
        return Matrix((Matrix::Identity(ambient_dim, ambient_dim) - u * u.transpose()) / ns);
    };
    m.project = [](const Vector& x) {
        const double nx = x.norm();
        if (nx < 1e-14) throw Error("sphere projection: point too close to the origin");
        return Vector(x / nx);
    };
    // Closed form: v = z/<x,z> - x. Conditioning requires <x,z> bounded away
    // from zero; we demand <x,z> > 0.1.
    m.inverse_retract = [](const Vector& x, const Vector& z) {
        const double c = x.dot(z);
        if (c <= 0.1)
            throw OutOfInjectivityRegion("sphere inverse retraction: <x,z> = " +
                                         std::to_string(c));
        return Vector(z / c - x);
    };
    return m;
}

/// Sphere with a first-order retraction that carries a tangential
/// second-order bias: R_x(v) = normalize(x + v + (a.v/2) v). Satisfies both
/// retraction axioms but induces a connection different from the tangential
/// one, which makes inconsistent transport/connection pairings observable.
inline Manifold biased_sphere(int ambient_dim, Vector bias) {
    require_dim(bias, ambient_dim, "biased_sphere bias");
    Manifold m = sphere(ambient_dim);
    const Vector a = bias;
    m.retract = [a](const Vector& x, const Vector& v) {
        if (v.isZero(0.0)) return x;
        const Vector s = x + v + 0.5 * a.dot(v) * v;
        const double ns = s.norm();
        if (ns < 1e-14) throw DegenerateRetraction("biased sphere retraction: shifted point vanishes");
        return Vector(s / ns);
    };
    m.retraction_jacobian = [a, ambient_dim](const Vector& x, const Vector& v) {
        const Vector s = x + v + 0.5 * a.dot(v) * v;
        const double ns = s.norm();
        if (ns < 1e-14) throw DegenerateRetraction("biased sphere retraction: shifted point vanishes");
        const Vector u = s / ns;
        const Matrix inner = Matrix::Identity(ambient_dim, ambient_dim) +
                             0.5 * (v * a.transpose() + a.dot(v) * Matrix::Identity(ambient_dim, ambient_dim));
        return Matrix(((Matrix::Identity(ambient_dim, ambient_dim) - u * u.transpose()) / ns) * inner);
    };
    m.inverse_retract = nullptr;  // no closed form; not needed for its uses
    return m;
}

// ---------------------------------------------------------------------------
// Product of spheres
// ---------------------------------------------------------------------------

/// Product of unit spheres S^{n_1-1} x ... x S^{n_k-1}, componentwise
/// geometry on the concatenated ambient space.
inline Manifold product_of_spheres(const std::vector<int>& ambient_dims) {
    if (ambient_dims.empty()) throw InvalidConfig("product_of_spheres: empty factor list");
    int total = 0;
    for (int nd : ambient_dims) {
        if (nd < 2) throw InvalidConfig("product_of_spheres: factor dimension must be >= 2");
        total += nd;
    }
    std::vector<std::pair<int, int>> blocks;  // (offset, size)
    int off = 0;
    for (int nd : ambient_dims) {
        blocks.emplace_back(off, nd);
        off += nd;
    }
    Manifold m;
    m.ambient_dim = total;
    m.intrinsic_dim = total - static_cast<int>(ambient_dims.size());
    m.membership = [blocks](const Vector& x) {
        double r = 0.0;
        for (const auto& [o, s] : blocks)
            r = std::max(r, std::abs(x.segment(o, s).squaredNorm() - 1.0));
        return r;
    };
    m.projector = [blocks, total](const Vector& x) {
        Matrix p = Matrix::Zero(total, total);
        for (const auto& [o, s] : blocks) {
            const Vector xb = x.segment(o, s);
            p.block(o, o, s, s) =
                Matrix::Identity(s, s) - (xb * xb.transpose()) / xb.squaredNorm();
        }
        return p;
    };
    m.projector_derivative = [blocks, total](const Vector& x, const Vector& dx) {
        Matrix p = Matrix::Zero(total, total);
        for (const auto& [o, s] : blocks) {
            const Vector xb = x.segment(o, s);
            const Vector db = dx.segment(o, s);
            p.block(o, o, s, s) = -(db * xb.transpose() + xb * db.transpose());
        }
        return p;
    };
    m.retract = [blocks](const Vector& x, const Vector& v) {
        if (v.isZero(0.0)) return x;
        Vector out(x.size());
        for (const auto& [o, s] : blocks) {
            const Vector sb = x.segment(o, s) + v.segment(o, s);
            const double ns = sb.norm();
            if (ns < 1e-14)
                throw DegenerateRetraction("product retraction: a factor of x + v vanishes");
            out.segment(o, s) = sb / ns;
        }
        return out;
    };
    m.retraction_jacobian = [blocks, total](const Vector& x, const Vector& v) {
        Matrix jac = Matrix::Zero(total, total);
        for (const auto& [o, s] : blocks) {
            const Vector sb = x.segment(o, s) + v.segment(o, s);
            const double ns = sb.norm();
            if (ns < 1e-14)
                throw DegenerateRetraction("product retraction: a factor of x + v vanishes");
            const Vector u = sb / ns;
            jac.block(o, o, s, s) = (Matrix::Identity(s, s) - u * u.transpose()) / ns;
        }
        return jac;
    };
    m.inverse_retract = [blocks](const Vector& x, const Vector& z) {
        Vector out(x.size());
        for (const auto& [o, s] : blocks) {
            const Vector xb = x.segment(o, s);
            const Vector zb = z.segment(o, s);
            const double c = xb.dot(zb);
            if (c <= 0.1)
                throw OutOfInjectivityRegion("product inverse retraction: factor <x,z> = " +
                                             std::to_string(c));
            out.segment(o, s) = zb / c - xb;
        }
        return out;
    };
    m.project = [blocks](const Vector& x) {
        Vector out(x.size());
        for (const auto& [o, s] : blocks) {
            const double nb = x.segment(o, s).norm();
            if (nb < 1e-14) throw Error("product projection: a factor is near the origin");
            out.segment(o, s) = x.segment(o, s) / nb;
        }
        return out;
    };
    return m;
}

// ---------------------------------------------------------------------------
// Linear space (trivial geometry)
// ---------------------------------------------------------------------------

inline Manifold euclidean_space(int dim) {
    if (dim < 1) throw InvalidConfig("euclidean_space: dimension must be >= 1");
    Manifold m;
    m.ambient_dim = dim;
    m.intrinsic_dim = dim;
    m.membership = [](const Vector&) { return 0.0; };
    m.projector = [dim](const Vector&) { return Matrix(Matrix::Identity(dim, dim)); };
    m.projector_derivative = [dim](const Vector&, const Vector&) {
        return Matrix(Matrix::Zero(dim, dim));
    };
    m.retract = [](const Vector& x, const Vector& v) { return Vector(x + v); };
    m.retraction_jacobian = [dim](const Vector&, const Vector&) {
        return Matrix(Matrix::Identity(dim, dim));
    };
    m.inverse_retract = [](const Vector& x, const Vector& z) { return Vector(z - x); };
    m.project = [](const Vector& x) { return x; };
    return m;
}

// ---------------------------------------------------------------------------
// Constraint manifold {x : c(x) = 0}
// ---------------------------------------------------------------------------

namespace detail {

/// Damped Gauss-Newton feasibility restoration toward {c = 0}.
inline Vector restore_feasibility(const std::function<Vector(const Vector&)>& c,
                                  const std::function<Matrix(const Vector&)>& jac, Vector z,
                                  double tol, int max_iter) {
    double res = c(z).norm();
    if (res <= tol) return z;
    for (int it = 0; it < max_iter; ++it) {
        const Vector cz = c(z);
        const Matrix j = jac(z);
        const Matrix jjt = j * j.transpose();
        Eigen::LDLT<Matrix> ldlt(jjt);
        if (ldlt.info() != Eigen::Success)
            throw DegenerateRetraction("feasibility restoration: constraint Jacobian rank deficient");
        const Vector step = j.transpose() * ldlt.solve(cz);
        double t = 1.0;
        Vector znew = z - step;
        double rnew = c(znew).norm();
        int halvings = 0;
        while (rnew > res && halvings < 30) {
            t *= 0.5;
            znew = z - t * step;
            rnew = c(znew).norm();
            ++halvings;
        }
        if (rnew > res)
            throw DegenerateRetraction("feasibility restoration: no residual decrease");
        z = znew;
        res = rnew;
        if (res <= tol) return z;
    }
    throw DegenerateRetraction("feasibility restoration: residual " + std::to_string(res) +
                               " after iteration limit");
}

}  // namespace detail

/// Manifold {x in R^n : c(x) = 0} for a user-supplied constraint map with
/// surjective Jacobian. The retraction restores feasibility from x + v by a
/// damped Gauss-Newton iteration (tol 1e-12, at most 20 sweeps); projector
/// derivative and retraction Jacobian fall back to finite differences.
inline Manifold constraint_manifold(int ambient_dim, int num_constraints,
                                    std::function<Vector(const Vector&)> c,
                                    std::function<Matrix(const Vector&)> c_jacobian) {
    if (num_constraints < 1 || num_constraints >= ambient_dim)
        throw InvalidConfig("constraint_manifold: need 1 <= m < n");
    Manifold m;
    m.ambient_dim = ambient_dim;
    m.intrinsic_dim = ambient_dim - num_constraints;
    m.constraint = c;
    m.constraint_jacobian = c_jacobian;
    m.membership = [c](const Vector& x) { return c(x).lpNorm<Eigen::Infinity>(); };
    m.projector = [c_jacobian, ambient_dim](const Vector& x) {
        const Matrix j = c_jacobian(x);
        Eigen::LDLT<Matrix> ldlt(Matrix(j * j.transpose()));
        if (ldlt.info() != Eigen::Success)
            throw RankDeficiency("constraint projector: Jacobian rank deficient");
        return Matrix(Matrix::Identity(ambient_dim, ambient_dim) -
                      j.transpose() * ldlt.solve(j));
    };
    m.retract = [c, c_jacobian](const Vector& x, const Vector& v) {
        if (v.isZero(0.0)) return x;
        return detail::restore_feasibility(c, c_jacobian, x + v, 1e-12, 20);
    };
    m.project = [c, c_jacobian](const Vector& x) {
        return detail::restore_feasibility(c, c_jacobian, x, 1e-12, 20);
    };
    // Fourth-order differences: the tangency identity checks need P' to
    // better than 1e-10, which a plain central quotient cannot reach.
    const auto projector_fn = m.projector;
    m.projector_derivative = [projector_fn, ambient_dim](const Vector& x, const Vector& dx) {
        const double nd = dx.norm();
        if (nd == 0.0) return Matrix(Matrix::Zero(ambient_dim, ambient_dim));
        const Vector g = dx / nd;
        const double h = 3e-4 * (1.0 + x.norm());
        return Matrix((8.0 * (projector_fn(x + h * g) - projector_fn(x - h * g)) -
                       (projector_fn(x + 2.0 * h * g) - projector_fn(x - 2.0 * h * g))) *
                      (nd / (12.0 * h)));
    };
    const auto retract_fn = m.retract;
    m.retraction_jacobian = [retract_fn, ambient_dim](const Vector& x, const Vector& v) {
        const double h = 1e-6 * (1.0 + v.norm());
        Matrix jac(ambient_dim, ambient_dim);
        Vector e = Vector::Zero(ambient_dim);
        for (int j = 0; j < ambient_dim; ++j) {
            e(j) = h;
            jac.col(j) = (retract_fn(x, v + e) - retract_fn(x, v - e)) / (2.0 * h);
            e(j) = 0.0;
        }
        return jac;
    };
    // Inverse retraction: Gauss-Newton in tangent coordinates on R_x(v) = z.
    const auto jac_fn = m.retraction_jacobian;
    m.inverse_retract = [projector_fn, retract_fn, jac_fn, ambient_dim](const Vector& x,
                                                                        const Vector& z) {
        const Matrix p = projector_fn(x);
        Vector v = p * (z - x);
        for (int it = 0; it < 50; ++it) {
            const Vector r = retract_fn(x, v) - z;
            if (r.norm() <= 1e-13 * (1.0 + z.norm())) return v;
            const Matrix jac = jac_fn(x, v);
            // solve on the tangent space; pad the normal block to keep it square
            const Matrix a =
                p * jac * p + (Matrix::Identity(ambient_dim, ambient_dim) - p);
            v -= p * a.fullPivLu().solve(r);
        }
        throw OutOfInjectivityRegion("constraint inverse retraction: Gauss-Newton stalled");
    };
    return m;
}

}  // namespace vbn
