#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vbn/bundle.hpp"
#include "vbn/connection.hpp"
#include "vbn/manifold.hpp"
#include "vbn/random.hpp"
#include "vbn/types.hpp"

namespace vbn {

namespace detail {

inline void require_symmetric(const Matrix& a, const char* what) {
    if (a.rows() != a.cols() || (a - a.transpose()).norm() > 1e-12 * (1.0 + a.norm()))
        throw InvalidConfig(std::string(what) + ": matrix must be symmetric");
}

inline Manifold domain_or_sphere(Manifold domain, int n, const char* what) {
    if (domain.ambient_dim == 0) return sphere(n);
    if (domain.ambient_dim != n)
        throw InvalidConfig(std::string(what) + ": domain has ambient dimension " +
                            std::to_string(domain.ambient_dim) + ", data needs " +
                            std::to_string(n));
    return domain;
}

}  // namespace detail

/// Zeros of the vector field nu(x) = P(x) A x on the unit sphere: exactly
/// the unit eigenvectors of the symmetric matrix A. Tangential connection.
inline NewtonProblem rayleigh_vector_field(const Matrix& A, Manifold domain = {}) {
    detail::require_symmetric(A, "rayleigh_vector_field");
    const int n = static_cast<int>(A.rows());
    NewtonProblem pb;
    pb.domain = detail::domain_or_sphere(std::move(domain), n, "rayleigh_vector_field");
    pb.base = pb.domain;
    pb.kind = BundleKind::Tangent;
    pb.identity_base = true;
    pb.fibre_dim = n;
    pb.fibre_value = [A](const Vector& x) {
        const Vector ax = A * x;
        return Vector(ax - x * x.dot(ax));
    };
    pb.ambient_derivative = [A](const Vector& x, const Vector& dx) {
        const Vector ax = A * x;
        const Vector adx = A * dx;
        return Vector(adx - dx * x.dot(ax) - 2.0 * x * x.dot(adx));
    };
    pb.base_map = [](const Vector& x) { return Point(x); };
    return pb;
}

/// Stationary points of f(x) = x'Ax/2 on the unit sphere, posed as a zero
/// of the covector field f'(x). Dual connection on the cotangent bundle.
inline NewtonProblem rayleigh_functional(const Matrix& A, Manifold domain = {}) {
    detail::require_symmetric(A, "rayleigh_functional");
    const int n = static_cast<int>(A.rows());
    NewtonProblem pb;
    pb.domain = detail::domain_or_sphere(std::move(domain), n, "rayleigh_functional");
    pb.base = pb.domain;
    pb.kind = BundleKind::Cotangent;
    pb.identity_base = true;
    pb.fibre_dim = n;
    pb.fibre_value = [A](const Vector& x) { return Vector(A * x); };
    pb.ambient_derivative = [A](const Vector&, const Vector& dx) { return Vector(A * dx); };
    pb.base_map = [](const Vector& x) { return Point(x); };
    return pb;
}

/// Closest point to b on the unit sphere in Lagrange-Newton form:
/// minimize |x - b|^2/2 subject to |x|^2 - 1 = 0, solved as a zero of the
/// restricted gradient with operator f_H'' + lambda(x) c''. The domain is
/// the generic constraint manifold, so feasibility restoration provides the
/// retraction.
inline NewtonProblem closest_point_constrained(const Vector& b) {
    const int n = static_cast<int>(b.size());
    if (n < 2 || b.norm() == 0.0)
        throw InvalidConfig("closest_point_constrained: need a nonzero target in R^n, n >= 2");
    auto c = [](const Vector& x) {
        Vector r(1);
        r(0) = x.squaredNorm() - 1.0;
        return r;
    };
    auto cj = [n](const Vector& x) {
        Matrix j(1, n);
        j.row(0) = 2.0 * x.transpose();
        return j;
    };
    NewtonProblem pb;
    pb.domain = constraint_manifold(n, 1, c, cj);
    pb.base = pb.domain;
    pb.kind = BundleKind::Cotangent;
    pb.identity_base = true;
    pb.fibre_dim = n;
    pb.fibre_value = [b](const Vector& x) { return Vector(x - b); };
    pb.ambient_derivative = [](const Vector&, const Vector& dx) { return dx; };
    pb.base_map = [](const Vector& x) { return Point(x); };
    LagrangeData ld;
    ld.objective_gradient = pb.fibre_value;
    ld.objective_hessian_action = pb.ambient_derivative;
    ld.constraint = c;
    ld.constraint_jacobian = cj;
    ld.constraint_hessian_action = [](const Vector&, const Vector& lambda, const Vector& dx) {
        return Vector(2.0 * lambda(0) * dx);
    };
    pb.lagrange = std::move(ld);
    return pb;
}

/// Classical affine baseline F(x) = Mx - b in a fixed fibre over a linear
/// space; one Newton step is exact. Used for affine-covariance checks.
inline NewtonProblem affine_trivial(const Matrix& M, const Vector& b) {
    const int n = static_cast<int>(M.cols());
    const int m = static_cast<int>(M.rows());
    require_dim(b, m, "affine_trivial b");
    if (n != m || !M.fullPivLu().isInvertible())
        throw InvalidConfig("affine_trivial: M must be square and invertible");
    NewtonProblem pb;
    pb.domain = euclidean_space(n);
    pb.base = euclidean_space(m);
    pb.kind = BundleKind::Trivial;
    pb.identity_base = false;
    pb.fibre_dim = m;
    pb.fibre_value = [M, b](const Vector& x) { return Vector(M * x - b); };
    pb.ambient_derivative = [M](const Vector&, const Vector& dx) { return Vector(M * dx); };
    pb.base_map = [m](const Vector&) { return Point(Vector(Vector::Zero(m))); };
    return pb;
}

/// Semismooth field nu(x) = P(x)(Ax + max(0, x - shift)) on the sphere,
/// with the componentwise a.e. derivative of max supplied as the Newton
/// derivative. The solver runs unchanged on it.
inline NewtonProblem semismooth_sphere_field(const Matrix& A, double shift,
                                             Manifold domain = {}) {
    detail::require_symmetric(A, "semismooth_sphere_field");
    const int n = static_cast<int>(A.rows());
    auto g = [A, shift](const Vector& x) {
        Vector v = A * x;
        for (int i = 0; i < x.size(); ++i) v(i) += std::max(0.0, x(i) - shift);
        return v;
    };
    auto dg = [A, shift](const Vector& x, const Vector& dx) {
        Vector v = A * dx;
        for (int i = 0; i < x.size(); ++i)
            if (x(i) - shift > 0.0) v(i) += dx(i);
        return v;
    };
    NewtonProblem pb;
    pb.domain = detail::domain_or_sphere(std::move(domain), n, "semismooth_sphere_field");
    pb.base = pb.domain;
    pb.kind = BundleKind::Tangent;
    pb.identity_base = true;
    pb.fibre_dim = n;
    pb.fibre_value = [g](const Vector& x) {
        const Vector gx = g(x);
        return Vector(gx - x * x.dot(gx));
    };
    pb.ambient_derivative = [g, dg](const Vector& x, const Vector& dx) {
        const Vector gx = g(x);
        const Vector dgx = dg(x, dx);
        return Vector(dgx - dx * x.dot(gx) - x * (dx.dot(gx) + x.dot(dgx)));
    };
    pb.base_map = [](const Vector& x) { return Point(x); };
    return pb;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// A registered problem with its default connection/transport pairing.
struct ProblemInstance {
    std::string name;
    NewtonProblem problem;
    ConnectionMap connection;
    TransportKind transport = TransportKind::Projection;
};

struct ProblemParams {
    Matrix A;            // rayleigh_vf / rayleigh_fn / semismooth_vf
    Matrix M;            // affine
    Vector b;            // closest_point / affine
    double shift = 0.75; // semismooth_vf
    unsigned seed = 7;   // seed for defaulted matrix data
    std::string retraction = "projection";  // "projection" | "biased" (sphere domains)
};

struct ProblemDescriptor {
    std::string name;
    std::string kind;
    std::string params_help;
};

inline const std::vector<ProblemDescriptor>& problem_registry() {
    static const std::vector<ProblemDescriptor> reg = {
        {"rayleigh_vf", "tangent", "--A <matrix> (symmetric; default diag:3,2,1)"},
        {"rayleigh_fn", "cotangent", "--A <matrix> (symmetric; default diag:3,2,1)"},
        {"closest_point", "cotangent", "--b <vector> (nonzero target; default 2,0,0)"},
        {"affine", "trivial", "--M <matrix> --b <vector> (default: seeded 3x3)"},
        {"semismooth_vf", "tangent",
         "--A <matrix> --shift <s> (default diag:3,2,1, shift 0.75)"},
    };
    return reg;
}

namespace detail {

inline Matrix default_rayleigh_matrix() {
    Matrix a = Matrix::Zero(3, 3);
    a.diagonal() << 3.0, 2.0, 1.0;
    return a;
}

inline Manifold sphere_domain(int n, const std::string& retraction) {
    if (retraction == "projection") return sphere(n);
    if (retraction == "biased") {
        Vector bias = Vector::Ones(n);
        bias /= bias.norm();
        return biased_sphere(n, bias);
    }
    throw InvalidConfig("unknown retraction '" + retraction + "' (projection|biased)");
}

}  // namespace detail

inline ProblemInstance make_problem(const std::string& name, const ProblemParams& params = {}) {
    ProblemInstance inst;
    inst.name = name;
    if (name == "rayleigh_vf" || name == "semismooth_vf") {
        const Matrix a = params.A.size() ? params.A : detail::default_rayleigh_matrix();
        const Manifold dom = detail::sphere_domain(static_cast<int>(a.rows()), params.retraction);
        inst.problem = (name == "rayleigh_vf")
                           ? rayleigh_vector_field(a, dom)
                           : semismooth_sphere_field(a, params.shift, dom);
        inst.connection = make_connection(ConnectionKind::Tangential);
        inst.transport = TransportKind::Projection;
    } else if (name == "rayleigh_fn") {
        const Matrix a = params.A.size() ? params.A : detail::default_rayleigh_matrix();
        const Manifold dom = detail::sphere_domain(static_cast<int>(a.rows()), params.retraction);
        inst.problem = rayleigh_functional(a, dom);
        inst.connection = make_connection(ConnectionKind::DualTangential);
        inst.transport = TransportKind::Projection;
    } else if (name == "closest_point") {
        Vector b = params.b;
        if (b.size() == 0) {
            b = Vector::Zero(3);
            b(0) = 2.0;
        }
        if (params.retraction != "projection")
            throw InvalidConfig("closest_point runs on the constraint manifold; "
                                "only the feasibility-restoration retraction applies");
        inst.problem = closest_point_constrained(b);
        inst.connection = lagrange_connection(*inst.problem.lagrange);
        inst.transport = TransportKind::Projection;
    } else if (name == "affine") {
        Matrix m = params.M;
        Vector b = params.b;
        if (m.size() == 0) {
            std::mt19937 rng(params.seed);
            m = random_symmetric(rng, 3) + 4.0 * Matrix::Identity(3, 3);
            if (b.size() == 0) b = random_vector(rng, 3);
        }
        if (b.size() == 0) {
            std::mt19937 rng(params.seed + 1);
            b = random_vector(rng, static_cast<int>(m.rows()));
        }
        inst.problem = affine_trivial(m, b);
        inst.connection = make_connection(ConnectionKind::Trivial);
        inst.transport = TransportKind::Identity;
    } else {
        throw InvalidConfig("unknown problem '" + name + "'");
    }
    return inst;
}

/// Coordinate-axis point e_i (1-based index, optional sign).
inline Point axis_point(const Manifold& m, int axis, double sign = 1.0) {
    if (axis < 1 || axis > m.ambient_dim)
        throw InvalidConfig("axis_point: index out of range");
    Vector v = Vector::Zero(m.ambient_dim);
    v(axis - 1) = sign;
    return project_point(m, v);
}

}  // namespace vbn
