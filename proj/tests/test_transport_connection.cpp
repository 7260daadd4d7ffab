#include <doctest.h>

#include <cmath>
#include <random>

#include "test_helpers.hpp"
#include "vbn/vbn.hpp"

using namespace vbn;
using vbn_test::diag;
using vbn_test::pt;
using vbn_test::vec;

namespace {

Matrix spd_a3() { return diag({3, 2, 1}); }

/// FD oracle for the tangential covariant derivative: project the central
/// difference of the ambient field along the retraction curve.
Vector fd_tangential_oracle(const NewtonProblem& pb, const Point& x, const Vector& dir,
                            double h = 1e-5) {
    const Vector plus = pb.fibre_value(pb.domain.retract(x.coords, h * dir));
    const Vector minus = pb.fibre_value(pb.domain.retract(x.coords, -h * dir));
    return pb.domain.projector(x.coords) * ((plus - minus) / (2.0 * h));
}

}  // namespace

TEST_CASE("tangential connection on the Rayleigh field") {
    const NewtonProblem pb = rayleigh_vector_field(spd_a3());
    const ConnectionMap q = make_connection(ConnectionKind::Tangential);
    const Point e1 = pt({1, 0, 0});
    const TangentVector dir(e1, vec({0, 1, 0}));

    SUBCASE("analytic value at the first eigenvector") {
        const Vector fd = pb.ambient_derivative(e1.coords, dir.vec);
        const FibreElement out = connection_apply(q, pb, e1, dir, fd);
        CHECK(out.value.isApprox(vec({0, -1, 0}), 1e-14));
        // cross-check with central differences at h = 1e-5
        CHECK((out.value - fd_tangential_oracle(pb, e1, dir.vec)).norm() <= 1e-8);
    }
    SUBCASE("zero direction gives the zero element") {
        const TangentVector zero(e1, vec({0, 0, 0}));
        const FibreElement out =
            connection_apply(q, pb, e1, zero, pb.ambient_derivative(e1.coords, zero.vec));
        CHECK(out.norm() == 0.0);
    }
    SUBCASE("kind mismatch raises UnsupportedKind") {
        const NewtonProblem dual = rayleigh_functional(spd_a3());
        CHECK_THROWS_AS(
            connection_apply(q, dual, e1, dir, dual.ambient_derivative(e1.coords, dir.vec)),
            UnsupportedKind);
    }
}

TEST_CASE("dual-tangential connection") {
    const Matrix a = spd_a3();
    const NewtonProblem pb = rayleigh_functional(a);
    const ConnectionMap q = make_connection(ConnectionKind::DualTangential);
    std::mt19937 rng(101);

    SUBCASE("matches the covariant Hessian on the sphere") {
        // oracle: for f = x'Ax/2 on S^2 the covariant derivative of f' along
        // v is P(A v) - (x'Ax) v
        const Point x = random_point(rng, pb.domain);
        const TangentVector v = random_tangent(rng, pb.domain, x);
        const FibreElement out =
            connection_apply(q, pb, x, v, pb.ambient_derivative(x.coords, v.vec));
        const Vector oracle = pb.domain.projector(x.coords) * (a * v.vec) -
                              x.coords.dot(a * x.coords) * v.vec;
        CHECK((out.value - oracle).norm() <= 1e-12);
    }
    SUBCASE("vanishing ambient field drops the correction term") {
        NewtonProblem flat = pb;
        const Vector w = vec({0, 0, 1});
        flat.fibre_value = [w](const Vector& x) { return Vector(x(1) * w); };
        flat.ambient_derivative = [w](const Vector&, const Vector& dx) {
            return Vector(dx(1) * w);
        };
        const Point e1 = pt({1, 0, 0});
        const TangentVector v(e1, vec({0, 1, 0}));
        const Vector fd = flat.ambient_derivative(e1.coords, v.vec);
        const FibreElement out = connection_apply(q, flat, e1, v, fd);
        CHECK((out.value - pb.domain.projector(e1.coords) * fd).norm() <= 1e-15);
    }
}

TEST_CASE("connection-transport consistency (fd)") {
    std::mt19937 rng(103);

    SUBCASE("tangential pair on spheres") {
        for (int n : {3, 6}) {
            const NewtonProblem pb = rayleigh_vector_field(random_symmetric(rng, n));
            const ConnectionMap q = make_connection(ConnectionKind::Tangential);
            for (int trial = 0; trial < 10; ++trial) {
                const Point x = random_point(rng, pb.domain);
                const TangentVector dir = random_tangent(rng, pb.domain, x);
                const Vector fd = fd_covariant_derivative(pb, TransportKind::Projection, x, dir);
                const Vector qv =
                    connection_apply(q, pb, x, dir, pb.ambient_derivative(x.coords, dir.vec))
                        .value;
                CHECK((fd - qv).norm() <= 1e-5 * (1.0 + qv.norm()));
            }
        }
    }
    SUBCASE("retraction pair on the biased sphere") {
        Vector bias = vec({1, 1, 1});
        bias /= bias.norm();
        const NewtonProblem pb = rayleigh_vector_field(spd_a3(), biased_sphere(3, bias));
        const ConnectionMap q = make_connection(ConnectionKind::RetractionDerived);
        for (int trial = 0; trial < 5; ++trial) {
            const Point x = random_point(rng, pb.domain);
            const TangentVector dir = random_tangent(rng, pb.domain, x);
            const Vector fd = fd_covariant_derivative(pb, TransportKind::Retraction, x, dir);
            const Vector qv =
                connection_apply(q, pb, x, dir, pb.ambient_derivative(x.coords, dir.vec)).value;
            CHECK((fd - qv).norm() <= 1e-5 * (1.0 + qv.norm()));
        }
    }
    SUBCASE("dual pairs on the sphere") {
        const NewtonProblem pb = rayleigh_functional(spd_a3());
        for (auto [qk, tk] :
             {std::pair{ConnectionKind::DualTangential, TransportKind::Projection},
              std::pair{ConnectionKind::DualRetraction, TransportKind::Retraction}}) {
            const ConnectionMap q = make_connection(qk);
            for (int trial = 0; trial < 5; ++trial) {
                const Point x = random_point(rng, pb.domain);
                const TangentVector dir = random_tangent(rng, pb.domain, x);
                const Vector fd = fd_covariant_derivative(pb, tk, x, dir);
                const Vector qv =
                    connection_apply(q, pb, x, dir, pb.ambient_derivative(x.coords, dir.vec))
                        .value;
                CHECK((fd - qv).norm() <= 1e-5 * (1.0 + qv.norm()));
            }
        }
    }
    SUBCASE("tangential pair on the ellipsoid constraint manifold") {
        const Matrix d = diag({1, 4, 9});
        auto c = [d](const Vector& x) {
            Vector r(1);
            r(0) = x.dot(d * x) - 1.0;
            return r;
        };
        auto cj = [d](const Vector& x) {
            Matrix j(1, 3);
            j.row(0) = 2.0 * (d * x).transpose();
            return j;
        };
        const Manifold ell = constraint_manifold(3, 1, c, cj);
        const Matrix a = spd_a3();
        NewtonProblem pb;
        pb.domain = ell;
        pb.base = ell;
        pb.kind = BundleKind::Tangent;
        pb.identity_base = true;
        pb.fibre_dim = 3;
        pb.fibre_value = [a, ell](const Vector& x) {
            return Vector(ell.projector(x) * (a * x));
        };
        pb.ambient_derivative = [a, ell](const Vector& x, const Vector& dx) {
            return Vector(ell.projector_derivative(x, dx) * (a * x) + ell.projector(x) * (a * dx));
        };
        pb.base_map = [](const Vector& x) { return Point(x); };
        const ConnectionMap q = make_connection(ConnectionKind::Tangential);
        const Point x0 = pt({1, 0, 0});
        for (int trial = 0; trial < 5; ++trial) {
            const TangentVector dir = random_tangent(rng, ell, x0);
            const Vector fd = fd_covariant_derivative(pb, TransportKind::Projection, x0, dir);
            const Vector qv =
                connection_apply(q, pb, x0, dir, pb.ambient_derivative(x0.coords, dir.vec)).value;
            CHECK((fd - qv).norm() <= 1e-5 * (1.0 + qv.norm()));
        }
    }
}

TEST_CASE("connection linearity in the direction") {
    std::mt19937 rng(107);
    const NewtonProblem pb = rayleigh_vector_field(random_symmetric(rng, 5));
    const ConnectionMap q = make_connection(ConnectionKind::Tangential);
    const Point x = random_point(rng, pb.domain);
    const Vector e = pb.fibre_value(x.coords);
    auto apply = [&](const Vector& d) {
        return connection_apply(q, pb, x, TangentVector(x, d),
                                pb.ambient_derivative(x.coords, d), &e)
            .value;
    };
    for (int trial = 0; trial < 20; ++trial) {
        const Vector u = random_tangent(rng, pb.domain, x).vec;
        const Vector v = random_tangent(rng, pb.domain, x).vec;
        std::uniform_real_distribution<double> coef(-2.0, 2.0);
        const double alpha = coef(rng), beta = coef(rng);
        const Vector lhs = apply(alpha * u + beta * v);
        const Vector rhs = alpha * apply(u) + beta * apply(v);
        CHECK((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm() + rhs.norm()));
    }
}

TEST_CASE("projection-retraction connections coincide on the round sphere") {
    // The metric projection retraction is second order: its derived
    // connection equals the tangential one, on both bundle sides. The
    // contrast between inconsistent pairings therefore needs the biased
    // retraction (next test case).
    std::mt19937 rng(109);
    const Matrix a = random_symmetric(rng, 3);
    const NewtonProblem vf = rayleigh_vector_field(a);
    const NewtonProblem fn = rayleigh_functional(a);
    const Point x = random_point(rng, vf.domain);
    const TangentVector dir = random_tangent(rng, vf.domain, x);
    {
        const Vector fd = vf.ambient_derivative(x.coords, dir.vec);
        const Vector vt =
            connection_apply(make_connection(ConnectionKind::Tangential), vf, x, dir, fd).value;
        const Vector vr =
            connection_apply(make_connection(ConnectionKind::RetractionDerived), vf, x, dir, fd)
                .value;
        CHECK((vt - vr).norm() <= 1e-9 * (1.0 + vt.norm()));
    }
    {
        const Vector fd = fn.ambient_derivative(x.coords, dir.vec);
        const Vector wt =
            connection_apply(make_connection(ConnectionKind::DualTangential), fn, x, dir, fd)
                .value;
        const Vector wr =
            connection_apply(make_connection(ConnectionKind::DualRetraction), fn, x, dir, fd)
                .value;
        CHECK((wt - wr).norm() <= 1e-9 * (1.0 + wt.norm()));
    }
}

TEST_CASE("biased retraction produces a genuinely different connection") {
    Vector bias = vec({1, 1, 1});
    bias /= bias.norm();
    const NewtonProblem pb = rayleigh_vector_field(spd_a3(), biased_sphere(3, bias));
    std::mt19937 rng(113);
    const Point x = random_point(rng, pb.domain);
    const TangentVector dir = random_tangent(rng, pb.domain, x);
    const Vector fd = pb.ambient_derivative(x.coords, dir.vec);
    const Vector vt =
        connection_apply(make_connection(ConnectionKind::Tangential), pb, x, dir, fd).value;
    const Vector vr =
        connection_apply(make_connection(ConnectionKind::RetractionDerived), pb, x, dir, fd)
            .value;
    CHECK((vt - vr).norm() >= 1e-4);

    // the inconsistent pairing fails the fd consistency statement
    const Vector fd_proj = fd_covariant_derivative(pb, TransportKind::Projection, x, dir);
    CHECK((fd_proj -
           connection_apply(make_connection(ConnectionKind::RetractionDerived), pb, x, dir, fd)
               .value)
              .norm() >= 1e-4);
}

TEST_CASE("lagrange connection equals the projector-derivative route") {
    const Vector b = vec({2, 0, 0});
    const NewtonProblem pb = closest_point_constrained(b);
    const ConnectionMap lagr = lagrange_connection(*pb.lagrange);
    const ConnectionMap dual = make_connection(ConnectionKind::DualTangential);
    std::mt19937 rng(127);
    for (int trial = 0; trial < 10; ++trial) {
        const Point x = random_point(rng, pb.domain);
        const TangentVector dir = random_tangent(rng, pb.domain, x);
        const Vector fd = pb.ambient_derivative(x.coords, dir.vec);
        const Vector via_lagrange = connection_apply(lagr, pb, x, dir, fd).value;
        const Vector via_projector = connection_apply(dual, pb, x, dir, fd).value;
        CHECK((via_lagrange - via_projector).norm() <= 1e-6 * (1.0 + via_lagrange.norm()));
    }
}
