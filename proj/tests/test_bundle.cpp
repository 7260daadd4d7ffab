#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "test_helpers.hpp"
#include "vbn/vbn.hpp"

using namespace vbn;
using vbn_test::diag;
using vbn_test::pt;
using vbn_test::unit_pt;
using vbn_test::vec;

namespace {

/// FD Hessian of the pullback f o R_x on a tangent basis; the independent
/// oracle behind the Newton-SQP equivalence checks.
Matrix fd_pullback_hessian(const Manifold& m, const std::function<double(const Vector&)>& f,
                           const Point& x, const TangentBasis& basis, double h = 2e-4) {
    const int d = basis.dim();
    auto g = [&](const Vector& v) { return f(m.retract(x.coords, v)); };
    Matrix hess(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j) {
            const Vector bi = basis.columns.col(i), bj = basis.columns.col(j);
            const double v = (g(h * bi + h * bj) - g(h * bi - h * bj) - g(-h * bi + h * bj) +
                              g(-h * bi - h * bj)) /
                             (4.0 * h * h);
            hess(i, j) = v;
            hess(j, i) = v;
        }
    return hess;
}

}  // namespace

TEST_CASE("evaluate the Rayleigh vector field") {
    const NewtonProblem pb = rayleigh_vector_field(diag({3, 2, 1}));

    SUBCASE("eigenvector gives the zero element") {
        const FibreElement fe = evaluate(pb, pt({1, 0, 0}));
        CHECK(fe.norm() <= 1e-15);
        CHECK(fe.base_y.coords == vec({1, 0, 0}));
        CHECK(fe.kind == BundleKind::Tangent);
    }
    SUBCASE("mixed point, frozen arithmetic") {
        const double s = 1.0 / std::sqrt(2.0);
        const FibreElement fe = evaluate(pb, pt({s, s, 0}));
        // independent projector route: (I - xx')Ax computed entrywise
        const Vector x = vec({s, s, 0});
        const Vector ax = vec({3 * s, 2 * s, 0});
        const Vector oracle = ax - x * (x(0) * ax(0) + x(1) * ax(1) + x(2) * ax(2));
        CHECK(fe.value.isApprox(oracle, 1e-15));
        CHECK(fe.value.isApprox(vec({0.5 * s, -0.5 * s, 0}), 1e-14));
    }
    SUBCASE("residual norm of the mixed point is one half") {
        const double s = 1.0 / std::sqrt(2.0);
        CHECK(residual_norm(pb, pt({s, s, 0})) == doctest::Approx(0.5).epsilon(1e-13));
    }
}

TEST_CASE("evaluate the Rayleigh functional") {
    const NewtonProblem pb = rayleigh_functional(diag({3, 2, 1}));
    const FibreElement fe = evaluate(pb, pt({0, 0, 1}));
    CHECK(fe.kind == BundleKind::Cotangent);
    CHECK(fe.norm() <= 1e-15);  // stationary point: zero covector
}

TEST_CASE("residual norm is homogeneous on trivial problems") {
    std::mt19937 rng(131);
    const Matrix m = random_symmetric(rng, 3) + 4.0 * Matrix::Identity(3, 3);
    const Vector b = random_vector(rng, 3);
    const NewtonProblem one = affine_trivial(m, b);
    const NewtonProblem two = affine_trivial(Matrix(2.0 * m), Vector(2.0 * b));
    const Point x(random_vector(rng, 3));
    CHECK(residual_norm(two, x) == doctest::Approx(2.0 * residual_norm(one, x)).epsilon(1e-12));
    CHECK(residual_norm(one, Point(Vector(m.partialPivLu().solve(b)))) <= 1e-12);
}

TEST_CASE("user callback failures surface as EvaluationFailure") {
    NewtonProblem pb = rayleigh_vector_field(diag({3, 2, 1}));
    pb.fibre_value = [](const Vector&) -> Vector {
        throw std::runtime_error("user code exploded");
    };
    CHECK_THROWS_AS(evaluate(pb, pt({1, 0, 0})), EvaluationFailure);
}

TEST_CASE("base coherence on random points") {
    std::mt19937 rng(137);
    const NewtonProblem pb = rayleigh_vector_field(random_symmetric(rng, 6));
    for (int trial = 0; trial < 20; ++trial) {
        const Point x = random_point(rng, pb.domain);
        const FibreElement fe = evaluate(pb, x);
        CHECK((fe.base_y.coords - base_point(pb, x).coords).norm() <= pb.base.membership_tol);
    }
}

TEST_CASE("multiplier solve for the closest-point problem") {
    const NewtonProblem pb = closest_point_constrained(vec({2, 0, 0}));

    SUBCASE("closed form at the solution") {
        // oracle: lambda(x) = (b.x - 1)/2 from the normal-space condition,
        // so lambda(e1) = 1/2; substituting back annihilates the gradient on
        // the normal space
        const Vector lam = solve_multiplier(*pb.lagrange, vec({1, 0, 0}));
        CHECK(lam(0) == doctest::Approx(0.5).epsilon(1e-14));
        const Vector g = pb.lagrange->objective_gradient(vec({1, 0, 0}));
        const Matrix j = pb.lagrange->constraint_jacobian(vec({1, 0, 0}));
        CHECK((g + j.transpose() * lam).dot(vec({1, 0, 0})) <= 1e-14);
    }
    SUBCASE("normal-space stationarity at random feasible points") {
        std::mt19937 rng(139);
        for (int trial = 0; trial < 20; ++trial) {
            const Point x = random_point(rng, pb.domain);
            const Vector lam = solve_multiplier(*pb.lagrange, x.coords);
            const Vector g = pb.lagrange->objective_gradient(x.coords);
            const Matrix j = pb.lagrange->constraint_jacobian(x.coords);
            const Matrix p = pb.domain.projector(x.coords);
            const Vector residual = (Matrix::Identity(3, 3) - p) * (g + j.transpose() * lam);
            CHECK(residual.norm() <= 1e-8);
        }
    }
}

TEST_CASE("newton operator of the Rayleigh field at an eigenvector") {
    const NewtonProblem pb = rayleigh_vector_field(diag({3, 2, 1}));
    const ConnectionMap q = make_connection(ConnectionKind::Tangential);
    const Point e1 = pt({1, 0, 0});
    const NewtonOperator op = newton_operator(pb, q, e1);

    // analytic covariant derivative P(x)(A - (x'Ax) I) on T_{e1} = span{e2,e3}
    CHECK(op.dim() == 2);
    Matrix expected = Matrix::Zero(2, 2);
    expected(0, 0) = 2.0 - 3.0;
    expected(1, 1) = 1.0 - 3.0;
    CHECK((op.reduced - expected).norm() <= 1e-12);

    SUBCASE("zero probe maps to zero") {
        const Vector out = op.reduced * Vector(Vector::Zero(2));
        CHECK(out.norm() == 0.0);
    }
    SUBCASE("action agrees with connection_apply on probes") {
        std::mt19937 rng(149);
        for (int trial = 0; trial < 5; ++trial) {
            const Vector z = random_vector(rng, 2);
            const TangentVector dir(e1, Vector(op.basis.columns * z));
            const Vector applied =
                connection_apply(q, pb, e1, dir, pb.ambient_derivative(e1.coords, dir.vec)).value;
            CHECK((op.fibre_basis.columns.transpose() * applied - op.reduced * z).norm() <= 1e-12);
        }
    }
}

TEST_CASE("operator-derivative consistency for smooth problems") {
    std::mt19937 rng(151);
    const NewtonProblem pb = rayleigh_vector_field(random_symmetric(rng, 5));
    const ConnectionMap q = make_connection(ConnectionKind::Tangential);
    for (int trial = 0; trial < 5; ++trial) {
        const Point x = random_point(rng, pb.domain);
        const NewtonOperator op = newton_operator(pb, q, x);
        const TangentVector dir = random_tangent(rng, pb.domain, x);
        const Vector fd = fd_covariant_derivative(pb, TransportKind::Projection, x, dir);
        const Vector via_op = op.fibre_basis.columns *
                              Vector(op.reduced * Vector(op.basis.columns.transpose() * dir.vec));
        CHECK((via_op - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
    }
}

TEST_CASE("lagrange operator matches the pullback Hessian") {
    const Vector b = vec({2, 0, 0});
    const NewtonProblem pb = closest_point_constrained(b);
    const ConnectionMap q = lagrange_connection(*pb.lagrange);
    auto f = [b](const Vector& z) { return 0.5 * (z - b).squaredNorm(); };
    std::mt19937 rng(157);
    for (int trial = 0; trial < 5; ++trial) {
        const Point x = random_point(rng, pb.domain);
        const NewtonOperator op = newton_operator(pb, q, x);
        const Matrix oracle = fd_pullback_hessian(pb.domain, f, x, op.basis);
        CHECK((op.reduced - oracle).norm() <= 1e-5 * (1.0 + oracle.norm()));
    }
}

TEST_CASE("newton-SQP equivalence for the Rayleigh functional") {
    const Matrix a = diag({3, 2, 1});
    const NewtonProblem pb = rayleigh_functional(a);
    const ConnectionMap q = make_connection(ConnectionKind::DualRetraction);
    auto f = [a](const Vector& z) { return 0.5 * z.dot(a * z); };
    std::mt19937 rng(163);
    for (int trial = 0; trial < 5; ++trial) {
        const Point x = random_point(rng, pb.domain);
        const NewtonOperator op = newton_operator(pb, q, x);
        const Matrix oracle = fd_pullback_hessian(pb.domain, f, x, op.basis);
        const TangentVector dx = random_tangent(rng, pb.domain, x);
        const Vector z = op.basis.columns.transpose() * dx.vec;
        CHECK((op.reduced * z - oracle * z).norm() <= 1e-5 * (1.0 + dx.norm()));
    }
}
