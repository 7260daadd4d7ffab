#include <doctest.h>

#include <cmath>
#include <random>

#include "test_helpers.hpp"
#include "vbn/vbn.hpp"

using namespace vbn;
using vbn_test::diag;
using vbn_test::pt;
using vbn_test::vec;

TEST_CASE("newton path residual") {
    const NewtonProblem pb = rayleigh_vector_field(diag({3, 2, 1}));
    const ConnectionMap q = make_connection(ConnectionKind::Tangential);
    std::mt19937 rng(227);

    SUBCASE("zero at the path start") {
        const Point x0 = random_point(rng, pb.domain);
        CHECK(newton_path_residual(pb, TransportKind::Projection, x0, x0, 0.0) <= 1e-14);
    }
    SUBCASE("zero at a zero of F with lambda one") {
        const Point x0 = perturbed_point(rng, pb.domain, pt({1, 0, 0}), 0.3);
        CHECK(newton_path_residual(pb, TransportKind::Projection, x0, pt({1, 0, 0}), 1.0) <=
              1e-14);
    }
    SUBCASE("second order in lambda after one damped step") {
        const Point x0 = perturbed_point(rng, pb.domain, pt({1, 0, 0}), 0.3);
        const TangentVector dx = newton_direction(pb, q, x0);
        auto residual_at = [&](double lambda) {
            const Point xp =
                retract(pb.domain, x0, TangentVector(x0, Vector(lambda * dx.vec)));
            return newton_path_residual(pb, TransportKind::Projection, x0, xp, lambda);
        };
        const double r1 = residual_at(0.05);
        const double r2 = residual_at(0.025);
        const double r3 = residual_at(0.0125);
        const double order12 = std::log2(r1 / r2);
        const double order23 = std::log2(r2 / r3);
        CHECK(order12 >= 1.9);
        CHECK(order23 >= 1.9);
    }
}

TEST_CASE("tangency of the damped step") {
    const Matrix a = diag({3, 2, 1});
    std::mt19937 rng(229);
    std::uniform_real_distribution<double> unif(0.05, 1.0);

    SUBCASE("consistent pairing: first path direction equals lambda dx") {
        const NewtonProblem pb = rayleigh_vector_field(a);
        const ConnectionMap q = make_connection(ConnectionKind::Tangential);
        for (int trial = 0; trial < 25; ++trial) {
            const Point x = random_point(rng, pb.domain);
            const double lambda = unif(rng);
            CHECK(tangency_deviation(pb, q, TransportKind::Projection, x, lambda) <= 1e-10);
        }
    }
    SUBCASE("consistent retraction pairing on the biased sphere") {
        Vector bias = vec({1, 1, 1});
        bias /= bias.norm();
        const NewtonProblem pb = rayleigh_vector_field(a, biased_sphere(3, bias));
        const ConnectionMap q = make_connection(ConnectionKind::RetractionDerived);
        for (int trial = 0; trial < 5; ++trial) {
            const Point x = random_point(rng, pb.domain);
            CHECK(tangency_deviation(pb, q, TransportKind::Retraction, x, unif(rng)) <= 1e-10);
        }
    }
    SUBCASE("inconsistent pairing fails by a measurable margin") {
        Vector bias = vec({1, 1, 1});
        bias /= bias.norm();
        const NewtonProblem pb = rayleigh_vector_field(a, biased_sphere(3, bias));
        const ConnectionMap q = make_connection(ConnectionKind::RetractionDerived);
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            const Point x = random_point(rng, pb.domain);
            worst = std::max(worst,
                             tangency_deviation(pb, q, TransportKind::Projection, x, unif(rng)));
        }
        CHECK(worst >= 1e-4);
    }
}

TEST_CASE("differential newton path integration") {
    SUBCASE("constant trajectory from a zero of F") {
        const NewtonProblem pb = rayleigh_vector_field(diag({3, 2, 1}));
        const auto traj =
            integrate_differential_newton_path(pb, TransportKind::Projection, pt({1, 0, 0}), 8);
        for (const auto& p : traj) CHECK((p.coords - vec({1, 0, 0})).norm() <= 1e-12);
    }
    SUBCASE("affine problems integrate to the one-shot Newton solution") {
        std::mt19937 rng(233);
        const Matrix m = random_symmetric(rng, 3) + 4.0 * Matrix::Identity(3, 3);
        const Vector b = random_vector(rng, 3);
        const NewtonProblem pb = affine_trivial(m, b);
        const Point x0(random_vector(rng, 3));
        const auto traj =
            integrate_differential_newton_path(pb, TransportKind::Identity, x0, 16);
        const Vector oracle = m.partialPivLu().solve(b);
        CHECK((traj.back().coords - oracle).norm() <= 1e-6);
    }
    SUBCASE("rayleigh endpoint residual and fourth-order self-convergence") {
        const NewtonProblem pb = rayleigh_vector_field(diag({3, 2, 1}));
        std::mt19937 rng(239);
        const Point x0 = perturbed_point(rng, pb.domain, pt({1, 0, 0}), 0.4);
        const auto t64 =
            integrate_differential_newton_path(pb, TransportKind::Projection, x0, 64);
        CHECK(residual_norm(pb, t64.back()) <= 1e-4);
        const auto t128 =
            integrate_differential_newton_path(pb, TransportKind::Projection, x0, 128);
        const auto ref =
            integrate_differential_newton_path(pb, TransportKind::Projection, x0, 512);
        const double e64 = (t64.back().coords - ref.back().coords).norm();
        const double e128 = (t128.back().coords - ref.back().coords).norm();
        CHECK(e64 / e128 >= 8.0);
    }
}
