#pragma once

#include <random>

#include "vbn/manifold.hpp"
#include "vbn/types.hpp"

namespace vbn {

inline Vector random_vector(std::mt19937& rng, int n) {
    std::normal_distribution<double> g;
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = g(rng);
    return v;
}

inline Matrix random_symmetric(std::mt19937& rng, int n) {
    std::normal_distribution<double> g;
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            a(i, j) = g(rng);
            a(j, i) = a(i, j);
        }
    return a;
}

/// Generic random point: projects a Gaussian ambient vector onto the
/// manifold via the retraction machinery.
inline Point random_point(std::mt19937& rng, const Manifold& m) {
    for (int attempt = 0; attempt < 16; ++attempt) {
        try {
            return project_point(m, random_vector(rng, m.ambient_dim));
        } catch (const Error&) {
            // degenerate draw (e.g. near-zero vector); try again
        }
    }
    throw Error("random_point: could not produce a feasible point");
}

inline TangentVector random_tangent(std::mt19937& rng, const Manifold& m, const Point& x,
                                    double scale = 1.0) {
    const Vector raw = m.projector(x.coords) * random_vector(rng, m.ambient_dim);
    const double nr = raw.norm();
    if (nr < 1e-12) return TangentVector(x, Vector(Vector::Zero(m.ambient_dim)));
    return TangentVector(x, Vector(scale * raw / nr));
}

/// Seeded random perturbation of a base point: retracts a random unit
/// tangent vector scaled by `magnitude`.
inline Point perturbed_point(std::mt19937& rng, const Manifold& m, const Point& base,
                             double magnitude) {
    return retract(m, base, random_tangent(rng, m, base, magnitude));
}

}  // namespace vbn
