#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>

namespace vbn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

/// Retraction formula is singular at the requested argument (e.g. x+v = 0
/// under metric projection on the sphere).
struct DegenerateRetraction : Error {
    using Error::Error;
};

/// Target point lies outside the region where the inverse retraction is
/// well defined.
struct OutOfInjectivityRegion : Error {
    using Error::Error;
};

/// A transport operator is not invertible between the requested tangent
/// spaces.
struct SingularTransport : Error {
    using Error::Error;
};

/// Connection kind and bundle kind do not fit together.
struct UnsupportedKind : Error {
    using Error::Error;
};

/// Propagated failure from user-supplied problem callbacks.
struct EvaluationFailure : Error {
    using Error::Error;
};

/// Numerical rank of a projector does not match the declared intrinsic
/// dimension.
struct RankDeficiency : Error {
    using Error::Error;
};

/// Reduced Newton matrix is singular or too ill-conditioned to trust.
struct SingularNewtonOperator : Error {
    using Error::Error;
};

/// theta is requested for a vanishing Newton direction.
struct ZeroNewtonDirection : Error {
    using Error::Error;
};

struct InvalidConfig : Error {
    using Error::Error;
};

/// A point of an embedded manifold, stored in ambient coordinates.
struct Point {
    Vector coords;

    Point() = default;
    explicit Point(Vector c) : coords(std::move(c)) {}

    [[nodiscard]] int dim() const { return static_cast<int>(coords.size()); }
};

inline bool same_point(const Point& a, const Point& b) {
    return a.coords.size() == b.coords.size() && a.coords == b.coords;
}

/// Tangent vector at a base point, in ambient coordinates.
struct TangentVector {
    Point base;
    Vector vec;

    TangentVector() = default;
    TangentVector(Point b, Vector v) : base(std::move(b)), vec(std::move(v)) {}

    [[nodiscard]] double norm() const { return vec.norm(); }
};

/// Covector at a base point. The representation acts by the Euclidean
/// pairing and is kept canonical: the normal component is removed.
struct Covector {
    Point base;
    Vector row;

    Covector() = default;
    Covector(Point b, Vector r) : base(std::move(b)), row(std::move(r)) {}

    [[nodiscard]] double norm() const { return row.norm(); }
};

inline void require_dim(const Vector& v, int n, const char* what) {
    if (static_cast<int>(v.size()) != n)
        throw DimensionMismatch(std::string(what) + ": expected size " + std::to_string(n) +
                                ", got " + std::to_string(v.size()));
}

}  // namespace vbn
