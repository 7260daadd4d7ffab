#pragma once

#include <Eigen/SVD>

#include "vbn/manifold.hpp"
#include "vbn/types.hpp"

namespace vbn {

/// Orthonormal basis of the tangent space at a point, as matrix columns.
struct TangentBasis {
    Point base;
    Matrix columns;  // ambient_dim x intrinsic_dim

    [[nodiscard]] int dim() const { return static_cast<int>(columns.cols()); }
};

/// Deterministic tangent basis: SVD of P(x), columns ordered by descending
/// singular value, sign fixed by making the first nonzero entry positive.
inline TangentBasis tangent_basis(const Manifold& m, const Point& x) {
    check_point(m, x, "tangent_basis");
    const Matrix p = m.projector(x.coords);
    Eigen::JacobiSVD<Matrix> svd(p, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    const int d = m.intrinsic_dim;
    const int n = m.ambient_dim;
    int rank = 0;
    for (int i = 0; i < n; ++i)
        if (sv(i) > 0.5) ++rank;
    if (rank != d)
        throw RankDeficiency("tangent_basis: projector rank " + std::to_string(rank) +
                             " != intrinsic dimension " + std::to_string(d));
    Matrix cols = svd.matrixU().leftCols(d);
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < n; ++i) {
            if (std::abs(cols(i, j)) > 1e-12) {
                if (cols(i, j) < 0.0) cols.col(j) = -cols.col(j);
                break;
            }
        }
    }
    return TangentBasis{x, cols};
}

}  // namespace vbn
