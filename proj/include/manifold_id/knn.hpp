#pragma once

#include <vector>

#include "manifold_id/data.hpp"

namespace manifold_id {

struct NeighborSet {
    Eigen::Index query = 0;
    std::vector<Eigen::Index> indices;   // sorted by (distance, index)
    std::vector<double> distances;       // euclidean, non-decreasing
};

// Full m x m matrix of squared euclidean distances, zero diagonal. Shares its
// accumulation kernel with k_nearest so the two agree bit-for-bit.
Eigen::MatrixXd pairwise_sq_distances(const EmbeddingMatrix& Z);

// k nearest neighbors of row `query` (query itself excluded). Ties broken by
// smaller row index. Requires 1 <= k <= m-1.
NeighborSet k_nearest(const EmbeddingMatrix& Z, Eigen::Index query, int k);

} // namespace manifold_id
