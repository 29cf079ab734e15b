#include "manifold_id/knn.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "manifold_id/errors.hpp"

namespace manifold_id {

namespace {

// Single accumulation kernel shared by both entry points so their distances
// agree bit-for-bit.
inline double row_sq_distance(const EmbeddingMatrix& Z, Eigen::Index i, Eigen::Index j) {
    return (Z.row(i) - Z.row(j)).squaredNorm();
}

} // namespace

Eigen::MatrixXd pairwise_sq_distances(const EmbeddingMatrix& Z) {
    validate_embeddings(Z);
    Eigen::Index m = Z.rows();
    Eigen::MatrixXd D(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        D(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < m; ++j) {
            double d2 = row_sq_distance(Z, i, j);
            D(i, j) = d2;
            D(j, i) = d2;
        }
    }
    return D;
}

NeighborSet k_nearest(const EmbeddingMatrix& Z, Eigen::Index query, int k) {
    validate_embeddings(Z);
    Eigen::Index m = Z.rows();
    if (query < 0 || query >= m)
        throw InvalidArgument("query index " + std::to_string(query) + " outside [0, " +
                              std::to_string(m) + ")");
    if (k < 1 || k > m - 1)
        throw InvalidArgument("k = " + std::to_string(k) + " must satisfy 1 <= k <= m-1 = " +
                              std::to_string(m - 1));

    std::vector<std::pair<double, Eigen::Index>> order;
    order.reserve(m - 1);
    for (Eigen::Index j = 0; j < m; ++j) {
        if (j == query) continue;
        order.emplace_back(row_sq_distance(Z, query, j), j);
    }
    // Pair comparison also breaks distance ties by the smaller sample index.
    std::partial_sort(order.begin(), order.begin() + k, order.end());

    NeighborSet result;
    result.query = query;
    result.indices.reserve(k);
    result.distances.reserve(k);
    for (int j = 0; j < k; ++j) {
        result.indices.push_back(order[j].second);
        result.distances.push_back(std::sqrt(order[j].first));
    }
    return result;
}

} // namespace manifold_id
