#pragma once

#include <string>

#include "manifold_id/data.hpp"
#include "manifold_id/knn.hpp"

namespace manifold_id {

enum class IdMethod { Mle, Tle, Pr };

IdMethod id_method_from_string(const std::string& name);
std::string to_string(IdMethod method);

struct IdEstimate {
    double value = 0.0;
    IdMethod method = IdMethod::Mle;
    int k = 0;                       // 0 for PR (no neighborhood)
    Eigen::Index sample_count = 0;   // samples the estimate averages over
    Eigen::Index excluded_count = 0; // degenerate neighborhoods dropped
    bool quality_warning = false;    // more than 10% of samples excluded
};

// Levina-Bickel MLE at one sample: -(mean_j ln(r_j / r_k))^{-1} over the k
// neighbor distances. Throws DuplicateCollapseError when r_k == 0 and
// DegenerateNeighborhoodError when all r_j == r_k.
double mle_local(const EmbeddingMatrix& Z, Eigen::Index query, int k);

// Tight local estimator at one sample. Neighbors at distance zero are dropped
// first (fewer than two left -> DuplicateCollapseError). Each ordered pair of
// a viewpoint v in {neighbors, query} and a target neighbor w != v yields two
// log terms (direct and through the mirrored viewpoint 2q - v); degenerate
// terms are skipped, and the estimate is the negated count of surviving terms
// over their log-sum. No usable terms or a non-negative log-sum ->
// DegenerateNeighborhoodError.
double tle_local(const EmbeddingMatrix& Z, Eigen::Index query, int k);

// Average of local estimates over all samples, excluding (and counting)
// degenerate neighborhoods. quality_warning is set when exclusions exceed 10%
// of m; all samples excluded -> EstimationError. `threads` only shards the
// per-sample loop; the reduction order is fixed, so results are bit-identical
// for any thread count. method must be Mle or Tle.
IdEstimate global_id(const EmbeddingMatrix& Z, int k, IdMethod method, int threads = 1);

// (tr S)^2 / tr(S^2) for a symmetric matrix. Asymmetry beyond 1e-8 relative
// or a negative diagonal -> InvalidArgument; zero matrix -> EstimationError.
double participation_ratio(const Eigen::MatrixXd& second_moment);

// PR of Z's second-moment matrix Z^T Z (optionally after centering; PR is
// invariant to any positive scaling of S). Materializes whichever of Z^T Z
// and Z Z^T is smaller -- both have the same nonzero spectrum. Centered with
// m == 1 degenerates to the zero matrix and throws EstimationError.
double pr_from_embeddings(const EmbeddingMatrix& Z, bool centered = false);

} // namespace manifold_id
