#include "manifold_id/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "manifold_id/errors.hpp"

namespace manifold_id {

IdMethod id_method_from_string(const std::string& name) {
    if (name == "mle") return IdMethod::Mle;
    if (name == "tle") return IdMethod::Tle;
    if (name == "pr") return IdMethod::Pr;
    throw InvalidArgument("unknown estimator method '" + name + "'");
}

std::string to_string(IdMethod method) {
    switch (method) {
        case IdMethod::Mle: return "mle";
        case IdMethod::Tle: return "tle";
        case IdMethod::Pr: return "pr";
    }
    throw InvalidArgument("invalid estimator method");
}

namespace {

constexpr double kPairEps = 1e-12;

// Neighbors at distance zero dropped (duplicates); remaining distances stay
// ascending so the k-th radius is the last element.
struct RetainedNeighbors {
    std::vector<Eigen::Index> indices;
    std::vector<double> distances;
    double radius = 0.0;
};

RetainedNeighbors retain_nonzero(const NeighborSet& nn) {
    if (nn.distances.empty() || nn.distances.back() <= 0.0)
        throw DuplicateCollapseError("sample " + std::to_string(nn.query) +
                                     ": k-th neighbor distance is zero");
    RetainedNeighbors kept;
    for (std::size_t j = 0; j < nn.distances.size(); ++j) {
        if (nn.distances[j] > 0.0) {
            kept.indices.push_back(nn.indices[j]);
            kept.distances.push_back(nn.distances[j]);
        }
    }
    if (kept.distances.size() < 2)
        throw DuplicateCollapseError("sample " + std::to_string(nn.query) +
                                     ": fewer than two distinct neighbors after dropping duplicates");
    kept.radius = kept.distances.back();
    return kept;
}

double mle_from_neighbors(const NeighborSet& nn) {
    RetainedNeighbors kept = retain_nonzero(nn);
    double sum = 0.0;
    for (double d : kept.distances) sum += std::log(d / kept.radius);
    if (sum == 0.0)
        throw DegenerateNeighborhoodError("sample " + std::to_string(nn.query) +
                                          ": all neighbor distances equal the k-th radius");
    return -static_cast<double>(kept.distances.size()) / sum;
}

// Tight local estimator. Viewpoints are the retained neighbors plus the query
// itself; targets are the retained neighbors. Every ordered viewpoint/target
// pair contributes a direct term and a mirrored-viewpoint (2q - v) term; the
// pair estimate is the positive root of (r^2 - Di^2) t^2 + (Di^2 + M^2 -
// Dj^2) t - M^2 = 0 in units of the k-th radius r, falling back to the linear
// form M^2 / B when the quadratic degenerates (viewpoint on the r-sphere).
double tle_from_neighbors(const EmbeddingMatrix& Z, const NeighborSet& nn) {
    RetainedNeighbors kept = retain_nonzero(nn);
    const double r = kept.radius;
    const double r2 = r * r;
    const Eigen::Index kk = static_cast<Eigen::Index>(kept.indices.size());
    const Eigen::Index n1 = kk + 1;  // + the query viewpoint

    // Points in prototype order: neighbors first, query last (distance 0).
    Eigen::MatrixXd P(n1, Z.cols());
    Eigen::VectorXd D2(n1);
    for (Eigen::Index t = 0; t < kk; ++t) {
        P.row(t) = Z.row(kept.indices[t]);
        D2(t) = kept.distances[t] * kept.distances[t];
    }
    P.row(kk) = Z.row(nn.query);
    D2(kk) = 0.0;

    Eigen::MatrixXd V2(n1, n1);
    for (Eigen::Index a = 0; a < n1; ++a) {
        V2(a, a) = 0.0;
        for (Eigen::Index b = a + 1; b < n1; ++b) {
            double d2 = (P.row(a) - P.row(b)).squaredNorm();
            V2(a, b) = d2;
            V2(b, a) = d2;
        }
    }

    double total = 0.0;
    long count = 0;
    auto accumulate = [&](double m2, double di2, double dj2) {
        double A = r2 - di2;
        double B = di2 + m2 - dj2;
        double t;  // estimate in units of r
        if (std::abs(A) < kPairEps * r2) {
            if (std::abs(B) <= kPairEps * r2) return;  // collinear/self pair
            t = m2 / B;
        } else {
            double disc = B * B + 4.0 * m2 * A;
            if (disc < 0.0) disc = 0.0;
            t = (std::sqrt(disc) - B) / (2.0 * A);
        }
        if (!std::isfinite(t) || t <= 0.0) return;
        total += std::log(t);
        ++count;
    };

    for (Eigen::Index v = 0; v < n1; ++v) {
        const double di2 = D2(v);
        for (Eigen::Index w = 0; w < kk; ++w) {
            if (v == w) continue;
            const double dj2 = D2(w);
            const double m2 = V2(v, w);
            // Mirrored viewpoint 2q - v: same Di, target distance from
            // ||2q - v - w||^2 = 2 Di^2 + 2 Dj^2 - M^2.
            const double m2_mirror = std::max(2.0 * di2 + 2.0 * dj2 - m2, 0.0);
            accumulate(m2, di2, dj2);
            accumulate(m2_mirror, di2, dj2);
        }
    }

    if (count == 0 || total >= 0.0)
        throw DegenerateNeighborhoodError("sample " + std::to_string(nn.query) +
                                          ": no usable pair estimates");
    return -static_cast<double>(count) / total;
}

double local_id(const EmbeddingMatrix& Z, Eigen::Index query, int k, IdMethod method) {
    if (k < 2) throw InvalidArgument("local estimators require k >= 2");
    NeighborSet nn = k_nearest(Z, query, k);
    return method == IdMethod::Mle ? mle_from_neighbors(nn) : tle_from_neighbors(Z, nn);
}

} // namespace

double mle_local(const EmbeddingMatrix& Z, Eigen::Index query, int k) {
    return local_id(Z, query, k, IdMethod::Mle);
}

double tle_local(const EmbeddingMatrix& Z, Eigen::Index query, int k) {
    return local_id(Z, query, k, IdMethod::Tle);
}

IdEstimate global_id(const EmbeddingMatrix& Z, int k, IdMethod method, int threads) {
    validate_embeddings(Z);
    if (method == IdMethod::Pr)
        throw InvalidArgument("global_id averages local estimators; use pr_from_embeddings");
    if (k < 2) throw InvalidArgument("local estimators require k >= 2");
    const Eigen::Index m = Z.rows();
    if (m < k + 1)
        throw InvalidArgument("global_id needs m >= k+1 samples, got m = " + std::to_string(m));

    std::vector<double> values(m, 0.0);
    std::vector<char> usable(m, 0);
    auto run_range = [&](Eigen::Index begin, Eigen::Index end) {
        for (Eigen::Index i = begin; i < end; ++i) {
            try {
                values[i] = local_id(Z, i, k, method);
                usable[i] = 1;
            } catch (const EstimationError&) {
                usable[i] = 0;  // degenerate neighborhood: excluded from the mean
            }
        }
    };

    int workers = std::clamp<int>(threads, 1, static_cast<int>(m));
    if (workers <= 1) {
        run_range(0, m);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        Eigen::Index chunk = (m + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            Eigen::Index begin = w * chunk;
            Eigen::Index end = std::min<Eigen::Index>(begin + chunk, m);
            pool.emplace_back([&, w, begin, end] {
                try {
                    run_range(begin, end);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    // Fixed-order reduction: results are identical for any thread count.
    double sum = 0.0;
    Eigen::Index used = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (usable[i]) {
            sum += values[i];
            ++used;
        }
    }
    if (used == 0) throw EstimationError("all samples have degenerate neighborhoods");

    IdEstimate est;
    est.value = sum / static_cast<double>(used);
    est.method = method;
    est.k = k;
    est.sample_count = m;
    est.excluded_count = m - used;
    est.quality_warning = 10 * est.excluded_count > m;
    return est;
}

double participation_ratio(const Eigen::MatrixXd& second_moment) {
    const Eigen::MatrixXd& S = second_moment;
    if (S.rows() < 1 || S.rows() != S.cols())
        throw InvalidArgument("second-moment matrix must be square and nonempty");
    if (!S.allFinite()) throw InvalidArgument("second-moment matrix contains non-finite values");
    double scale = S.cwiseAbs().maxCoeff();
    if (scale == 0.0) throw EstimationError("zero second-moment matrix has undefined ID");
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw InvalidArgument("second-moment matrix is not symmetric");
    if (S.diagonal().minCoeff() < -1e-12 * scale)
        throw InvalidArgument("second-moment matrix has a negative diagonal (not PSD)");
    double tr = S.trace();
    double tr_sq = S.squaredNorm();  // tr(S^2) for symmetric S
    return tr * tr / tr_sq;
}

double pr_from_embeddings(const EmbeddingMatrix& Z, bool centered) {
    validate_embeddings(Z);
    if (centered && Z.rows() < 2)
        throw EstimationError("centered PR of a single sample is the zero matrix");
    EmbeddingMatrix C;
    const EmbeddingMatrix* use = &Z;
    if (centered) {
        C = Z.rowwise() - Z.colwise().mean();
        use = &C;
    }
    if (use->cols() <= use->rows())
        return participation_ratio(use->transpose() * (*use));
    // Wide matrices: the gram matrix has the same nonzero spectrum.
    return participation_ratio((*use) * use->transpose());
}

} // namespace manifold_id
