#pragma once

#include <deque>
#include <vector>

#include "manifold_id/data.hpp"

namespace manifold_id {

struct IdrConfig {
    double alpha = 0.0;     // schedule base, > 1
    int warmup_epochs = 5;  // K: queue-only epochs before the loss activates
    int batch_size = 64;    // BS
    bool smooth = true;     // smooth vs hard L_ID

    void validate() const;  // throws InvalidArgument
};

// L_ID = sum_i -ln(ID_i^{-1} / max_j ID_j^{-1}). Non-negative; zero iff all
// IDs equal; the min-ID class contributes exactly 0.
double hard_l_id(const std::vector<double>& ids);

// L_ID^smooth = sum_i -ln(ID_i^{-1} / ln(sum_j e^{ID_j^{-1}})). The log-sum-exp
// denominator is >= 1/min_j ID_j, so every term dominates the matching hard
// term and the total is non-negative.
double smooth_l_id(const std::vector<double>& ids);

// Per-class terms of the losses above, for order/monotonicity diagnostics.
std::vector<double> hard_l_id_terms(const std::vector<double>& ids);
std::vector<double> smooth_l_id_terms(const std::vector<double>& ids);

// ln(epoch)/ln(alpha); zero at epoch 1, exactly 1 at epoch == alpha.
double schedule_weight(int epoch, double alpha);

struct CombinedLoss {
    double total = 0.0;
    double effective_weight = 0.0;
};

// total = l_orig + effective_weight * l_id with effective_weight =
// schedule_weight(epoch, alpha) * (l_orig / l_id), the ratio treated as a
// constant (no gradient flows through it). l_id == 0 turns the regularizer
// off; l_orig <= 0 throws InvalidArgument.
CombinedLoss combined_loss(double l_orig, double l_id, int epoch, const IdrConfig& cfg);

// Per-class FIFO of per-batch second-moment contributions Z_b^T Z_b (p x p).
// Capacity is the number of iterations per epoch; aggregates are scaled by
// 1/N with N the total dataset sample count (participation_ratio is invariant
// to that scaling, it only affects reported matrix values).
class CovarianceQueue {
  public:
    CovarianceQueue(int class_count, Eigen::Index dim, int capacity,
                    Eigen::Index total_samples);

    // Appends the batch slice's contribution for one class, evicting the
    // oldest entry at capacity. Zero rows -> no-op.
    void push(int class_id, const EmbeddingMatrix& batch_embeddings);

    // (1/N) * sum of stored matrices. Empty FIFO -> NotWarmedUpError.
    Eigen::MatrixXd aggregate(int class_id) const;

    // Aggregate as it will look after push(class_id, batch): at capacity the
    // oldest entry is dropped, below capacity the contribution is just added.
    // This is the quantity l_id_gradient differentiates through.
    Eigen::MatrixXd aggregate_substituted(int class_id,
                                          const EmbeddingMatrix& batch_embeddings) const;

    bool warmed() const;  // every class FIFO nonempty
    int size(int class_id) const;
    int capacity() const { return capacity_; }
    int class_count() const { return static_cast<int>(fifos_.size()); }
    Eigen::Index dim() const { return dim_; }
    Eigen::Index total_samples() const { return total_samples_; }

  private:
    void check_class(int class_id) const;

    std::vector<std::deque<Eigen::MatrixXd>> fifos_;
    Eigen::Index dim_ = 0;
    int capacity_ = 0;
    Eigen::Index total_samples_ = 0;
};

struct IdrBatchTerm {
    double l_id = 0.0;            // loss at the substituted aggregates
    std::vector<double> ids;      // per-class IDs entering the loss
    Eigen::MatrixXd gradient;     // dL_ID/dz, one row per batch sample
};

// Evaluates L_ID and its gradient w.r.t. the current batch embeddings. For
// classes present in the batch, ID_i comes from aggregate_substituted; other
// classes use the plain aggregate. Historical entries are constants: gradient
// flows only through the batch's own outer-product contribution, and batch
// rows of class i receive gradient only through ID_i. Requires a warmed
// queue; a non-finite intermediate throws EstimationError naming the class.
IdrBatchTerm idr_batch_term(const LabeledEmbeddings& batch, const CovarianceQueue& q,
                            const IdrConfig& cfg);

// Just the gradient matrix (same shape as batch.embeddings).
Eigen::MatrixXd l_id_gradient(const LabeledEmbeddings& batch, const CovarianceQueue& q,
                              const IdrConfig& cfg);

} // namespace manifold_id
