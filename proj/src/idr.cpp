#include "manifold_id/idr.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "manifold_id/errors.hpp"

namespace manifold_id {

namespace {

void validate_ids(const std::vector<double>& ids) {
    if (ids.empty()) throw InvalidArgument("id vector is empty");
    for (double v : ids)
        if (!std::isfinite(v) || v <= 0.0)
            throw InvalidArgument("ids must be positive and finite");
}

// ln of the log-sum-exp denominator ln(sum_j e^{1/ID_j}).
double smooth_denominator(const std::vector<double>& ids) {
    double sum_exp = 0.0;
    for (double v : ids) sum_exp += std::exp(1.0 / v);
    double denom = std::log(sum_exp);
    if (!(denom > 0.0))
        throw EstimationError("smooth L_ID denominator is non-positive");
    return denom;
}

} // namespace

void IdrConfig::validate() const {
    if (!(alpha > 1.0)) throw InvalidArgument("idr alpha must be > 1");
    if (warmup_epochs < 1) throw InvalidArgument("idr warmup_epochs must be >= 1");
    if (batch_size < 1) throw InvalidArgument("idr batch_size must be >= 1");
}

std::vector<double> hard_l_id_terms(const std::vector<double>& ids) {
    validate_ids(ids);
    double min_id = *std::min_element(ids.begin(), ids.end());
    std::vector<double> terms(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        terms[i] = std::log(ids[i] / min_id);  // -ln(ID_i^{-1} / max_j ID_j^{-1})
    return terms;
}

double hard_l_id(const std::vector<double>& ids) {
    double total = 0.0;
    for (double t : hard_l_id_terms(ids)) total += t;
    return total;
}

std::vector<double> smooth_l_id_terms(const std::vector<double>& ids) {
    validate_ids(ids);
    double denom = smooth_denominator(ids);
    std::vector<double> terms(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        terms[i] = std::log(denom) + std::log(ids[i]);  // -ln(ID_i^{-1} / denom)
    return terms;
}

double smooth_l_id(const std::vector<double>& ids) {
    double total = 0.0;
    for (double t : smooth_l_id_terms(ids)) total += t;
    return total;
}

double schedule_weight(int epoch, double alpha) {
    if (epoch < 1) throw InvalidArgument("epoch must be >= 1");
    if (!(alpha > 1.0)) throw InvalidArgument("schedule alpha must be > 1");
    return std::log(static_cast<double>(epoch)) / std::log(alpha);
}

CombinedLoss combined_loss(double l_orig, double l_id, int epoch, const IdrConfig& cfg) {
    cfg.validate();
    if (!std::isfinite(l_orig) || l_orig <= 0.0)
        throw InvalidArgument("combined loss needs a positive finite original loss");
    if (!std::isfinite(l_id) || l_id < 0.0)
        throw InvalidArgument("l_id must be finite and non-negative");
    CombinedLoss out;
    if (l_id == 0.0) {  // nothing to balance against
        out.total = l_orig;
        out.effective_weight = 0.0;
        return out;
    }
    // The l_orig/l_id ratio is a gradient-stopped scalar: constant per step.
    out.effective_weight = schedule_weight(epoch, cfg.alpha) * (l_orig / l_id);
    out.total = l_orig + out.effective_weight * l_id;
    return out;
}

CovarianceQueue::CovarianceQueue(int class_count, Eigen::Index dim, int capacity,
                                 Eigen::Index total_samples)
    : dim_(dim), capacity_(capacity), total_samples_(total_samples) {
    if (class_count < 1) throw InvalidArgument("queue needs at least one class");
    if (dim < 1) throw InvalidArgument("queue dimension must be >= 1");
    if (capacity < 1) throw InvalidArgument("queue capacity must be >= 1");
    if (total_samples < 1) throw InvalidArgument("queue total_samples must be >= 1");
    fifos_.resize(class_count);
}

void CovarianceQueue::check_class(int class_id) const {
    if (class_id < 0 || class_id >= class_count())
        throw InvalidArgument("class id " + std::to_string(class_id) + " outside [0, " +
                              std::to_string(class_count()) + ")");
}

void CovarianceQueue::push(int class_id, const EmbeddingMatrix& batch_embeddings) {
    check_class(class_id);
    if (batch_embeddings.rows() == 0) return;
    if (batch_embeddings.cols() != dim_)
        throw InvalidArgument("batch dimension " + std::to_string(batch_embeddings.cols()) +
                              " does not match queue dimension " + std::to_string(dim_));
    if (!batch_embeddings.allFinite())
        throw DataError("batch embeddings contain non-finite values");
    auto& fifo = fifos_[class_id];
    fifo.push_back(batch_embeddings.transpose() * batch_embeddings);
    if (static_cast<int>(fifo.size()) > capacity_) fifo.pop_front();
}

Eigen::MatrixXd CovarianceQueue::aggregate(int class_id) const {
    check_class(class_id);
    const auto& fifo = fifos_[class_id];
    if (fifo.empty())
        throw NotWarmedUpError("class " + std::to_string(class_id) + " has no stored batches");
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(dim_, dim_);
    for (const auto& entry : fifo) sum += entry;
    return sum / static_cast<double>(total_samples_);
}

Eigen::MatrixXd CovarianceQueue::aggregate_substituted(
    int class_id, const EmbeddingMatrix& batch_embeddings) const {
    check_class(class_id);
    const auto& fifo = fifos_[class_id];
    if (fifo.empty())
        throw NotWarmedUpError("class " + std::to_string(class_id) + " has no stored batches");
    if (batch_embeddings.rows() > 0 && batch_embeddings.cols() != dim_)
        throw InvalidArgument("batch dimension does not match queue dimension");
    // Mirrors what push() is about to do: evict the oldest entry only when the
    // FIFO is full, otherwise just add the batch contribution.
    std::size_t first = fifo.size() == static_cast<std::size_t>(capacity_) ? 1 : 0;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(dim_, dim_);
    for (std::size_t j = first; j < fifo.size(); ++j) sum += fifo[j];
    if (batch_embeddings.rows() > 0)
        sum += batch_embeddings.transpose() * batch_embeddings;
    return sum / static_cast<double>(total_samples_);
}

bool CovarianceQueue::warmed() const {
    for (const auto& fifo : fifos_)
        if (fifo.empty()) return false;
    return true;
}

int CovarianceQueue::size(int class_id) const {
    check_class(class_id);
    return static_cast<int>(fifos_[class_id].size());
}

IdrBatchTerm idr_batch_term(const LabeledEmbeddings& batch, const CovarianceQueue& q,
                            const IdrConfig& cfg) {
    batch.validate();
    if (batch.class_count != q.class_count())
        throw InvalidArgument("batch class count does not match queue");
    if (batch.dim() != q.dim())
        throw InvalidArgument("batch dimension does not match queue");
    if (!q.warmed()) throw NotWarmedUpError("covariance queue has an empty class FIFO");

    const int C = batch.class_count;
    const Eigen::Index p = batch.dim();
    const double N = static_cast<double>(q.total_samples());

    std::vector<std::vector<Eigen::Index>> rows_of(C);
    for (Eigen::Index i = 0; i < batch.sample_count(); ++i)
        rows_of[batch.labels[i]].push_back(i);

    // Per-class substituted second moments and their traces.
    std::vector<Eigen::MatrixXd> S(C);
    std::vector<Eigen::MatrixXd> A(C);  // batch rows per class (may be empty)
    std::vector<double> t1(C), t2(C);
    IdrBatchTerm out;
    out.ids.resize(C);
    for (int c = 0; c < C; ++c) {
        const auto& rows = rows_of[c];
        if (!rows.empty()) {
            A[c].resize(static_cast<Eigen::Index>(rows.size()), p);
            for (std::size_t t = 0; t < rows.size(); ++t) A[c].row(t) = batch.embeddings.row(rows[t]);
            S[c] = q.aggregate_substituted(c, A[c]);
        } else {
            S[c] = q.aggregate(c);
        }
        t1[c] = S[c].trace();
        t2[c] = S[c].squaredNorm();
        double id = t1[c] * t1[c] / t2[c];
        if (!std::isfinite(id) || id <= 0.0)
            throw EstimationError("class " + std::to_string(c) +
                                  ": substituted second moment has undefined ID");
        out.ids[c] = id;
    }

    // dL/dID_c for the configured loss.
    std::vector<double> dl_did(C);
    if (cfg.smooth) {
        double sum_exp = 0.0;
        for (int c = 0; c < C; ++c) sum_exp += std::exp(1.0 / out.ids[c]);
        double denom = std::log(sum_exp);
        if (!(denom > 0.0)) throw EstimationError("smooth L_ID denominator is non-positive");
        out.l_id = 0.0;
        for (int c = 0; c < C; ++c) out.l_id += std::log(denom) + std::log(out.ids[c]);
        for (int c = 0; c < C; ++c) {
            double id = out.ids[c];
            dl_did[c] = 1.0 / id -
                        C * std::exp(1.0 / id) / (denom * sum_exp * id * id);
        }
    } else {
        int argmin = 0;
        for (int c = 1; c < C; ++c)
            if (out.ids[c] < out.ids[argmin]) argmin = c;
        double min_id = out.ids[argmin];
        out.l_id = 0.0;
        for (int c = 0; c < C; ++c) out.l_id += std::log(out.ids[c] / min_id);
        for (int c = 0; c < C; ++c)
            dl_did[c] = (c == argmin) ? (1.0 - C) / out.ids[c] : 1.0 / out.ids[c];
    }

    // dID_c/dA_c = (4/N) (t1/t2 A - (t1/t2)^2 A S); historical entries are
    // constants, so only the class's own batch rows receive gradient.
    out.gradient = Eigen::MatrixXd::Zero(batch.sample_count(), p);
    for (int c = 0; c < C; ++c) {
        const auto& rows = rows_of[c];
        if (rows.empty()) continue;
        double ratio = t1[c] / t2[c];
        Eigen::MatrixXd grad_a =
            dl_did[c] * (4.0 / N) * (ratio * A[c] - ratio * ratio * (A[c] * S[c]));
        if (!grad_a.allFinite())
            throw EstimationError("class " + std::to_string(c) + ": non-finite gradient");
        for (std::size_t t = 0; t < rows.size(); ++t)
            out.gradient.row(rows[t]) = grad_a.row(t);
    }
    return out;
}

Eigen::MatrixXd l_id_gradient(const LabeledEmbeddings& batch, const CovarianceQueue& q,
                              const IdrConfig& cfg) {
    return idr_batch_term(batch, q, cfg).gradient;
}

} // namespace manifold_id
