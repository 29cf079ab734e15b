#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace manifold_id {

// One row per sample, one column per embedding dimension. Values are kept in
// double precision in memory; the on-disk EMB1 payload is float32.
using EmbeddingMatrix = Eigen::MatrixXd;

// Throws DataError if Z has zero rows/columns or contains NaN/Inf.
void validate_embeddings(const EmbeddingMatrix& Z);

struct LabeledEmbeddings {
    EmbeddingMatrix embeddings;
    std::vector<int> labels;  // labels[i] in [0, class_count)
    int class_count = 0;

    Eigen::Index sample_count() const { return embeddings.rows(); }
    Eigen::Index dim() const { return embeddings.cols(); }

    // Throws DataError on shape/label inconsistencies or non-finite values.
    void validate() const;
};

// Number of samples per class; labels must already be valid.
std::vector<Eigen::Index> class_counts(const LabeledEmbeddings& data);

// Splits rows by class, preserving the original row order inside each class.
// Throws DataError if any class in [0, class_count) has no samples.
std::vector<EmbeddingMatrix> partition_by_class(const LabeledEmbeddings& data);

} // namespace manifold_id
