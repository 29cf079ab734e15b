#include "manifold_id/data.hpp"

#include <string>

#include "manifold_id/errors.hpp"

namespace manifold_id {

void validate_embeddings(const EmbeddingMatrix& Z) {
    if (Z.rows() < 1 || Z.cols() < 1)
        throw DataError("embedding matrix must have at least one row and one column");
    if (!Z.allFinite())
        throw DataError("embedding matrix contains non-finite values");
}

void LabeledEmbeddings::validate() const {
    validate_embeddings(embeddings);
    if (class_count < 1)
        throw DataError("class_count must be positive");
    if (static_cast<Eigen::Index>(labels.size()) != embeddings.rows())
        throw DataError("labels length " + std::to_string(labels.size()) +
                        " does not match sample count " + std::to_string(embeddings.rows()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= class_count)
            throw DataError("label " + std::to_string(labels[i]) + " at row " +
                            std::to_string(i) + " outside [0, " +
                            std::to_string(class_count) + ")");
    }
}

std::vector<Eigen::Index> class_counts(const LabeledEmbeddings& data) {
    data.validate();
    std::vector<Eigen::Index> counts(data.class_count, 0);
    for (int label : data.labels) ++counts[label];
    return counts;
}

std::vector<EmbeddingMatrix> partition_by_class(const LabeledEmbeddings& data) {
    auto counts = class_counts(data);
    for (int c = 0; c < data.class_count; ++c) {
        if (counts[c] == 0)
            throw DataError("class " + std::to_string(c) + " has no samples");
    }
    std::vector<EmbeddingMatrix> parts;
    parts.reserve(data.class_count);
    for (int c = 0; c < data.class_count; ++c)
        parts.emplace_back(counts[c], data.embeddings.cols());
    std::vector<Eigen::Index> next(data.class_count, 0);
    for (Eigen::Index i = 0; i < data.embeddings.rows(); ++i) {
        int c = data.labels[i];
        parts[c].row(next[c]++) = data.embeddings.row(i);
    }
    return parts;
}

} // namespace manifold_id
