#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "manifold_id/data.hpp"
#include "manifold_id/idr.hpp"

namespace manifold_id {

// Fully-connected tanh network; the last hidden layer is the embedding layer
// the estimators and IDR operate on.
struct MlpModel {
    std::vector<int> sizes;                // input, hidden..., output
    std::vector<Eigen::MatrixXd> weights;  // weights[l] is sizes[l+1] x sizes[l]
    std::vector<Eigen::VectorXd> biases;   // biases[l] has sizes[l+1] entries

    int input_dim() const { return sizes.front(); }
    int output_dim() const { return sizes.back(); }
    Eigen::Index param_count() const;
    void validate() const;
};

// Seeded scaled-uniform init (U(-a, a), a = sqrt(6/(fan_in+fan_out))), zero
// biases. Same seed -> bit-identical model.
MlpModel init_model(const std::vector<int>& sizes, std::uint64_t seed);

// Activations of the final hidden layer; identity for a zero-hidden model.
EmbeddingMatrix forward_embed(const MlpModel& model, const EmbeddingMatrix& X);

// Classifier outputs (pre-softmax), one row per sample.
Eigen::MatrixXd forward_logits(const MlpModel& model, const EmbeddingMatrix& X);

// Mean softmax cross-entropy over the batch plus analytic parameter
// gradients (same shapes as weights/biases).
double ce_loss_and_grad(const MlpModel& model, const EmbeddingMatrix& X,
                        const std::vector<int>& y,
                        std::vector<Eigen::MatrixXd>& grad_w,
                        std::vector<Eigen::VectorXd>& grad_b);

// Per-class accuracy; argmax ties go to the smaller class index. Throws
// DataError when a class in [0, class_count) is absent.
std::vector<double> evaluate(const MlpModel& model, const LabeledEmbeddings& data);

struct TrainConfig {
    int epochs = 0;
    int batch_size = 64;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
    std::vector<int> hidden_sizes = {32};
    std::optional<IdrConfig> idr;
    int snapshot_every = 0;  // 0 = no embedding snapshots

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;                // 1-based
    double train_loss = 0.0;      // mean per-batch cross-entropy
    double l_id = 0.0;            // mean per-batch L_ID (0 while inactive)
    double effective_weight = 0.0;
    double dataset_pr = 0.0;      // uncentered PR of train-split embeddings
    std::vector<double> class_id;       // per-class uncentered PR, train split
    std::vector<double> class_accuracy; // held-out split
    double overall_accuracy = 0.0;      // held-out split
    double if_id = 0.0;
    double if_acc = 0.0;          // +inf when the worst class accuracy is 0
    double acc_std = 0.0;         // population std of class accuracies
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
};

struct TrainResult {
    MlpModel model;
    TrainLog log;
};

// Deterministic 80/20 class-stratified row split; both sides get at least one
// sample of every class (requires every class count >= 2).
struct SplitIndices {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
};
SplitIndices stratified_split(const std::vector<int>& labels, int class_count,
                              double train_fraction, std::uint64_t seed);

// epoch (1-based), model after the epoch's updates, train-split embeddings.
using SnapshotFn =
    std::function<void(int, const MlpModel&, const EmbeddingMatrix&)>;

// SGD + softmax cross-entropy on an internal stratified 80/20 split, with
// optional IDR: warm-up epochs only feed the covariance queue; from epoch
// K+1 on, the scheduled L_ID gradient is injected at the embedding layer.
// Without IDR (or through epoch K) behavior is plain SGD, bit-for-bit.
// Divergence (non-finite loss) throws TrainingError naming the epoch.
TrainResult train(const LabeledEmbeddings& data, const TrainConfig& cfg,
                  const SnapshotFn& on_snapshot = nullptr);

} // namespace manifold_id
