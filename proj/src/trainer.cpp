#include "manifold_id/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "manifold_id/errors.hpp"
#include "manifold_id/estimators.hpp"

namespace manifold_id {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Activations per layer: [0] = input, then post-tanh hidden layers, last =
// raw logits.
std::vector<Eigen::MatrixXd> forward_all(const MlpModel& model, const EmbeddingMatrix& X) {
    if (X.cols() != model.input_dim())
        throw InvalidArgument("input has " + std::to_string(X.cols()) + " columns, model expects " +
                              std::to_string(model.input_dim()));
    std::size_t layers = model.weights.size();
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(layers + 1);
    acts.push_back(X);
    for (std::size_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd z =
            (acts.back() * model.weights[l].transpose()).rowwise() + model.biases[l].transpose();
        if (l + 1 < layers) z = z.array().tanh();
        acts.push_back(std::move(z));
    }
    return acts;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp();
    return p.array().colwise() / p.rowwise().sum().array();
}

struct EvalCounts {
    std::vector<Eigen::Index> correct;
    std::vector<Eigen::Index> total;
};

EvalCounts evaluate_counts(const MlpModel& model, const LabeledEmbeddings& data) {
    data.validate();
    if (data.class_count != model.output_dim())
        throw InvalidArgument("data has " + std::to_string(data.class_count) +
                              " classes, model outputs " + std::to_string(model.output_dim()));
    Eigen::MatrixXd logits = forward_all(model, data.embeddings).back();
    EvalCounts counts{std::vector<Eigen::Index>(data.class_count, 0),
                      std::vector<Eigen::Index>(data.class_count, 0)};
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        int best = 0;  // strict > keeps argmax ties at the smaller class index
        for (int c = 1; c < data.class_count; ++c)
            if (logits(i, c) > logits(i, best)) best = c;
        ++counts.total[data.labels[i]];
        if (best == data.labels[i]) ++counts.correct[data.labels[i]];
    }
    return counts;
}

LabeledEmbeddings take_rows(const LabeledEmbeddings& data, const std::vector<Eigen::Index>& rows) {
    LabeledEmbeddings out;
    out.embeddings.resize(static_cast<Eigen::Index>(rows.size()), data.embeddings.cols());
    out.labels.resize(rows.size());
    out.class_count = data.class_count;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        out.embeddings.row(static_cast<Eigen::Index>(t)) = data.embeddings.row(rows[t]);
        out.labels[t] = data.labels[rows[t]];
    }
    return out;
}

double pr_or_nan(const EmbeddingMatrix& Z) {
    try {
        return pr_from_embeddings(Z, false);
    } catch (const EstimationError&) {
        return kNan;
    }
}

} // namespace

Eigen::Index MlpModel::param_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
        n += static_cast<Eigen::Index>(sizes[l + 1]) * sizes[l] + sizes[l + 1];
    return n;
}

void MlpModel::validate() const {
    if (sizes.size() < 2) throw InvalidArgument("model needs at least input and output layers");
    for (int s : sizes)
        if (s < 1) throw InvalidArgument("layer sizes must be positive");
    if (weights.size() != sizes.size() - 1 || biases.size() != sizes.size() - 1)
        throw InvalidArgument("model has inconsistent layer counts");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        if (weights[l].rows() != sizes[l + 1] || weights[l].cols() != sizes[l] ||
            biases[l].size() != sizes[l + 1])
            throw InvalidArgument("layer " + std::to_string(l) + " has inconsistent shapes");
        if (!weights[l].allFinite() || !biases[l].allFinite())
            throw InvalidArgument("layer " + std::to_string(l) + " has non-finite parameters");
    }
}

MlpModel init_model(const std::vector<int>& sizes, std::uint64_t seed) {
    if (sizes.size() < 2)
        throw InvalidArgument("init_model needs at least input and output sizes");
    for (int s : sizes)
        if (s < 1) throw InvalidArgument("layer sizes must be positive");
    MlpModel model;
    model.sizes = sizes;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        int fan_in = sizes[l];
        int fan_out = sizes[l + 1];
        double a = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> uniform(-a, a);
        Eigen::MatrixXd W(fan_out, fan_in);
        for (int i = 0; i < fan_out; ++i)
            for (int j = 0; j < fan_in; ++j) W(i, j) = uniform(rng);
        model.weights.push_back(std::move(W));
        model.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return model;
}

EmbeddingMatrix forward_embed(const MlpModel& model, const EmbeddingMatrix& X) {
    model.validate();
    if (X.cols() != model.input_dim())
        throw InvalidArgument("input has " + std::to_string(X.cols()) + " columns, model expects " +
                              std::to_string(model.input_dim()));
    if (model.weights.size() == 1) return X;  // zero hidden layers: identity
    auto acts = forward_all(model, X);
    return acts[acts.size() - 2];  // input to the classifier layer
}

Eigen::MatrixXd forward_logits(const MlpModel& model, const EmbeddingMatrix& X) {
    model.validate();
    return forward_all(model, X).back();
}

double ce_loss_and_grad(const MlpModel& model, const EmbeddingMatrix& X,
                        const std::vector<int>& y, std::vector<Eigen::MatrixXd>& grad_w,
                        std::vector<Eigen::VectorXd>& grad_b) {
    model.validate();
    if (static_cast<Eigen::Index>(y.size()) != X.rows())
        throw InvalidArgument("label count does not match batch rows");
    auto acts = forward_all(model, X);
    const Eigen::MatrixXd& logits = acts.back();
    const Eigen::Index batch = X.rows();
    const int C = model.output_dim();
    for (int label : y)
        if (label < 0 || label >= C) throw InvalidArgument("label outside [0, C)");

    Eigen::MatrixXd probs = softmax_rows(logits);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) loss -= std::log(probs(i, y[i]));
    loss /= static_cast<double>(batch);

    Eigen::MatrixXd delta = probs;
    for (Eigen::Index i = 0; i < batch; ++i) delta(i, y[i]) -= 1.0;
    delta /= static_cast<double>(batch);

    std::size_t layers = model.weights.size();
    grad_w.assign(layers, Eigen::MatrixXd());
    grad_b.assign(layers, Eigen::VectorXd());
    for (std::size_t l = layers; l-- > 0;) {
        grad_w[l] = delta.transpose() * acts[l];
        grad_b[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd back = delta * model.weights[l];
            delta = back.cwiseProduct((1.0 - acts[l].array().square()).matrix());
        }
    }
    return loss;
}

std::vector<double> evaluate(const MlpModel& model, const LabeledEmbeddings& data) {
    EvalCounts counts = evaluate_counts(model, data);
    std::vector<double> acc(data.class_count);
    for (int c = 0; c < data.class_count; ++c) {
        if (counts.total[c] == 0)
            throw DataError("class " + std::to_string(c) + " absent from evaluation data");
        acc[c] = static_cast<double>(counts.correct[c]) / static_cast<double>(counts.total[c]);
    }
    return acc;
}

SplitIndices stratified_split(const std::vector<int>& labels, int class_count,
                              double train_fraction, std::uint64_t seed) {
    if (class_count < 1) throw InvalidArgument("class_count must be positive");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InvalidArgument("train_fraction must be in (0, 1)");
    std::vector<std::vector<Eigen::Index>> by_class(class_count);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= class_count)
            throw InvalidArgument("label outside [0, class_count)");
        by_class[labels[i]].push_back(static_cast<Eigen::Index>(i));
    }
    std::mt19937_64 rng(seed);
    SplitIndices split;
    for (int c = 0; c < class_count; ++c) {
        auto& rows = by_class[c];
        if (rows.size() < 2)
            throw DataError("class " + std::to_string(c) +
                            " needs at least two samples to land on both split sides");
        std::shuffle(rows.begin(), rows.end(), rng);
        auto n = static_cast<Eigen::Index>(rows.size());
        Eigen::Index take = std::llround(train_fraction * static_cast<double>(n));
        // Both sides keep at least one sample.
        take = std::clamp<Eigen::Index>(take, 1, n - 1);
        for (Eigen::Index t = 0; t < n; ++t)
            (t < take ? split.train : split.test).push_back(rows[t]);
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

TrainResult train(const LabeledEmbeddings& data, const TrainConfig& cfg,
                  const SnapshotFn& on_snapshot) {
    data.validate();
    cfg.validate();
    const int C = data.class_count;
    const int p = static_cast<int>(data.dim());

    std::vector<int> sizes;
    sizes.push_back(p);
    for (int h : cfg.hidden_sizes) sizes.push_back(h);
    sizes.push_back(C);

    TrainResult result;
    result.model = init_model(sizes, cfg.seed);
    if (cfg.epochs == 0) return result;

    SplitIndices split = stratified_split(data.labels, C, 0.8, cfg.seed);
    LabeledEmbeddings train_data = take_rows(data, split.train);
    LabeledEmbeddings test_data = take_rows(data, split.test);
    const Eigen::Index train_m = train_data.sample_count();

    // IDR bookkeeping. The queue's capacity is one epoch of iterations and
    // its scale constant is the training-set size.
    std::optional<IdrConfig> idr;
    std::optional<CovarianceQueue> queue;
    int embed_dim = sizes[sizes.size() - 2];
    if (cfg.idr) {
        if (cfg.hidden_sizes.empty())
            throw InvalidArgument("IDR needs at least one hidden layer to regularize");
        idr = *cfg.idr;
        idr->batch_size = cfg.batch_size;  // one loop cannot honor two batch sizes
        idr->validate();
        int iterations = static_cast<int>((train_m + cfg.batch_size - 1) / cfg.batch_size);
        queue.emplace(C, embed_dim, iterations, train_m);
    }

    std::mt19937_64 shuffle_rng(cfg.seed);
    std::vector<Eigen::Index> order(train_m);
    for (Eigen::Index i = 0; i < train_m; ++i) order[i] = i;

    MlpModel& model = result.model;
    const std::size_t layers = model.weights.size();
    const std::size_t embed_act = layers - 1;  // index into acts of the embedding

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double sum_l_orig = 0.0, sum_l_id = 0.0, sum_weight = 0.0;
        int batches = 0;
        bool idr_active = idr && epoch > idr->warmup_epochs;

        for (Eigen::Index start = 0; start < train_m; start += cfg.batch_size) {
            Eigen::Index nb = std::min<Eigen::Index>(cfg.batch_size, train_m - start);
            LabeledEmbeddings batch = take_rows(
                train_data, std::vector<Eigen::Index>(order.begin() + start,
                                                      order.begin() + start + nb));
            auto acts = forward_all(model, batch.embeddings);
            Eigen::MatrixXd probs = softmax_rows(acts.back());
            double l_orig = 0.0;
            for (Eigen::Index i = 0; i < nb; ++i) l_orig -= std::log(probs(i, batch.labels[i]));
            l_orig /= static_cast<double>(nb);
            if (!std::isfinite(l_orig))
                throw TrainingError("training diverged at epoch " + std::to_string(epoch));
            sum_l_orig += l_orig;
            ++batches;

            // Embedding-layer gradient injection for the regularizer.
            Eigen::MatrixXd idr_grad;
            double idr_weight = 0.0;
            LabeledEmbeddings emb_batch;
            if (idr) {
                emb_batch.embeddings = acts[embed_act];
                emb_batch.labels = batch.labels;
                emb_batch.class_count = C;
            }
            if (idr_active) {
                IdrBatchTerm term = idr_batch_term(emb_batch, *queue, *idr);
                CombinedLoss combined = combined_loss(l_orig, term.l_id, epoch, *idr);
                idr_weight = combined.effective_weight;
                idr_grad = idr_weight * term.gradient;
                sum_l_id += term.l_id;
                sum_weight += idr_weight;
            }
            if (idr) {
                for (int c = 0; c < C; ++c) {
                    std::vector<Eigen::Index> rows;
                    for (Eigen::Index i = 0; i < nb; ++i)
                        if (batch.labels[i] == c) rows.push_back(i);
                    if (rows.empty()) continue;
                    EmbeddingMatrix slice(static_cast<Eigen::Index>(rows.size()), embed_dim);
                    for (std::size_t t = 0; t < rows.size(); ++t)
                        slice.row(static_cast<Eigen::Index>(t)) = emb_batch.embeddings.row(rows[t]);
                    queue->push(c, slice);
                }
            }

            Eigen::MatrixXd delta = probs;
            for (Eigen::Index i = 0; i < nb; ++i) delta(i, batch.labels[i]) -= 1.0;
            delta /= static_cast<double>(nb);
            std::vector<Eigen::MatrixXd> grad_w(layers);
            std::vector<Eigen::VectorXd> grad_b(layers);
            for (std::size_t l = layers; l-- > 0;) {
                grad_w[l] = delta.transpose() * acts[l];
                grad_b[l] = delta.colwise().sum().transpose();
                if (l > 0) {
                    Eigen::MatrixXd back = delta * model.weights[l];
                    if (idr_active && l == embed_act) back += idr_grad;
                    delta = back.cwiseProduct((1.0 - acts[l].array().square()).matrix());
                }
            }
            for (std::size_t l = 0; l < layers; ++l) {
                model.weights[l] -= cfg.learning_rate * grad_w[l];
                model.biases[l] -= cfg.learning_rate * grad_b[l];
            }
        }

        // Epoch instrumentation: IDs on the train split, accuracy held out.
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = sum_l_orig / batches;
        rec.l_id = idr_active ? sum_l_id / batches : 0.0;
        rec.effective_weight = idr_active ? sum_weight / batches : 0.0;

        EmbeddingMatrix train_emb = forward_embed(model, train_data.embeddings);
        rec.dataset_pr = pr_or_nan(train_emb);
        LabeledEmbeddings train_emb_labeled{train_emb, train_data.labels, C};
        rec.class_id.resize(C);
        auto parts = partition_by_class(train_emb_labeled);
        for (int c = 0; c < C; ++c) rec.class_id[c] = pr_or_nan(parts[c]);

        EvalCounts counts = evaluate_counts(model, test_data);
        rec.class_accuracy.resize(C);
        Eigen::Index correct = 0, total = 0;
        for (int c = 0; c < C; ++c) {
            if (counts.total[c] == 0)
                throw TrainingError("class " + std::to_string(c) + " missing from held-out split");
            rec.class_accuracy[c] =
                static_cast<double>(counts.correct[c]) / static_cast<double>(counts.total[c]);
            correct += counts.correct[c];
            total += counts.total[c];
        }
        rec.overall_accuracy = static_cast<double>(correct) / static_cast<double>(total);

        bool ids_ok = true;
        for (double v : rec.class_id)
            if (!std::isfinite(v) || v <= 0.0) ids_ok = false;
        double min_id = ids_ok ? *std::min_element(rec.class_id.begin(), rec.class_id.end()) : 0;
        double max_id = ids_ok ? *std::max_element(rec.class_id.begin(), rec.class_id.end()) : 0;
        rec.if_id = ids_ok ? max_id / min_id : kNan;

        double min_acc = *std::min_element(rec.class_accuracy.begin(), rec.class_accuracy.end());
        double max_acc = *std::max_element(rec.class_accuracy.begin(), rec.class_accuracy.end());
        rec.if_acc = min_acc > 0.0 ? max_acc / min_acc : kInf;

        double mean_acc = 0.0;
        for (double a : rec.class_accuracy) mean_acc += a;
        mean_acc /= C;
        double var = 0.0;
        for (double a : rec.class_accuracy) var += (a - mean_acc) * (a - mean_acc);
        rec.acc_std = std::sqrt(var / C);

        result.log.epochs.push_back(std::move(rec));

        if (on_snapshot && cfg.snapshot_every > 0 &&
            (epoch % cfg.snapshot_every == 0 || epoch == cfg.epochs))
            on_snapshot(epoch, model, train_emb);
    }
    return result;
}

void TrainConfig::validate() const {
    if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw InvalidArgument("learning_rate must be positive");
    if (snapshot_every < 0) throw InvalidArgument("snapshot_every must be >= 0");
    for (int h : hidden_sizes)
        if (h < 1) throw InvalidArgument("hidden sizes must be positive");
    if (idr) idr->validate();
}

} // namespace manifold_id
