#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "manifold_id/analysis.hpp"
#include "manifold_id/errors.hpp"
#include "manifold_id/estimators.hpp"
#include "manifold_id/idr.hpp"
#include "manifold_id/io.hpp"
#include "manifold_id/knn.hpp"
#include "manifold_id/synthetic.hpp"
#include "manifold_id/trainer.hpp"

namespace py = pybind11;
using namespace manifold_id;

PYBIND11_MODULE(_core, m) {
    m.doc() = "intrinsic-dimension estimation, fairness analysis, and IDR training";

    // exception hierarchy; derived classes registered last so they match first
    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<FormatError>(m, "FormatError", base);
    py::register_exception<IoError>(m, "IoError", base);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base);
    py::register_exception<DataError>(m, "DataError", base);
    py::register_exception<TrainingError>(m, "TrainingError", base);
    py::register_exception<NotWarmedUpError>(m, "NotWarmedUpError", base);
    auto est_err = py::register_exception<EstimationError>(m, "EstimationError", base);
    py::register_exception<DegenerateNeighborhoodError>(m, "DegenerateNeighborhoodError",
                                                        est_err);
    py::register_exception<DuplicateCollapseError>(m, "DuplicateCollapseError", est_err);

    // ---- core data ---------------------------------------------------------
    py::class_<LabeledEmbeddings>(m, "LabeledEmbeddings")
        .def(py::init<>())
        .def_readwrite("embeddings", &LabeledEmbeddings::embeddings)
        .def_readwrite("labels", &LabeledEmbeddings::labels)
        .def_readwrite("class_count", &LabeledEmbeddings::class_count)
        .def("validate", &LabeledEmbeddings::validate)
        .def_property_readonly("sample_count", &LabeledEmbeddings::sample_count)
        .def_property_readonly("dim", &LabeledEmbeddings::dim);
    m.def("partition_by_class", &partition_by_class, py::arg("data"));

    py::enum_<ManifoldKind>(m, "ManifoldKind")
        .value("LINEAR_GAUSSIAN", ManifoldKind::LinearGaussian)
        .value("SPHERE", ManifoldKind::Sphere)
        .value("NONLINEAR_LIFT", ManifoldKind::NonlinearLift);

    py::class_<ClassSpec>(m, "ClassSpec")
        .def(py::init([](int intrinsic_dim, int ambient_dim, int samples, double noise_sigma,
                         ManifoldKind kind) {
                 return ClassSpec{intrinsic_dim, ambient_dim, samples, noise_sigma, kind};
             }),
             py::arg("intrinsic_dim"), py::arg("ambient_dim"), py::arg("samples"),
             py::arg("noise_sigma") = 0.0, py::arg("kind") = ManifoldKind::LinearGaussian)
        .def_readwrite("intrinsic_dim", &ClassSpec::intrinsic_dim)
        .def_readwrite("ambient_dim", &ClassSpec::ambient_dim)
        .def_readwrite("samples", &ClassSpec::samples)
        .def_readwrite("noise_sigma", &ClassSpec::noise_sigma)
        .def_readwrite("kind", &ClassSpec::kind);

    py::class_<SyntheticSpec>(m, "SyntheticSpec")
        .def(py::init([](std::vector<ClassSpec> classes, std::uint64_t seed) {
                 SyntheticSpec spec;
                 spec.classes = std::move(classes);
                 spec.seed = seed;
                 return spec;
             }),
             py::arg("classes"), py::arg("seed") = 0)
        .def_readwrite("classes", &SyntheticSpec::classes)
        .def_readwrite("seed", &SyntheticSpec::seed);
    m.def("generate_synthetic", &generate_synthetic, py::arg("spec"));

    m.def("read_embeddings", &read_embeddings, py::arg("path"));
    m.def("write_embeddings", &write_embeddings, py::arg("embeddings"), py::arg("path"));
    m.def("read_labels", &read_labels, py::arg("path"));
    m.def("write_labels", &write_labels, py::arg("labels"), py::arg("path"));

    // ---- knn ---------------------------------------------------------------
    py::class_<NeighborSet>(m, "NeighborSet")
        .def_readonly("query", &NeighborSet::query)
        .def_readonly("indices", &NeighborSet::indices)
        .def_readonly("distances", &NeighborSet::distances);
    m.def("k_nearest", &k_nearest, py::arg("embeddings"), py::arg("query"), py::arg("k"));
    m.def("pairwise_sq_distances", &pairwise_sq_distances, py::arg("embeddings"));

    // ---- estimators ---------------------------------------------------------
    py::enum_<IdMethod>(m, "IdMethod")
        .value("MLE", IdMethod::Mle)
        .value("TLE", IdMethod::Tle)
        .value("PR", IdMethod::Pr);

    py::class_<IdEstimate>(m, "IdEstimate")
        .def_readonly("value", &IdEstimate::value)
        .def_readonly("method", &IdEstimate::method)
        .def_readonly("k", &IdEstimate::k)
        .def_readonly("sample_count", &IdEstimate::sample_count)
        .def_readonly("excluded_count", &IdEstimate::excluded_count)
        .def_readonly("quality_warning", &IdEstimate::quality_warning)
        .def("__repr__", [](const IdEstimate& e) {
            return "IdEstimate(value=" + std::to_string(e.value) + ", method=" +
                   to_string(e.method) + ")";
        });

    m.def("mle_local", &mle_local, py::arg("embeddings"), py::arg("query"), py::arg("k"));
    m.def("tle_local", &tle_local, py::arg("embeddings"), py::arg("query"), py::arg("k"));
    m.def("global_id", &global_id, py::arg("embeddings"), py::arg("k"), py::arg("method"),
          py::arg("threads") = 1, py::call_guard<py::gil_scoped_release>());
    m.def("participation_ratio", &participation_ratio, py::arg("second_moment"));
    m.def("pr_from_embeddings", &pr_from_embeddings, py::arg("embeddings"),
          py::arg("centered") = false);

    // ---- idr -----------------------------------------------------------------
    py::class_<IdrConfig>(m, "IdrConfig")
        .def(py::init([](double alpha, int warmup_epochs, int batch_size, bool smooth) {
                 IdrConfig cfg;
                 cfg.alpha = alpha;
                 cfg.warmup_epochs = warmup_epochs;
                 cfg.batch_size = batch_size;
                 cfg.smooth = smooth;
                 return cfg;
             }),
             py::arg("alpha"), py::arg("warmup_epochs") = 5, py::arg("batch_size") = 64,
             py::arg("smooth") = true)
        .def_readwrite("alpha", &IdrConfig::alpha)
        .def_readwrite("warmup_epochs", &IdrConfig::warmup_epochs)
        .def_readwrite("batch_size", &IdrConfig::batch_size)
        .def_readwrite("smooth", &IdrConfig::smooth)
        .def("validate", &IdrConfig::validate);

    m.def("hard_l_id", &hard_l_id, py::arg("ids"));
    m.def("smooth_l_id", &smooth_l_id, py::arg("ids"));
    m.def("hard_l_id_terms", &hard_l_id_terms, py::arg("ids"));
    m.def("smooth_l_id_terms", &smooth_l_id_terms, py::arg("ids"));
    m.def("schedule_weight", &schedule_weight, py::arg("epoch"), py::arg("alpha"));
    m.def(
        "combined_loss",
        [](double l_orig, double l_id, int epoch, const IdrConfig& cfg) {
            CombinedLoss c = combined_loss(l_orig, l_id, epoch, cfg);
            return py::make_tuple(c.total, c.effective_weight);
        },
        py::arg("l_orig"), py::arg("l_id"), py::arg("epoch"), py::arg("config"));

    py::class_<CovarianceQueue>(m, "CovarianceQueue")
        .def(py::init<int, Eigen::Index, int, Eigen::Index>(), py::arg("class_count"),
             py::arg("dim"), py::arg("capacity"), py::arg("total_samples"))
        .def("push", &CovarianceQueue::push, py::arg("class_id"), py::arg("batch_embeddings"))
        .def("aggregate", &CovarianceQueue::aggregate, py::arg("class_id"))
        .def("aggregate_substituted", &CovarianceQueue::aggregate_substituted,
             py::arg("class_id"), py::arg("batch_embeddings"))
        .def("warmed", &CovarianceQueue::warmed)
        .def("size", &CovarianceQueue::size, py::arg("class_id"))
        .def_property_readonly("capacity", &CovarianceQueue::capacity)
        .def_property_readonly("class_count", &CovarianceQueue::class_count)
        .def_property_readonly("dim", &CovarianceQueue::dim)
        .def_property_readonly("total_samples", &CovarianceQueue::total_samples);

    py::class_<IdrBatchTerm>(m, "IdrBatchTerm")
        .def_readonly("l_id", &IdrBatchTerm::l_id)
        .def_readonly("ids", &IdrBatchTerm::ids)
        .def_readonly("gradient", &IdrBatchTerm::gradient);
    m.def("idr_batch_term", &idr_batch_term, py::arg("batch"), py::arg("queue"),
          py::arg("config"));
    m.def("l_id_gradient", &l_id_gradient, py::arg("batch"), py::arg("queue"),
          py::arg("config"));

    // ---- trainer --------------------------------------------------------------
    py::class_<MlpModel>(m, "MlpModel")
        .def_readwrite("sizes", &MlpModel::sizes)
        .def_readwrite("weights", &MlpModel::weights)
        .def_readwrite("biases", &MlpModel::biases)
        .def_property_readonly("param_count", &MlpModel::param_count)
        .def("validate", &MlpModel::validate);
    m.def("init_model", &init_model, py::arg("sizes"), py::arg("seed"));
    m.def("forward_embed", &forward_embed, py::arg("model"), py::arg("inputs"));
    m.def("forward_logits", &forward_logits, py::arg("model"), py::arg("inputs"));
    m.def("evaluate", &evaluate, py::arg("model"), py::arg("data"));
    m.def("model_to_json", &model_to_json, py::arg("model"));
    m.def("model_from_json", &model_from_json, py::arg("text"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init([](int epochs, int batch_size, double learning_rate, std::uint64_t seed,
                         std::vector<int> hidden_sizes, std::optional<IdrConfig> idr,
                         int snapshot_every) {
                 TrainConfig cfg;
                 cfg.epochs = epochs;
                 cfg.batch_size = batch_size;
                 cfg.learning_rate = learning_rate;
                 cfg.seed = seed;
                 cfg.hidden_sizes = std::move(hidden_sizes);
                 cfg.idr = idr;
                 cfg.snapshot_every = snapshot_every;
                 return cfg;
             }),
             py::arg("epochs"), py::arg("batch_size") = 64, py::arg("learning_rate") = 0.1,
             py::arg("seed") = 0, py::arg("hidden_sizes") = std::vector<int>{32},
             py::arg("idr") = std::nullopt, py::arg("snapshot_every") = 0)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("hidden_sizes", &TrainConfig::hidden_sizes)
        .def_readwrite("idr", &TrainConfig::idr)
        .def_readwrite("snapshot_every", &TrainConfig::snapshot_every)
        .def("validate", &TrainConfig::validate);

    py::class_<EpochRecord>(m, "EpochRecord")
        .def_readonly("epoch", &EpochRecord::epoch)
        .def_readonly("train_loss", &EpochRecord::train_loss)
        .def_readonly("l_id", &EpochRecord::l_id)
        .def_readonly("effective_weight", &EpochRecord::effective_weight)
        .def_readonly("dataset_pr", &EpochRecord::dataset_pr)
        .def_readonly("class_id", &EpochRecord::class_id)
        .def_readonly("class_accuracy", &EpochRecord::class_accuracy)
        .def_readonly("overall_accuracy", &EpochRecord::overall_accuracy)
        .def_readonly("if_id", &EpochRecord::if_id)
        .def_readonly("if_acc", &EpochRecord::if_acc)
        .def_readonly("acc_std", &EpochRecord::acc_std);

    py::class_<TrainLog>(m, "TrainLog").def_readonly("epochs", &TrainLog::epochs);
    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("model", &TrainResult::model)
        .def_readonly("log", &TrainResult::log);
    m.def(
        "train",
        [](const LabeledEmbeddings& data, const TrainConfig& cfg, const SnapshotFn& snap) {
            return train(data, cfg, snap);
        },
        py::arg("data"), py::arg("config"), py::arg("on_snapshot") = nullptr);
    m.def("stratified_split",
          [](const std::vector<int>& labels, int class_count, double train_fraction,
             std::uint64_t seed) {
              SplitIndices s = stratified_split(labels, class_count, train_fraction, seed);
              return py::make_tuple(s.train, s.test);
          },
          py::arg("labels"), py::arg("class_count"), py::arg("train_fraction"),
          py::arg("seed"));

    // ---- analysis ---------------------------------------------------------------
    m.def("pearson", &pearson, py::arg("x"), py::arg("y"));
    m.def("imbalance_factor", &imbalance_factor, py::arg("values"));
    m.def("accuracy_std", &accuracy_std, py::arg("accuracies"));
    m.def("layer_profile", &layer_profile, py::arg("files"), py::arg("k"), py::arg("method"),
          py::arg("centered") = false);

    py::class_<FairnessReport>(m, "FairnessReport")
        .def_readonly("class_ids", &FairnessReport::class_ids)
        .def_readonly("class_accuracies", &FairnessReport::class_accuracies)
        .def_readonly("if_id", &FairnessReport::if_id)
        .def_readonly("if_acc", &FairnessReport::if_acc)
        .def_readonly("acc_std", &FairnessReport::acc_std)
        .def_readonly("pcc", &FairnessReport::pcc)
        .def_readonly("pcc_defined", &FairnessReport::pcc_defined)
        .def_readonly("sources", &FairnessReport::sources);
    m.def("build_fairness_report", &build_fairness_report, py::arg("per_class"),
          py::arg("per_class_accuracies"), py::arg("method"), py::arg("k"),
          py::arg("centered") = false);
    m.def("report_to_json", &report_to_json, py::arg("report"));
    m.def("report_to_csv", &report_to_csv, py::arg("report"));
    m.def("train_log_to_json", &train_log_to_json, py::arg("log"));
    m.def("train_log_to_csv", &train_log_to_csv, py::arg("log"));
    m.def("train_log_from_json", &train_log_from_json, py::arg("text"));
}
