#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "manifold_id/estimators.hpp"
#include "manifold_id/trainer.hpp"

namespace manifold_id {

// Standard Pearson correlation. Throws EstimationError when either vector has
// zero variance up to rounding (undefined correlation).
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// max/min of a positive vector; >= 1 always. Nonpositive entry ->
// InvalidArgument.
double imbalance_factor(const std::vector<double>& values);

// Population standard deviation (divide by C, not C-1).
double accuracy_std(const std::vector<double>& acc);

// Global ID per embedding snapshot, input order preserved. All files must
// hold the same number of rows. k is ignored for the PR method.
std::vector<IdEstimate> layer_profile(const std::vector<std::filesystem::path>& files,
                                      int k, IdMethod method, bool centered = false);

struct FairnessReport {
    std::vector<double> class_ids;
    std::vector<double> class_accuracies;
    double if_id = 0.0;
    double if_acc = 0.0;  // +inf when the worst class accuracy is 0
    double acc_std = 0.0;
    double pcc = 0.0;
    bool pcc_defined = false;
    // metadata
    IdMethod method = IdMethod::Pr;
    int k = 0;
    bool centered = false;
    std::vector<std::string> sources;
};

// Per-class global IDs + the fairness diagnostics. Zero-variance PCC is
// flagged, not an error; estimator failures are rethrown naming the class.
FairnessReport build_fairness_report(const std::vector<EmbeddingMatrix>& per_class,
                                     const std::vector<double>& per_class_acc,
                                     IdMethod method, int k, bool centered = false);

std::string report_to_json(const FairnessReport& report);
// Fixed column order: class_id, id, accuracy.
std::string report_to_csv(const FairnessReport& report);
void write_fairness_report(const FairnessReport& report,
                           const std::filesystem::path& json_path,
                           const std::filesystem::path& csv_path);

std::string train_log_to_json(const TrainLog& log);
// Fixed column order: epoch, train_loss, l_id, effective_weight, dataset_pr,
// overall_accuracy, if_id, if_acc, acc_std, id_<c>..., acc_<c>...
std::string train_log_to_csv(const TrainLog& log);
TrainLog train_log_from_json(const std::string& text);

std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text);

} // namespace manifold_id
