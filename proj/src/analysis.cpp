#include "manifold_id/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "manifold_id/errors.hpp"
#include "manifold_id/io.hpp"

namespace manifold_id {

using nlohmann::json;

namespace {

// JSON has no Inf/NaN literals; non-finite values round-trip as strings.
json json_num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

double num_from_json(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const std::string& s = j.get_ref<const std::string&>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw FormatError("expected a number, got " + j.dump());
}

json vec_to_json(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) out.push_back(json_num(x));
    return out;
}

std::vector<double> vec_from_json(const json& j) {
    std::vector<double> out;
    for (const auto& x : j) out.push_back(num_from_json(x));
    return out;
}

std::ostream& csv_stream(std::ostream& out) {
    return out << std::setprecision(17);
}

} // namespace

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InvalidArgument("pearson needs equal-length vectors");
    if (x.size() < 2) throw InvalidArgument("pearson needs at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    double sxx = 0.0, syy = 0.0, sxy = 0.0, sx2 = 0.0, sy2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
        sx2 += x[i] * x[i];
        sy2 += y[i] * y[i];
    }
    // A constant vector whose value is not exactly representable leaves
    // variance at the rounding-noise level; treat that as zero too.
    if (sxx <= 1e-24 * sx2 || syy <= 1e-24 * sy2)
        throw EstimationError("correlation undefined: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double imbalance_factor(const std::vector<double>& values) {
    if (values.empty()) throw InvalidArgument("imbalance factor of an empty vector");
    double lo = values[0], hi = values[0];
    for (double v : values) {
        if (!std::isfinite(v) || v <= 0.0)
            throw InvalidArgument("imbalance factor needs positive finite entries");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi / lo;
}

double accuracy_std(const std::vector<double>& acc) {
    if (acc.empty()) throw InvalidArgument("accuracy_std of an empty vector");
    double mean = 0.0;
    for (double a : acc) mean += a;
    mean /= acc.size();
    double var = 0.0;
    for (double a : acc) var += (a - mean) * (a - mean);
    return std::sqrt(var / acc.size());  // population convention
}

std::vector<IdEstimate> layer_profile(const std::vector<std::filesystem::path>& files,
                                      int k, IdMethod method, bool centered) {
    if (files.empty()) throw InvalidArgument("layer profile needs at least one file");
    std::vector<IdEstimate> out;
    Eigen::Index rows = -1;
    for (const auto& file : files) {
        EmbeddingMatrix Z = read_embeddings(file);
        if (rows < 0) rows = Z.rows();
        else if (Z.rows() != rows)
            throw DataError(file.string() + ": has " + std::to_string(Z.rows()) +
                            " rows, expected " + std::to_string(rows) +
                            " (snapshots must cover the same samples)");
        if (method == IdMethod::Pr) {
            IdEstimate est;
            est.value = pr_from_embeddings(Z, centered);
            est.method = IdMethod::Pr;
            est.k = 0;
            est.sample_count = Z.rows();
            out.push_back(est);
        } else {
            out.push_back(global_id(Z, k, method));
        }
    }
    return out;
}

FairnessReport build_fairness_report(const std::vector<EmbeddingMatrix>& per_class,
                                     const std::vector<double>& per_class_acc,
                                     IdMethod method, int k, bool centered) {
    if (per_class.size() != per_class_acc.size())
        throw InvalidArgument("per-class embedding and accuracy counts differ");
    if (per_class.size() < 2) throw InvalidArgument("fairness report needs at least two classes");
    for (double a : per_class_acc)
        if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("accuracies must lie in [0, 1]");

    FairnessReport report;
    report.method = method;
    report.k = method == IdMethod::Pr ? 0 : k;
    report.centered = centered;
    report.class_accuracies = per_class_acc;
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        try {
            report.class_ids.push_back(method == IdMethod::Pr
                                           ? pr_from_embeddings(per_class[c], centered)
                                           : global_id(per_class[c], k, method).value);
        } catch (const EstimationError& e) {
            throw EstimationError("class " + std::to_string(c) + ": " + e.what());
        }
    }
    report.if_id = imbalance_factor(report.class_ids);
    double min_acc = *std::min_element(per_class_acc.begin(), per_class_acc.end());
    report.if_acc = min_acc > 0.0
                        ? imbalance_factor(per_class_acc)
                        : std::numeric_limits<double>::infinity();
    report.acc_std = accuracy_std(per_class_acc);
    try {
        report.pcc = pearson(report.class_ids, per_class_acc);
        report.pcc_defined = true;
    } catch (const EstimationError&) {
        report.pcc = 0.0;
        report.pcc_defined = false;
    }
    return report;
}

std::string report_to_json(const FairnessReport& report) {
    json j;
    j["class_ids"] = vec_to_json(report.class_ids);
    j["class_accuracies"] = vec_to_json(report.class_accuracies);
    j["if_id"] = json_num(report.if_id);
    j["if_acc"] = json_num(report.if_acc);
    j["acc_std"] = json_num(report.acc_std);
    j["pcc"] = report.pcc_defined ? json_num(report.pcc) : json(nullptr);
    j["pcc_defined"] = report.pcc_defined;
    j["method"] = to_string(report.method);
    j["k"] = report.k;
    j["centered"] = report.centered;
    j["std_convention"] = "population";
    j["sources"] = report.sources;
    return j.dump(2) + "\n";
}

std::string report_to_csv(const FairnessReport& report) {
    std::ostringstream out;
    csv_stream(out) << "class_id,id,accuracy\n";
    for (std::size_t c = 0; c < report.class_ids.size(); ++c)
        out << c << ',' << report.class_ids[c] << ',' << report.class_accuracies[c] << '\n';
    return out.str();
}

void write_fairness_report(const FairnessReport& report,
                           const std::filesystem::path& json_path,
                           const std::filesystem::path& csv_path) {
    std::ofstream jf(json_path, std::ios::trunc);
    if (!jf) throw IoError("cannot open " + json_path.string() + " for writing");
    jf << report_to_json(report);
    if (!jf.good()) throw IoError("write failure on " + json_path.string());
    std::ofstream cf(csv_path, std::ios::trunc);
    if (!cf) throw IoError("cannot open " + csv_path.string() + " for writing");
    cf << report_to_csv(report);
    if (!cf.good()) throw IoError("write failure on " + csv_path.string());
}

std::string train_log_to_json(const TrainLog& log) {
    json epochs = json::array();
    for (const EpochRecord& rec : log.epochs) {
        json j;
        j["epoch"] = rec.epoch;
        j["train_loss"] = json_num(rec.train_loss);
        j["l_id"] = json_num(rec.l_id);
        j["effective_weight"] = json_num(rec.effective_weight);
        j["dataset_pr"] = json_num(rec.dataset_pr);
        j["class_id"] = vec_to_json(rec.class_id);
        j["class_accuracy"] = vec_to_json(rec.class_accuracy);
        j["overall_accuracy"] = json_num(rec.overall_accuracy);
        j["if_id"] = json_num(rec.if_id);
        j["if_acc"] = json_num(rec.if_acc);
        j["acc_std"] = json_num(rec.acc_std);
        epochs.push_back(std::move(j));
    }
    json j;
    j["epochs"] = std::move(epochs);
    return j.dump(2) + "\n";
}

TrainLog train_log_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("train log is not valid JSON: ") + e.what());
    }
    if (!j.contains("epochs") || !j["epochs"].is_array())
        throw FormatError("train log JSON lacks an 'epochs' array");
    TrainLog log;
    try {
        for (const auto& e : j["epochs"]) {
            EpochRecord rec;
            rec.epoch = e.at("epoch").get<int>();
            rec.train_loss = num_from_json(e.at("train_loss"));
            rec.l_id = num_from_json(e.at("l_id"));
            rec.effective_weight = num_from_json(e.at("effective_weight"));
            rec.dataset_pr = num_from_json(e.at("dataset_pr"));
            rec.class_id = vec_from_json(e.at("class_id"));
            rec.class_accuracy = vec_from_json(e.at("class_accuracy"));
            rec.overall_accuracy = num_from_json(e.at("overall_accuracy"));
            rec.if_id = num_from_json(e.at("if_id"));
            rec.if_acc = num_from_json(e.at("if_acc"));
            rec.acc_std = num_from_json(e.at("acc_std"));
            log.epochs.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed train log record: ") + e.what());
    }
    return log;
}

std::string model_to_json(const MlpModel& model) {
    model.validate();
    json j;
    j["sizes"] = model.sizes;
    json weights = json::array();
    for (const auto& W : model.weights) {
        json rows = json::array();
        for (Eigen::Index i = 0; i < W.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index c = 0; c < W.cols(); ++c) row.push_back(W(i, c));
            rows.push_back(std::move(row));
        }
        weights.push_back(std::move(rows));
    }
    j["weights"] = std::move(weights);
    json biases = json::array();
    for (const auto& b : model.biases) {
        json vec = json::array();
        for (Eigen::Index i = 0; i < b.size(); ++i) vec.push_back(b(i));
        biases.push_back(std::move(vec));
    }
    j["biases"] = std::move(biases);
    j["activation"] = "tanh";
    return j.dump(2) + "\n";
}

MlpModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("model file is not valid JSON: ") + e.what());
    }
    MlpModel model;
    try {
        model.sizes = j.at("sizes").get<std::vector<int>>();
        for (const auto& rows : j.at("weights")) {
            Eigen::Index r = static_cast<Eigen::Index>(rows.size());
            Eigen::Index c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
            Eigen::MatrixXd W(r, c);
            for (Eigen::Index i = 0; i < r; ++i) {
                if (static_cast<Eigen::Index>(rows[i].size()) != c)
                    throw FormatError("ragged weight matrix in model file");
                for (Eigen::Index t = 0; t < c; ++t) W(i, t) = rows[i][t].get<double>();
            }
            model.weights.push_back(std::move(W));
        }
        for (const auto& vec : j.at("biases")) {
            Eigen::VectorXd b(static_cast<Eigen::Index>(vec.size()));
            for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = vec[i].get<double>();
            model.biases.push_back(std::move(b));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed model file: ") + e.what());
    }
    model.validate();
    return model;
}

std::string train_log_to_csv(const TrainLog& log) {
    std::ostringstream out;
    csv_stream(out);
    std::size_t C = log.epochs.empty() ? 0 : log.epochs.front().class_id.size();
    out << "epoch,train_loss,l_id,effective_weight,dataset_pr,overall_accuracy,if_id,if_acc,acc_std";
    for (std::size_t c = 0; c < C; ++c) out << ",id_" << c;
    for (std::size_t c = 0; c < C; ++c) out << ",acc_" << c;
    out << '\n';
    for (const EpochRecord& rec : log.epochs) {
        out << rec.epoch << ',' << rec.train_loss << ',' << rec.l_id << ','
            << rec.effective_weight << ',' << rec.dataset_pr << ',' << rec.overall_accuracy
            << ',' << rec.if_id << ',' << rec.if_acc << ',' << rec.acc_std;
        for (double v : rec.class_id) out << ',' << v;
        for (double v : rec.class_accuracy) out << ',' << v;
        out << '\n';
    }
    return out.str();
}

} // namespace manifold_id
