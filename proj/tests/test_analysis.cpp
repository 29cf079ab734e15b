#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>

#include "manifold_id/analysis.hpp"
#include "manifold_id/errors.hpp"
#include "manifold_id/io.hpp"
#include "manifold_id/synthetic.hpp"

using namespace manifold_id;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("manifold_id_analysis_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
};

EmbeddingMatrix gaussian(Eigen::Index m, Eigen::Index p, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    EmbeddingMatrix Z(m, p);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < p; ++j) Z(i, j) = normal(rng);
    return Z;
}

} // namespace

TEST_CASE("pearson fixtures") {
    CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson({1, 2, 3}, {6, 4, 2}) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(pearson({1, 2, 3, 4}, {1, -1, 1, -1}) ==
          doctest::Approx(-2.0 / std::sqrt(20.0)).epsilon(1e-12));
    CHECK(std::abs(pearson({1, 2, 3}, {2, 4, 6})) <= 1.0);  // clamped

    CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), EstimationError);
    CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), InvalidArgument);
    CHECK_THROWS_AS(pearson({1}, {2}), InvalidArgument);
}

TEST_CASE("imbalance factor and accuracy std") {
    CHECK(imbalance_factor({2.0, 8.0, 4.0}) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(imbalance_factor({3.0, 3.0}) == 1.0);
    CHECK_THROWS_AS(imbalance_factor({1.0, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(imbalance_factor({}), InvalidArgument);

    CHECK(accuracy_std({0.9, 0.9, 0.9}) == 0.0);
    CHECK(accuracy_std({0.8, 1.0}) == doctest::Approx(0.1).epsilon(1e-12));
    // population convention: divide by C
    CHECK(accuracy_std({0.7, 0.8, 0.9}) ==
          doctest::Approx(std::sqrt(0.02 / 3.0)).epsilon(1e-12));
}

TEST_CASE("layer profile preserves order and checks row counts") {
    TempDir tmp;
    SyntheticSpec spec;
    spec.seed = 17;
    spec.classes = {{2, 8, 300, 0.0, ManifoldKind::LinearGaussian}};
    EmbeddingMatrix low = generate_synthetic(spec).embeddings;
    spec.classes = {{5, 8, 300, 0.0, ManifoldKind::LinearGaussian}};
    spec.seed = 18;
    EmbeddingMatrix high = generate_synthetic(spec).embeddings;

    fs::path f1 = tmp.path / "a.emb1", f2 = tmp.path / "b.emb1";
    write_embeddings(low, f1);
    write_embeddings(high, f2);

    std::vector<IdEstimate> prof = layer_profile({f1, f2}, 0, IdMethod::Pr);
    REQUIRE(prof.size() == 2);
    CHECK(prof[0].value < prof[1].value);
    CHECK(prof[0].method == IdMethod::Pr);
    CHECK(prof[0].sample_count == 300);

    std::vector<IdEstimate> tle = layer_profile({f1, f2}, 15, IdMethod::Tle);
    CHECK(tle[0].value < tle[1].value);
    CHECK(tle[0].k == 15);

    fs::path f3 = tmp.path / "c.emb1";
    write_embeddings(EmbeddingMatrix(gaussian(10, 8, 1)), f3);
    CHECK_THROWS_AS(layer_profile({f1, f3}, 0, IdMethod::Pr), DataError);
    CHECK_THROWS_AS(layer_profile({}, 0, IdMethod::Pr), InvalidArgument);
}

TEST_CASE("fairness report wires ids, accuracies, and diagnostics together") {
    SyntheticSpec spec;
    spec.seed = 23;
    spec.classes = {{2, 12, 400, 0.0, ManifoldKind::LinearGaussian},
                    {4, 12, 400, 0.0, ManifoldKind::LinearGaussian},
                    {8, 12, 400, 0.0, ManifoldKind::LinearGaussian}};
    LabeledEmbeddings data = generate_synthetic(spec);
    std::vector<EmbeddingMatrix> per_class = partition_by_class(data);

    // accuracies decreasing with ID -> strongly negative correlation
    std::vector<double> acc = {0.95, 0.80, 0.55};
    FairnessReport rep = build_fairness_report(per_class, acc, IdMethod::Pr, 0);
    REQUIRE(rep.class_ids.size() == 3);
    CHECK(rep.class_ids[0] < rep.class_ids[1]);
    CHECK(rep.class_ids[1] < rep.class_ids[2]);
    CHECK(rep.if_id == doctest::Approx(rep.class_ids[2] / rep.class_ids[0]).epsilon(1e-12));
    CHECK(rep.if_acc == doctest::Approx(0.95 / 0.55).epsilon(1e-12));
    CHECK(rep.pcc_defined);
    CHECK(rep.pcc < -0.8);
    CHECK(rep.acc_std == doctest::Approx(accuracy_std(acc)).epsilon(1e-12));

    // zero accuracy -> infinite IF(ACC); constant accuracy -> undefined PCC
    FairnessReport zero = build_fairness_report(per_class, {0.9, 0.0, 0.5}, IdMethod::Pr, 0);
    CHECK(std::isinf(zero.if_acc));
    FairnessReport flat = build_fairness_report(per_class, {0.7, 0.7, 0.7}, IdMethod::Pr, 0);
    CHECK_FALSE(flat.pcc_defined);

    CHECK_THROWS_AS(build_fairness_report({per_class[0]}, {0.9}, IdMethod::Pr, 0),
                    InvalidArgument);
    CHECK_THROWS_AS(build_fairness_report(per_class, {0.9, 1.2, 0.5}, IdMethod::Pr, 0),
                    InvalidArgument);
    CHECK_THROWS_AS(build_fairness_report(per_class, {0.9, 0.8}, IdMethod::Pr, 0),
                    InvalidArgument);
}

TEST_CASE("report serialization round trips including non-finite values") {
    FairnessReport rep;
    rep.class_ids = {2.5, 5.0};
    rep.class_accuracies = {1.0, 0.0};
    rep.if_id = 2.0;
    rep.if_acc = std::numeric_limits<double>::infinity();
    rep.acc_std = 0.5;
    rep.pcc = 0.0;
    rep.pcc_defined = false;
    rep.method = IdMethod::Tle;
    rep.k = 20;
    rep.sources = {"a.emb1", "b.emb1"};

    std::string json = report_to_json(rep);
    CHECK(json.find("\"inf\"") != std::string::npos);
    CHECK(json.find("\"population\"") != std::string::npos);
    CHECK(json.find("tle") != std::string::npos);

    std::string csv = report_to_csv(rep);
    CHECK(csv.rfind("class_id,id,accuracy", 0) == 0);
    CHECK(csv.find("\n0,2.5,1\n") != std::string::npos);

    TempDir tmp;
    write_fairness_report(rep, tmp.path / "r.json", tmp.path / "r.csv");
    CHECK(fs::exists(tmp.path / "r.json"));
    CHECK(fs::exists(tmp.path / "r.csv"));
}

TEST_CASE("train log serialization round trips exactly") {
    TrainLog log;
    EpochRecord r;
    r.epoch = 1;
    r.train_loss = 0.6931471805599453;
    r.l_id = 0.0;
    r.effective_weight = 0.0;
    r.dataset_pr = 3.25;
    r.class_id = {2.0, 4.5};
    r.class_accuracy = {0.875, 0.75};
    r.overall_accuracy = 0.8125;
    r.if_id = 2.25;
    r.if_acc = std::numeric_limits<double>::infinity();
    r.acc_std = 0.0625;
    log.epochs.push_back(r);
    r.epoch = 2;
    r.train_loss = 0.123456789012345678;
    r.if_acc = 1.25;
    r.dataset_pr = std::nan("");
    log.epochs.push_back(r);

    TrainLog back = train_log_from_json(train_log_to_json(log));
    REQUIRE(back.epochs.size() == 2);
    for (std::size_t e = 0; e < 2; ++e) {
        const EpochRecord& a = log.epochs[e];
        const EpochRecord& b = back.epochs[e];
        CHECK(a.epoch == b.epoch);
        CHECK(a.train_loss == b.train_loss);  // exact double round trip
        CHECK(a.class_id == b.class_id);
        CHECK(a.class_accuracy == b.class_accuracy);
        CHECK((std::isnan(a.dataset_pr) ? std::isnan(b.dataset_pr)
                                        : a.dataset_pr == b.dataset_pr));
        CHECK(a.if_acc == b.if_acc);
    }

    std::string csv = train_log_to_csv(log);
    CHECK(csv.rfind("epoch,train_loss,l_id,effective_weight,dataset_pr,"
                    "overall_accuracy,if_id,if_acc,acc_std,id_0,id_1,acc_0,acc_1",
                    0) == 0);
    CHECK(csv.find("inf") != std::string::npos);
    CHECK(csv.find("nan") != std::string::npos);
}

TEST_CASE("model serialization round trips bit-for-bit") {
    MlpModel m = init_model({4, 9, 3}, 77);
    MlpModel back = model_from_json(model_to_json(m));
    CHECK(back.sizes == m.sizes);
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        CHECK(back.weights[l] == m.weights[l]);
        CHECK(back.biases[l] == m.biases[l]);
    }
    CHECK_THROWS_AS(model_from_json("{\"sizes\": [3]}"), FormatError);
    CHECK_THROWS_AS(model_from_json("not json"), FormatError);
}
